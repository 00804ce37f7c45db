#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

// Evaluation: exact accuracy, cluster coherence via the silhouette
// coefficient, and aggregation of per-seed runs into one report.

namespace convfit {

struct EvalReport {
    double accuracy = 0.0;
    std::map<std::string, double> per_class;
    std::size_t n = 0;
    std::vector<std::uint64_t> seeds;
    double mean = 0.0;
    double std_dev = 0.0;
    std::string distance_metric = "cosine";

    bool operator==(const EvalReport&) const = default;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Fraction of positions where the labels match, exactly.
double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& gold);

// Single-run report: overall and per-class accuracy on one test set.
EvalReport make_report(const std::vector<std::string>& predictions,
                       const std::vector<std::string>& gold,
                       std::uint64_t seed, const std::string& distance_metric);

// Mean silhouette over rows of a flat M x dim matrix. Per point,
// a = mean distance to its own label's other points, b = the smallest
// mean distance to any other label, s = (b-a)/max(a,b); points alone in
// their cluster score 0, as does a degenerate max(a,b) = 0. metric is
// "cosine" (1 - cos) or "euclidean".
double silhouette(const std::vector<double>& vectors, std::size_t dim,
                  const std::vector<std::string>& labels,
                  const std::string& metric);

// Mean and sample standard deviation of accuracy across runs; per-class
// values are averaged, example counts summed, seeds concatenated. Every
// run must score the same class set with the same distance metric.
EvalReport evaluate_runs(const std::vector<EvalReport>& runs);

}  // namespace convfit
