#include "convfit/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "convfit/kernels.hpp"

namespace convfit {

nlohmann::json EvalReport::to_json() const {
    return {{"accuracy", accuracy}, {"per_class", per_class},
            {"n", n},               {"seeds", seeds},
            {"mean", mean},         {"std", std_dev},
            {"distance_metric", distance_metric}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.per_class = j.at("per_class").get<std::map<std::string, double>>();
    r.n = j.at("n").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.mean = j.at("mean").get<double>();
    r.std_dev = j.at("std").get<double>();
    r.distance_metric = j.at("distance_metric").get<std::string>();
    return r;
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& gold) {
    if (predictions.empty())
        throw std::invalid_argument("accuracy: no predictions");
    if (predictions.size() != gold.size())
        throw std::invalid_argument(
            "accuracy: prediction and gold counts differ");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (predictions[i] == gold[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

EvalReport make_report(const std::vector<std::string>& predictions,
                       const std::vector<std::string>& gold,
                       std::uint64_t seed,
                       const std::string& distance_metric) {
    EvalReport r;
    r.accuracy = accuracy(predictions, gold);
    r.n = gold.size();
    r.seeds = {seed};
    r.mean = r.accuracy;
    r.std_dev = 0.0;
    r.distance_metric = distance_metric;

    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        auto& [hit, total] = counts[gold[i]];
        ++total;
        if (predictions[i] == gold[i]) ++hit;
    }
    for (const auto& [label, c] : counts)
        r.per_class[label] =
            static_cast<double>(c.first) / static_cast<double>(c.second);
    return r;
}

namespace {

double row_distance(const double* a, const double* b, std::size_t dim,
                    bool cosine) {
    const auto& k = kernels::active();
    if (cosine) {
        const double na = std::sqrt(k.sumsq(a, dim));
        const double nb = std::sqrt(k.sumsq(b, dim));
        if (na == 0.0 || nb == 0.0)
            throw std::domain_error("silhouette: zero-norm row");
        return 1.0 - k.dot(a, b, dim) / (na * nb);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

double silhouette(const std::vector<double>& vectors, std::size_t dim,
                  const std::vector<std::string>& labels,
                  const std::string& metric) {
    if (metric != "cosine" && metric != "euclidean")
        throw std::invalid_argument("silhouette: unknown metric '" + metric +
                                    "'");
    if (dim == 0 || vectors.size() != labels.size() * dim)
        throw std::invalid_argument(
            "silhouette: vector buffer does not match labels");
    const std::size_t m = labels.size();
    if (m < 2) throw std::invalid_argument("silhouette: need at least 2 rows");

    std::map<std::string, std::size_t> cluster_sizes;
    for (const auto& l : labels) ++cluster_sizes[l];
    if (cluster_sizes.size() < 2)
        throw std::invalid_argument("silhouette: need at least 2 labels");

    const bool cosine = metric == "cosine";
    std::vector<double> dist(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d = row_distance(vectors.data() + i * dim,
                                          vectors.data() + j * dim, dim,
                                          cosine);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (cluster_sizes.at(labels[i]) == 1) continue;  // s(i) = 0

        std::map<std::string, std::pair<double, std::size_t>> per_label;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            auto& [sum, count] = per_label[labels[j]];
            sum += dist[i * m + j];
            ++count;
        }
        const auto& own = per_label.at(labels[i]);
        const double a = own.first / static_cast<double>(own.second);
        double b = 0.0;
        bool first = true;
        for (const auto& [label, agg] : per_label) {
            if (label == labels[i]) continue;
            const double mean_d =
                agg.first / static_cast<double>(agg.second);
            if (first || mean_d < b) b = mean_d;
            first = false;
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(m);
}

EvalReport evaluate_runs(const std::vector<EvalReport>& runs) {
    if (runs.empty()) throw std::invalid_argument("evaluate_runs: no runs");

    EvalReport out;
    out.distance_metric = runs.front().distance_metric;
    for (const auto& run : runs) {
        if (run.distance_metric != out.distance_metric)
            throw std::invalid_argument(
                "evaluate_runs: distance metric differs across runs");
        if (run.per_class.size() != runs.front().per_class.size())
            throw std::invalid_argument(
                "evaluate_runs: class sets differ across runs");
        for (const auto& [label, value] : run.per_class)
            if (runs.front().per_class.count(label) == 0)
                throw std::invalid_argument(
                    "evaluate_runs: class sets differ across runs");
        out.n += run.n;
        out.seeds.insert(out.seeds.end(), run.seeds.begin(),
                         run.seeds.end());
    }

    double sum = 0.0;
    for (const auto& run : runs) sum += run.accuracy;
    out.mean = sum / static_cast<double>(runs.size());
    out.accuracy = out.mean;

    double sq = 0.0;
    for (const auto& run : runs) {
        const double d = run.accuracy - out.mean;
        sq += d * d;
    }
    out.std_dev = runs.size() > 1
                      ? std::sqrt(sq / static_cast<double>(runs.size() - 1))
                      : 0.0;

    for (const auto& run : runs)
        for (const auto& [label, value] : run.per_class)
            out.per_class[label] += value / static_cast<double>(runs.size());
    return out;
}

}  // namespace convfit
