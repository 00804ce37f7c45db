#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "convfit/tensor.hpp"

// Central-difference gradient verification. The builder must construct a
// fresh graph from the current parameter values each call and return the
// scalar loss; it is evaluated 2*numel times per parameter plus once for
// the analytic pass.

namespace convfit {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline GradCheckReport finite_difference_check(
    const std::function<Tensor(Tape&)>& build, std::vector<Tensor> params,
    double h = 1e-5) {
    for (auto& p : params) p.zero_grad();
    Tape tape;
    Tensor loss = build(tape);
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.grad());

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].value();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            Tape tp;
            const double fp = build(tp).item();
            vals[i] = orig - h;
            Tape tm;
            const double fm = build(tm).item();
            vals[i] = orig;

            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom =
                std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_err) report.max_rel_err = rel;
            ++report.checked;
        }
    }
    return report;
}

}  // namespace convfit
