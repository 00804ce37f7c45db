#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convfit/tensor.hpp"

// AdamW with a linear warmup/decay schedule. The optimizer owns first and
// second moment buffers per registered parameter and walks them in
// registration order, so updates are fully deterministic.

namespace convfit {

struct OptimConfig {
    double lr = 2e-5;
    double warmup_fraction = 0.1;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    void validate(bool stage1 = false) const;  // throws std::invalid_argument
};

// Piecewise-linear: 0 -> lr over the first ceil(warmup_fraction * total)
// steps, then lr -> 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps,
             const OptimConfig& cfg);

class AdamW {
  public:
    explicit AdamW(const OptimConfig& cfg);

    // Parameters update in registration order. Names appear in
    // diagnostics and checkpointed state.
    void add_param(const std::string& name, const Tensor& t);

    void zero_grad();

    // One update over all registered parameters at the given rate.
    // Throws on a non-finite gradient, naming the offending tensor.
    void step(double lr_t);

    std::size_t step_count() const { return step_count_; }

    struct Slot {
        std::string name;
        Tensor tensor;
        std::vector<double> m;
        std::vector<double> v;
    };
    const std::vector<Slot>& slots() const { return slots_; }

    // Restores moment buffers and the step counter (checkpoint resume).
    void load_state(const std::string& name, std::vector<double> m,
                    std::vector<double> v);
    void set_step_count(std::size_t t) { step_count_ = t; }

  private:
    OptimConfig cfg_;
    std::vector<Slot> slots_;
    std::size_t step_count_ = 0;
};

}  // namespace convfit
