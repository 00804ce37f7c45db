#include "convfit/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "convfit/kernels.hpp"

namespace convfit {

void OptimConfig::validate(bool stage1) const {
    if (!(lr > 0.0)) throw std::invalid_argument("optim: lr must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
        throw std::invalid_argument("optim: warmup_fraction must be in [0,1)");
    if (weight_decay < 0.0)
        throw std::invalid_argument("optim: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("optim: betas must be in [0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("optim: eps must be positive");
    if (epochs == 0) throw std::invalid_argument("optim: epochs must be >= 1");
    const std::size_t min_batch = stage1 ? 2 : 1;
    if (batch_size < min_batch)
        throw std::invalid_argument(
            stage1 ? "optim: stage-1 batch_size must be >= 2"
                   : "optim: batch_size must be >= 1");
}

double lr_at(std::size_t step, std::size_t total_steps,
             const OptimConfig& cfg) {
    if (total_steps == 0)
        throw std::invalid_argument("lr_at: total_steps must be >= 1");
    if (step > total_steps)
        throw std::invalid_argument("lr_at: step beyond total_steps");
    const auto warmup = static_cast<std::size_t>(
        std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup)
        return cfg.lr * static_cast<double>(step) /
               static_cast<double>(warmup);
    return cfg.lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

AdamW::AdamW(const OptimConfig& cfg) : cfg_(cfg) { cfg.validate(); }

void AdamW::add_param(const std::string& name, const Tensor& t) {
    if (!t.requires_grad())
        throw std::invalid_argument("optim: parameter '" + name +
                                    "' does not track gradients");
    for (const auto& s : slots_)
        if (s.name == name)
            throw std::invalid_argument("optim: duplicate parameter '" + name +
                                        "'");
    Slot slot;
    slot.name = name;
    slot.tensor = t;
    slot.m.assign(t.numel(), 0.0);
    slot.v.assign(t.numel(), 0.0);
    slots_.push_back(std::move(slot));
}

void AdamW::zero_grad() {
    for (auto& s : slots_) s.tensor.zero_grad();
}

void AdamW::step(double lr_t) {
    if (lr_t < 0.0) throw std::invalid_argument("optim: negative rate");
    ++step_count_;
    const double bc1 =
        1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 =
        1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (auto& s : slots_) {
        const auto& g = s.tensor.grad();
        for (double gv : g)
            if (!std::isfinite(gv))
                throw std::runtime_error("optim: non-finite gradient in '" +
                                         s.name + "'");
        kernels::active().adamw(s.tensor.value().data(), s.m.data(),
                                s.v.data(), g.data(), s.tensor.numel(), lr_t,
                                cfg_.beta1, cfg_.beta2, cfg_.eps,
                                cfg_.weight_decay, bc1, bc2);
    }
}

void AdamW::load_state(const std::string& name, std::vector<double> m,
                       std::vector<double> v) {
    for (auto& s : slots_) {
        if (s.name != name) continue;
        if (m.size() != s.tensor.numel() || v.size() != s.tensor.numel())
            throw std::invalid_argument("optim: state size mismatch for '" +
                                        name + "'");
        s.m = std::move(m);
        s.v = std::move(v);
        return;
    }
    throw std::invalid_argument("optim: no parameter named '" + name + "'");
}

}  // namespace convfit
