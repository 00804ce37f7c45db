#include "convfit/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "convfit/kernels.hpp"

namespace convfit {

namespace {

std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

const kernels::Backend& K() { return kernels::active(); }

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = shape;
    t.d_->value.assign(numel_of(shape), 0.0);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->grad.assign(t.d_->value.size(), 0.0);
    return t;
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    for (auto& x : t.d_->value) x = v;
    return t;
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values,
                    bool requires_grad) {
    require(values.size() == numel_of(shape),
            "Tensor::from: value count does not match shape");
    Tensor t = zeros(shape, requires_grad);
    t.d_->value = std::move(values);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

const Shape& Tensor::shape() const { return d_->shape; }
std::size_t Tensor::numel() const { return d_->value.size(); }
bool Tensor::requires_grad() const { return d_->requires_grad; }

std::vector<double>& Tensor::value() { return d_->value; }
const std::vector<double>& Tensor::value() const { return d_->value; }

std::vector<double>& Tensor::grad() {
    if (!d_->requires_grad)
        throw std::logic_error("Tensor::grad: tensor does not track gradients");
    return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (!d_->requires_grad)
        throw std::logic_error("Tensor::grad: tensor does not track gradients");
    return d_->grad;
}

double Tensor::item() const {
    require(numel() == 1, "Tensor::item: tensor is not a scalar");
    return d_->value[0];
}

void Tensor::zero_grad() {
    if (d_->requires_grad) d_->grad.assign(d_->value.size(), 0.0);
}

void Tape::record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& root) {
    require(root.numel() == 1, "Tape::backward: root must be a scalar");
    if (!root.requires_grad())
        throw std::logic_error("Tape::backward: root does not track gradients");
    Tensor r = root;
    r.grad()[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with scalar broadcast.

namespace {

void check_binary(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return;
    if (a.numel() == 1 || b.numel() == 1) return;
    throw std::invalid_argument(std::string(op) +
                                ": shapes differ and neither is a scalar");
}

}  // namespace

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    check_binary(a, b, "add");
    const bool as = a.numel() == 1 && b.numel() != 1;
    const bool bs = b.numel() == 1 && a.numel() != 1;
    Tensor out = Tensor::zeros(as ? b.shape() : a.shape(),
                               a.requires_grad() || b.requires_grad());
    const std::size_t n = out.numel();
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    if (!as && !bs) {
        K().add(av.data(), bv.data(), ov.data(), n);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            ov[i] = (as ? av[0] : av[i]) + (bs ? bv[0] : bv[i]);
    }
    if (out.requires_grad())
        t.record([a = a, b = b, out = out, as, bs, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& da = a.grad();
                if (as)
                    da[0] += K().sum(g.data(), n);
                else
                    K().axpy(1.0, g.data(), da.data(), n);
            }
            if (b.requires_grad()) {
                auto& db = b.grad();
                if (bs)
                    db[0] += K().sum(g.data(), n);
                else
                    K().axpy(1.0, g.data(), db.data(), n);
            }
        });
    return out;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    check_binary(a, b, "sub");
    const bool as = a.numel() == 1 && b.numel() != 1;
    const bool bs = b.numel() == 1 && a.numel() != 1;
    Tensor out = Tensor::zeros(as ? b.shape() : a.shape(),
                               a.requires_grad() || b.requires_grad());
    const std::size_t n = out.numel();
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    if (!as && !bs) {
        K().sub(av.data(), bv.data(), ov.data(), n);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            ov[i] = (as ? av[0] : av[i]) - (bs ? bv[0] : bv[i]);
    }
    if (out.requires_grad())
        t.record([a = a, b = b, out = out, as, bs, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& da = a.grad();
                if (as)
                    da[0] += K().sum(g.data(), n);
                else
                    K().axpy(1.0, g.data(), da.data(), n);
            }
            if (b.requires_grad()) {
                auto& db = b.grad();
                if (bs)
                    db[0] -= K().sum(g.data(), n);
                else
                    K().axpy(-1.0, g.data(), db.data(), n);
            }
        });
    return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    check_binary(a, b, "mul");
    const bool as = a.numel() == 1 && b.numel() != 1;
    const bool bs = b.numel() == 1 && a.numel() != 1;
    Tensor out = Tensor::zeros(as ? b.shape() : a.shape(),
                               a.requires_grad() || b.requires_grad());
    const std::size_t n = out.numel();
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    if (!as && !bs) {
        K().mul(av.data(), bv.data(), ov.data(), n);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            ov[i] = (as ? av[0] : av[i]) * (bs ? bv[0] : bv[i]);
    }
    if (out.requires_grad())
        t.record([a = a, b = b, out = out, as, bs, n]() mutable {
            const auto& g = out.grad();
            const auto& av2 = a.value();
            const auto& bv2 = b.value();
            if (a.requires_grad()) {
                auto& da = a.grad();
                if (as)
                    da[0] += K().dot(g.data(), bv2.data(), n);
                else if (bs)
                    K().axpy(bv2[0], g.data(), da.data(), n);
                else
                    for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * bv2[i];
            }
            if (b.requires_grad()) {
                auto& db = b.grad();
                if (bs)
                    db[0] += K().dot(g.data(), av2.data(), n);
                else if (as)
                    K().axpy(av2[0], g.data(), db.data(), n);
                else
                    for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * av2[i];
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise unary ops.

Tensor scale(Tape& t, const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = a.numel();
    K().scale(c, a.value().data(), out.value().data(), n);
    if (out.requires_grad())
        t.record([a = a, out = out, c, n]() mutable {
            K().axpy(c, out.grad().data(), a.grad().data(), n);
        });
    return out;
}

Tensor square(Tape& t, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = a.numel();
    K().mul(a.value().data(), a.value().data(), out.value().data(), n);
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const auto& g = out.grad();
            const auto& av = a.value();
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i) da[i] += 2.0 * av[i] * g[i];
        });
    return out;
}

Tensor tanh(Tape& t, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = a.numel();
    const auto& av = a.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < n; ++i) ov[i] = std::tanh(av[i]);
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const auto& g = out.grad();
            const auto& ov2 = out.value();
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i)
                da[i] += g[i] * (1.0 - ov2[i] * ov2[i]);
        });
    return out;
}

Tensor relu(Tape& t, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = a.numel();
    K().relu(a.value().data(), out.value().data(), n);
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const auto& g = out.grad();
            const auto& av = a.value();
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i)
                if (av[i] > 0.0) da[i] += g[i];
        });
    return out;
}

Tensor abs(Tape& t, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    const std::size_t n = a.numel();
    K().absval(a.value().data(), out.value().data(), n);
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const auto& g = out.grad();
            const auto& av = a.value();
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (av[i] > 0.0)
                    da[i] += g[i];
                else if (av[i] < 0.0)
                    da[i] -= g[i];
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Matrix product, strictly 2-D.

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2,
            "matmul: both operands must be 2-D");
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    require(b.shape()[0] == k, "matmul: inner dimensions differ");
    const std::size_t n = b.shape()[1];

    Tensor out =
        Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
            K().axpy(av[i * k + p], bv.data() + p * n, ov.data() + i * n, n);

    if (out.requires_grad())
        t.record([a = a, b = b, out = out, m = m, k, n]() mutable {
            const auto& g = out.grad();
            const auto& av2 = a.value();
            const auto& bv2 = b.value();
            if (a.requires_grad()) {
                auto& da = a.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p)
                        da[i * k + p] +=
                            K().dot(g.data() + i * n, bv2.data() + p * n, n);
            }
            if (b.requires_grad()) {
                auto& db = b.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p)
                        K().axpy(av2[i * k + p], g.data() + i * n,
                                 db.data() + p * n, n);
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions to scalar.

Tensor sum(Tape& t, const Tensor& a) {
    const std::size_t n = a.numel();
    Tensor out = Tensor::scalar(K().sum(a.value().data(), n), a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const double g = out.grad()[0];
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i) da[i] += g;
        });
    return out;
}

Tensor mean(Tape& t, const Tensor& a) {
    const std::size_t n = a.numel();
    require(n > 0, "mean: empty tensor");
    Tensor out =
        Tensor::scalar(K().sum(a.value().data(), n) / static_cast<double>(n),
                       a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const double g = out.grad()[0] / static_cast<double>(n);
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i) da[i] += g;
        });
    return out;
}

Tensor max(Tape& t, const Tensor& a) {
    const std::size_t n = a.numel();
    require(n > 0, "max: empty tensor");
    const auto& av = a.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (av[i] > av[best]) best = i;
    Tensor out = Tensor::scalar(av[best], a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out, best]() mutable {
            a.grad()[best] += out.grad()[0];
        });
    return out;
}

Tensor log_sum_exp(Tape& t, const Tensor& a) {
    require(a.shape().size() == 1, "log_sum_exp: input must be 1-D");
    const std::size_t n = a.numel();
    require(n > 0, "log_sum_exp: empty tensor");
    const auto& av = a.value();
    double hi = av[0];
    for (std::size_t i = 1; i < n; ++i)
        if (av[i] > hi) hi = av[i];
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(av[i] - hi);
    Tensor out = Tensor::scalar(hi + std::log(s), a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out, n]() mutable {
            const double g = out.grad()[0];
            const double o = out.value()[0];
            const auto& av2 = a.value();
            auto& da = a.grad();
            for (std::size_t i = 0; i < n; ++i)
                da[i] += g * std::exp(av2[i] - o);
        });
    return out;
}

// ---------------------------------------------------------------------------
// Cosine similarity as one node.

Tensor cosine_similarity(Tape& t, const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 1 && b.shape().size() == 1,
            "cosine_similarity: inputs must be 1-D");
    require(a.numel() == b.numel(), "cosine_similarity: lengths differ");
    const std::size_t n = a.numel();
    const auto& av = a.value();
    const auto& bv = b.value();
    const double na2 = K().sumsq(av.data(), n);
    const double nb2 = K().sumsq(bv.data(), n);
    if (na2 == 0.0 || nb2 == 0.0)
        throw std::domain_error("cosine_similarity: zero-norm input");
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    const double d = K().dot(av.data(), bv.data(), n);
    const double c = d / (na * nb);
    Tensor out = Tensor::scalar(c, a.requires_grad() || b.requires_grad());
    if (out.requires_grad())
        t.record([a = a, b = b, out = out, n, na, nb, na2, nb2, c]() mutable {
            const double g = out.grad()[0];
            const auto& av2 = a.value();
            const auto& bv2 = b.value();
            if (a.requires_grad()) {
                auto& da = a.grad();
                for (std::size_t i = 0; i < n; ++i)
                    da[i] += g * (bv2[i] / (na * nb) - c * av2[i] / na2);
            }
            if (b.requires_grad()) {
                auto& db = b.grad();
                for (std::size_t i = 0; i < n; ++i)
                    db[i] += g * (av2[i] / (na * nb) - c * bv2[i] / nb2);
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Shape plumbing.

Tensor concat(Tape& t, const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat: no inputs");
    std::size_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require(p.shape().size() == 1, "concat: inputs must be 1-D");
        total += p.numel();
        rg = rg || p.requires_grad();
    }
    Tensor out = Tensor::zeros({total}, rg);
    auto& ov = out.value();
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.value();
        for (std::size_t i = 0; i < pv.size(); ++i) ov[off + i] = pv[i];
        off += pv.size();
    }
    if (rg)
        t.record([parts = parts, out = out]() mutable {
            const auto& g = out.grad();
            std::size_t o = 0;
            for (auto& p : parts) {
                const std::size_t n = p.numel();
                if (p.requires_grad())
                    K().axpy(1.0, g.data() + o, p.grad().data(), n);
                o += n;
            }
        });
    return out;
}

Tensor row(Tape& t, const Tensor& m, std::size_t i) {
    require(m.shape().size() == 2, "row: input must be 2-D");
    const std::size_t c = m.shape()[1];
    require(i < m.shape()[0], "row: index out of range");
    Tensor out = Tensor::zeros({c}, m.requires_grad());
    const auto& mv = m.value();
    auto& ov = out.value();
    for (std::size_t j = 0; j < c; ++j) ov[j] = mv[i * c + j];
    if (out.requires_grad())
        t.record([m = m, out = out, i, c]() mutable {
            K().axpy(1.0, out.grad().data(), m.grad().data() + i * c, c);
        });
    return out;
}

Tensor gather_rows(Tape& t, const Tensor& m,
                   const std::vector<std::size_t>& rows) {
    require(m.shape().size() == 2, "gather_rows: input must be 2-D");
    const std::size_t c = m.shape()[1];
    for (std::size_t r : rows)
        require(r < m.shape()[0], "gather_rows: index out of range");
    Tensor out = Tensor::zeros({rows.size(), c}, m.requires_grad());
    const auto& mv = m.value();
    auto& ov = out.value();
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t j = 0; j < c; ++j) ov[k * c + j] = mv[rows[k] * c + j];
    if (out.requires_grad())
        t.record([m = m, out = out, rows, c]() mutable {
            const auto& g = out.grad();
            auto& dm = m.grad();
            for (std::size_t k = 0; k < rows.size(); ++k)
                K().axpy(1.0, g.data() + k * c, dm.data() + rows[k] * c, c);
        });
    return out;
}

Tensor add_rowvec(Tape& t, const Tensor& m, const Tensor& v) {
    require(m.shape().size() == 2, "add_rowvec: matrix must be 2-D");
    require(v.shape().size() == 1, "add_rowvec: bias must be 1-D");
    const std::size_t r = m.shape()[0];
    const std::size_t c = m.shape()[1];
    require(v.numel() == c, "add_rowvec: bias length must match columns");
    Tensor out =
        Tensor::zeros({r, c}, m.requires_grad() || v.requires_grad());
    const auto& mv = m.value();
    const auto& vv = v.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < r; ++i)
        K().add(mv.data() + i * c, vv.data(), ov.data() + i * c, c);
    if (out.requires_grad())
        t.record([m = m, v = v, out = out, r, c]() mutable {
            const auto& g = out.grad();
            if (m.requires_grad())
                K().axpy(1.0, g.data(), m.grad().data(), r * c);
            if (v.requires_grad()) {
                auto& dv = v.grad();
                for (std::size_t i = 0; i < r; ++i)
                    K().axpy(1.0, g.data() + i * c, dv.data(), c);
            }
        });
    return out;
}

Tensor reshape(Tape& t, const Tensor& a, const Shape& shape) {
    require(numel_of(shape) == a.numel(),
            "reshape: element count must be preserved");
    Tensor out = Tensor::from(shape, a.value(), a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out]() mutable {
            K().axpy(1.0, out.grad().data(), a.grad().data(), a.numel());
        });
    return out;
}

Tensor element(Tape& t, const Tensor& a, std::size_t flat_index) {
    require(flat_index < a.numel(), "element: index out of range");
    Tensor out = Tensor::scalar(a.value()[flat_index], a.requires_grad());
    if (out.requires_grad())
        t.record([a = a, out = out, flat_index]() mutable {
            a.grad()[flat_index] += out.grad()[0];
        });
    return out;
}

}  // namespace convfit
