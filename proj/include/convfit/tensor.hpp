#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

// Reverse-mode autodiff over dense f64 tensors. A Tape collects one
// backward closure per recorded op in execution order; backward() seeds
// d(root)=1 and replays the closures in reverse, accumulating into each
// tensor's grad buffer. Ops skip recording entirely when no input needs
// gradients, so inference reuses the same code paths at no tape cost.

namespace convfit {

using Shape = std::vector<std::size_t>;

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double v, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    bool requires_grad() const;

    std::vector<double>& value();
    const std::vector<double>& value() const;
    std::vector<double>& grad();
    const std::vector<double>& grad() const;

    double item() const;  // numel() must be 1
    void zero_grad();

    // Identity of the underlying buffer (views/copies share it).
    const void* data_id() const { return d_.get(); }

  private:
    struct Data {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;
};

class Tape {
  public:
    // Closures run in reverse record order during backward(). Custom ops
    // outside this header use record() directly.
    void record(std::function<void()> backward_step);
    void backward(const Tensor& root);
    std::size_t size() const { return steps_.size(); }

  private:
    std::vector<std::function<void()>> steps_;
};

// Elementwise; shapes must match exactly, except that either operand may
// be a scalar (numel 1), which broadcasts.
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);

Tensor scale(Tape& t, const Tensor& a, double c);
Tensor square(Tape& t, const Tensor& a);
Tensor tanh(Tape& t, const Tensor& a);
Tensor relu(Tape& t, const Tensor& a);
Tensor abs(Tape& t, const Tensor& a);

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);  // [m,k]x[k,n]

Tensor sum(Tape& t, const Tensor& a);
Tensor mean(Tape& t, const Tensor& a);
Tensor max(Tape& t, const Tensor& a);           // grad to first max element
Tensor log_sum_exp(Tape& t, const Tensor& a);   // 1-D, max-shifted

// 1-D x 1-D -> scalar, one fused node with the analytic gradient. Throws
// on a zero-norm input rather than guessing an epsilon.
Tensor cosine_similarity(Tape& t, const Tensor& a, const Tensor& b);

Tensor concat(Tape& t, const std::vector<Tensor>& parts);  // 1-D pieces

Tensor row(Tape& t, const Tensor& m, std::size_t i);  // [r,c] -> [c]
Tensor gather_rows(Tape& t, const Tensor& m,
                   const std::vector<std::size_t>& rows);  // -> [k,c]
Tensor add_rowvec(Tape& t, const Tensor& m, const Tensor& v);  // [r,c]+[c]
Tensor reshape(Tape& t, const Tensor& a, const Shape& shape);
Tensor element(Tape& t, const Tensor& a, std::size_t flat_index);  // scalar

}  // namespace convfit
