#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops shared by the tensor engine, the optimizer and
// the nearest-neighbour scans. Every kernel exists twice: a plain scalar
// reference and an AVX2 variant. The active backend is picked once at
// startup (env CONVFIT_KERNELS=scalar|avx2 overrides auto-detection).
//
// Equivalence contract, checked in tests/test_kernels.cpp:
//   - elementwise kernels (axpy, scale, add, sub, mul, relu, absval, adamw)
//     produce bit-identical results in both lanes: per-element IEEE op
//     order is fixed and FP contraction is disabled project-wide;
//   - reductions (dot, sum, sumsq) reassociate across SIMD lanes and agree
//     within a small relative tolerance only.

namespace convfit::kernels {

struct Backend {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out[i] = alpha * x[i]
    void (*scale)(double alpha, const double* x, double* out, std::size_t n);
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*relu)(const double* x, double* out, std::size_t n);
    void (*absval)(const double* x, double* out, std::size_t n);

    // Decoupled-weight-decay Adam update for one parameter buffer.
    //   m <- beta1*m + (1-beta1)*g
    //   v <- beta2*v + (1-beta2)*g^2
    //   p <- p - lr*((m/bc1) / (sqrt(v/bc2) + eps) + wd*p)
    // bc1/bc2 are the bias corrections 1-beta1^t and 1-beta2^t.
    void (*adamw)(double* p, double* m, double* v, const double* g,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double wd, double bc1, double bc2);
};

const Backend& scalar_backend();
bool avx2_supported();
const Backend& avx2_backend();  // only valid when avx2_supported()

// Chosen backend for this process. Cached after the first call.
const Backend& active();

// Test hook: "scalar", "avx2" or "auto". Throws on unknown names or when
// avx2 is requested on a machine without it.
void force_backend(const std::string& name);

}  // namespace convfit::kernels
