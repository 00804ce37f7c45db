#include "convfit/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace convfit::kernels {

#ifdef CONVFIT_HAVE_AVX2
bool avx2_supported() { return __builtin_cpu_supports("avx2"); }
#else
bool avx2_supported() { return false; }
const Backend& avx2_backend() {
    throw std::runtime_error("kernels: avx2 backend not compiled in");
}
#endif

namespace {

const Backend* select(const std::string& name) {
    if (name == "scalar") return &scalar_backend();
    if (name == "avx2") {
        if (!avx2_supported())
            throw std::runtime_error("kernels: avx2 requested but unavailable");
        return &avx2_backend();
    }
    if (name == "auto")
        return avx2_supported() ? &avx2_backend() : &scalar_backend();
    throw std::runtime_error("kernels: unknown backend '" + name + "'");
}

const Backend*& chosen() {
    static const Backend* b = nullptr;
    return b;
}

}  // namespace

const Backend& active() {
    const Backend*& b = chosen();
    if (b == nullptr) {
        const char* env = std::getenv("CONVFIT_KERNELS");
        b = select(env != nullptr ? env : "auto");
    }
    return *b;
}

void force_backend(const std::string& name) { chosen() = select(name); }

}  // namespace convfit::kernels
