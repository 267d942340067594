#pragma once

#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops shared by the forward pass, the gradient
// accumulation, interpolation and the optimizer. Every routine has a scalar
// reference implementation; wider variants are selected once at runtime.
//
// Element-wise kernels (axpy, lerp, adam_update) are bit-identical across
// variants because they avoid fused multiply-add. dot() is a reduction and
// may differ from the scalar reference in the last few ulps.

namespace treelmc::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct AdamCoefficients {
    double step_size;   // lr / (1 - beta1^t)
    double beta1;
    double beta2;
    double sqrt_bias2;  // sqrt(1 - beta2^t)
    double eps;
};

struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = lambda * a + (1 - lambda) * b
    void (*lerp)(double lambda, const double* a, const double* b, double* out, std::size_t n);
    void (*adam_update)(const AdamCoefficients& c, const double* grad, double* m, double* v,
                        double* param, std::size_t n);
};

std::string_view isa_name(Isa isa);

/// Variants compiled into this build that the running CPU supports.
std::vector<Isa> available_isas();

/// Table for a specific variant; throws if it is unavailable.
const KernelTable& table(Isa isa);

/// Process-wide table. Picks the widest available variant on first use unless
/// TREELMC_SIMD=scalar|avx2|neon overrides it.
const KernelTable& active();

void set_active(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void lerp(double lambda, std::span<const double> a, std::span<const double> b,
                 std::span<double> out) {
    active().lerp(lambda, a.data(), b.data(), out.data(), a.size());
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(TREELMC_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(TREELMC_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace treelmc::kernels
