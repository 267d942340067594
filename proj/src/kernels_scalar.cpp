#include "treelmc/kernels.hpp"

#include <cmath>

namespace treelmc::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void lerp_scalar(double lambda, const double* a, const double* b, double* out, std::size_t n) {
    const double mu = 1.0 - lambda;
    for (std::size_t i = 0; i < n; ++i) out[i] = lambda * a[i] + mu * b[i];
}

void adam_scalar(const AdamCoefficients& c, const double* grad, double* m, double* v,
                 double* param, std::size_t n) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = c.beta1 * m[i] + one_minus_b1 * g;
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
        const double denom = std::sqrt(v[i]) / c.sqrt_bias2 + c.eps;
        param[i] -= c.step_size * (m[i] / denom);
    }
}

}  // namespace

const KernelTable scalar_table{Isa::Scalar, dot_scalar, axpy_scalar, lerp_scalar, adam_scalar};

}  // namespace treelmc::kernels::detail
