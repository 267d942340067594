#include "treelmc/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace treelmc::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) {
        const double prod = alpha * x[i];
        y[i] = y[i] + prod;
    }
}

void lerp_neon(double lambda, const double* a, const double* b, double* out, std::size_t n) {
    const double mu = 1.0 - lambda;
    const float64x2_t vl = vdupq_n_f64(lambda);
    const float64x2_t vm = vdupq_n_f64(mu);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vaddq_f64(vmulq_f64(vl, vld1q_f64(a + i)), vmulq_f64(vm, vld1q_f64(b + i))));
    }
    for (; i < n; ++i) {
        const double pa = lambda * a[i];
        const double pb = mu * b[i];
        out[i] = pa + pb;
    }
}

void adam_neon(const AdamCoefficients& c, const double* grad, double* m, double* v,
               double* param, std::size_t n) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    const float64x2_t b1 = vdupq_n_f64(c.beta1);
    const float64x2_t b2 = vdupq_n_f64(c.beta2);
    const float64x2_t ob1 = vdupq_n_f64(one_minus_b1);
    const float64x2_t ob2 = vdupq_n_f64(one_minus_b2);
    const float64x2_t sb2 = vdupq_n_f64(c.sqrt_bias2);
    const float64x2_t eps = vdupq_n_f64(c.eps);
    const float64x2_t step = vdupq_n_f64(c.step_size);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t g = vld1q_f64(grad + i);
        const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(ob1, g));
        const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(ob2, vmulq_f64(g, g)));
        vst1q_f64(m + i, mi);
        vst1q_f64(v + i, vi);
        const float64x2_t denom = vaddq_f64(vdivq_f64(vsqrtq_f64(vi), sb2), eps);
        vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), vmulq_f64(step, vdivq_f64(mi, denom))));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        const double t1 = c.beta1 * m[i];
        const double t2 = one_minus_b1 * g;
        m[i] = t1 + t2;
        const double t3 = c.beta2 * v[i];
        const double t4 = one_minus_b2 * (g * g);
        v[i] = t3 + t4;
        const double denom = std::sqrt(v[i]) / c.sqrt_bias2 + c.eps;
        const double upd = c.step_size * (m[i] / denom);
        param[i] = param[i] - upd;
    }
}

}  // namespace

const KernelTable neon_table{Isa::Neon, dot_neon, axpy_neon, lerp_neon, adam_neon};

}  // namespace treelmc::kernels::detail
