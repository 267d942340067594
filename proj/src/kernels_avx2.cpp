#include "treelmc/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace treelmc::kernels::detail {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    const __m128d lo = _mm256_castpd256_pd128(acc0);
    const __m128d hi = _mm256_extractf128_pd(acc0, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    double acc = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

// Element-wise kernels use separate mul/add so each lane rounds exactly like
// the scalar reference.
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) {
        const double prod = alpha * x[i];
        y[i] = y[i] + prod;
    }
}

void lerp_avx2(double lambda, const double* a, const double* b, double* out, std::size_t n) {
    const double mu = 1.0 - lambda;
    const __m256d vl = _mm256_set1_pd(lambda);
    const __m256d vm = _mm256_set1_pd(mu);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d pa = _mm256_mul_pd(vl, _mm256_loadu_pd(a + i));
        const __m256d pb = _mm256_mul_pd(vm, _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(pa, pb));
    }
    for (; i < n; ++i) {
        const double pa = lambda * a[i];
        const double pb = mu * b[i];
        out[i] = pa + pb;
    }
}

void adam_avx2(const AdamCoefficients& c, const double* grad, double* m, double* v,
               double* param, std::size_t n) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d ob1 = _mm256_set1_pd(one_minus_b1);
    const __m256d ob2 = _mm256_set1_pd(one_minus_b2);
    const __m256d sb2 = _mm256_set1_pd(c.sqrt_bias2);
    const __m256d eps = _mm256_set1_pd(c.eps);
    const __m256d step = _mm256_set1_pd(c.step_size);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, g));
        const __m256d gg = _mm256_mul_pd(g, g);
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(ob2, gg));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d denom = _mm256_add_pd(_mm256_div_pd(_mm256_sqrt_pd(vi), sb2), eps);
        const __m256d upd = _mm256_mul_pd(step, _mm256_div_pd(mi, denom));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        const double t1 = c.beta1 * m[i];
        const double t2 = one_minus_b1 * g;
        m[i] = t1 + t2;
        const double gg = g * g;
        const double t3 = c.beta2 * v[i];
        const double t4 = one_minus_b2 * gg;
        v[i] = t3 + t4;
        const double denom = std::sqrt(v[i]) / c.sqrt_bias2 + c.eps;
        const double upd = c.step_size * (m[i] / denom);
        param[i] = param[i] - upd;
    }
}

}  // namespace

const KernelTable avx2_table{Isa::Avx2, dot_avx2, axpy_avx2, lerp_avx2, adam_avx2};

}  // namespace treelmc::kernels::detail
