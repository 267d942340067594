#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "treelmc/kernels.hpp"
#include "treelmc/random.hpp"

using namespace treelmc;
using kernels::Isa;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-3.0, 3.0);
    return v;
}

// Lengths straddle every vector width and remainder path.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 67, 255, 1000};

}  // namespace

TEST(Kernels, ScalarIsAlwaysAvailable) {
    const auto isas = kernels::available_isas();
    ASSERT_FALSE(isas.empty());
    EXPECT_EQ(isas.front(), Isa::Scalar);
    EXPECT_EQ(kernels::table(Isa::Scalar).isa, Isa::Scalar);
}

TEST(Kernels, UnavailableVariantThrows) {
    const auto isas = kernels::available_isas();
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (std::find(isas.begin(), isas.end(), isa) == isas.end()) {
            EXPECT_THROW(kernels::table(isa), std::exception) << kernels::isa_name(isa);
        }
    }
}

TEST(Kernels, DotMatchesLongDoubleReference) {
    Rng rng(11);
    for (Isa isa : kernels::available_isas()) {
        const auto& t = kernels::table(isa);
        for (std::size_t n : kLengths) {
            const auto a = random_vector(n, rng), b = random_vector(n, rng);
            long double ref = 0.0L, mag = 0.0L;
            for (std::size_t i = 0; i < n; ++i) {
                ref += (long double)a[i] * b[i];
                mag += std::abs((long double)a[i] * b[i]);
            }
            EXPECT_LE(std::abs((long double)t.dot(a.data(), b.data(), n) - ref), 1e-15L * (mag + 1.0L))
                << kernels::isa_name(isa) << " n=" << n;
        }
    }
}

TEST(Kernels, ElementwiseVariantsAreBitIdenticalToScalar) {
    const auto& ref = kernels::table(Isa::Scalar);
    Rng rng(12);
    for (Isa isa : kernels::available_isas()) {
        const auto& t = kernels::table(isa);
        for (std::size_t n : kLengths) {
            const auto x = random_vector(n, rng), y0 = random_vector(n, rng);

            auto y_ref = y0, y_var = y0;
            ref.axpy(-0.37, x.data(), y_ref.data(), n);
            t.axpy(-0.37, x.data(), y_var.data(), n);
            EXPECT_EQ(y_ref, y_var) << "axpy " << kernels::isa_name(isa) << " n=" << n;

            std::vector<double> l_ref(n), l_var(n);
            ref.lerp(0.3, x.data(), y0.data(), l_ref.data(), n);
            t.lerp(0.3, x.data(), y0.data(), l_var.data(), n);
            EXPECT_EQ(l_ref, l_var) << "lerp " << kernels::isa_name(isa) << " n=" << n;

            const kernels::AdamCoefficients c{0.01 / (1 - 0.9 * 0.9), 0.9, 0.999, std::sqrt(1 - 0.999 * 0.999), 1e-8};
            auto m_ref = random_vector(n, rng), v_ref = random_vector(n, rng), p_ref = random_vector(n, rng);
            for (double& v : v_ref) v = std::abs(v);
            auto m_var = m_ref, v_var = v_ref, p_var = p_ref;
            ref.adam_update(c, x.data(), m_ref.data(), v_ref.data(), p_ref.data(), n);
            t.adam_update(c, x.data(), m_var.data(), v_var.data(), p_var.data(), n);
            EXPECT_EQ(m_ref, m_var) << "adam m " << kernels::isa_name(isa) << " n=" << n;
            EXPECT_EQ(v_ref, v_var) << "adam v " << kernels::isa_name(isa) << " n=" << n;
            EXPECT_EQ(p_ref, p_var) << "adam param " << kernels::isa_name(isa) << " n=" << n;
        }
    }
}

TEST(Kernels, ScalarSemantics) {
    const auto& t = kernels::table(Isa::Scalar);
    std::vector<double> a{1, 2, 3}, b{4, 5, 6}, out(3);
    EXPECT_EQ(t.dot(a.data(), b.data(), 3), 32.0);
    t.lerp(0.25, a.data(), b.data(), out.data(), 3);
    EXPECT_EQ(out, (std::vector<double>{3.25, 4.25, 5.25}));
    t.axpy(2.0, a.data(), b.data(), 3);
    EXPECT_EQ(b, (std::vector<double>{6, 9, 12}));
}

TEST(Kernels, SetActiveSwitchesTable) {
    const Isa before = kernels::active().isa;
    kernels::set_active(Isa::Scalar);
    EXPECT_EQ(kernels::active().isa, Isa::Scalar);
    kernels::set_active(before);
    EXPECT_EQ(kernels::active().isa, before);
}
