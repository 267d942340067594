#include "treelmc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace treelmc::kernels {
namespace {

bool cpu_supports(Isa isa) {
    switch (isa) {
    case Isa::Scalar:
        return true;
    case Isa::Avx2:
#if defined(TREELMC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::Neon:
#if defined(TREELMC_HAVE_NEON)
        return true;  // Advanced SIMD is mandatory on AArch64.
#else
        return false;
#endif
    }
    return false;
}

const KernelTable* select_default() {
    if (const char* env = std::getenv("TREELMC_SIMD")) {
        const std::string want(env);
        for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
            if (want == isa_name(isa)) return &table(isa);
        }
        throw std::invalid_argument("TREELMC_SIMD: unknown variant '" + want + "'");
    }
    return &table(available_isas().back());
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{select_default()};
    return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
    }
    return "unknown";
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out{Isa::Scalar};
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (cpu_supports(isa)) out.push_back(isa);
    }
    return out;
}

const KernelTable& table(Isa isa) {
    if (!cpu_supports(isa)) {
        throw std::runtime_error("kernel variant '" + std::string(isa_name(isa)) + "' is not available");
    }
    switch (isa) {
#if defined(TREELMC_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(TREELMC_HAVE_NEON)
    case Isa::Neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
    }
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { slot().store(&table(isa), std::memory_order_release); }

}  // namespace treelmc::kernels
