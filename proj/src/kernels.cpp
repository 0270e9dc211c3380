#include <atomic>
#include <cstdlib>

#include "wakeloc/error.hpp"
#include "wakeloc/kernels.hpp"

namespace wakeloc::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(WAKELOC_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa detect() {
    if (const char* env = std::getenv("WAKELOC_FORCE_SCALAR"); env != nullptr && env[0] == '1') return Isa::Scalar;
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<int>& forced() {
    static std::atomic<int> v{-1};
    return v;
}

}  // namespace

std::string_view to_string(Isa isa) {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool isa_available(Isa isa) {
    return isa == Isa::Scalar || cpu_has_avx2();
}

Isa active_isa() {
    const int f = forced().load(std::memory_order_relaxed);
    if (f >= 0) return static_cast<Isa>(f);
    static const Isa detected = detect();
    return detected;
}

void force_isa(std::optional<Isa> isa) {
    if (isa && !isa_available(*isa)) {
        throw Error(Errc::InvalidArgument, "kernel variant not available on this CPU");
    }
    forced().store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out) {
#if defined(WAKELOC_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) {
        avx2::tdoa_cost(terms, px, py, pz, out);
        return;
    }
#endif
    scalar::tdoa_cost(terms, px, py, pz, out);
}

void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out) {
#if defined(WAKELOC_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) {
        avx2::count_within(anchor_x, anchor_y, radius, qx, qy, out);
        return;
    }
#endif
    scalar::count_within(anchor_x, anchor_y, radius, qx, qy, out);
}

}  // namespace wakeloc::kernels
