#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace wakeloc::kernels {

// Batch inner loops of the solver and layout checks. Every kernel has a
// scalar reference implementation; wider variants must agree with it (see
// tests/test_kernels.cpp).

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa);

// Variant used by the dispatching entry points.
Isa active_isa();

// Pins dispatch to one variant (tests, benchmarks). nullopt restores
// automatic selection. Throws InvalidArgument for an unavailable variant.
void force_isa(std::optional<Isa> isa);

// Anchors and residual offsets for the TDOA cost. For candidate p the
// residual of measurement i, in meters, is
//   offset[i] - |p - anchor_i| + |p - ref|
// and the cost is the sum of squared residuals.
struct TdoaCostTerms {
    std::span<const double> anchor_x;
    std::span<const double> anchor_y;
    std::span<const double> anchor_z;
    std::span<const double> offset_m;
    double ref_x = 0.0;
    double ref_y = 0.0;
    double ref_z = 0.0;
};

// out[k] = cost at (px[k], py[k], pz[k]). All particle spans have equal length.
void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out);

// out[k] = number of anchors within horizontal distance `radius` of (qx[k], qy[k]).
void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out);

namespace scalar {
void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out);
void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out);
}  // namespace scalar

namespace avx2 {
// Only callable when isa_available(Isa::Avx2).
void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out);
void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out);
}  // namespace avx2

}  // namespace wakeloc::kernels
