#include <cmath>

#include "wakeloc/kernels.hpp"

namespace wakeloc::kernels::scalar {

void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out) {
    const std::size_t m = terms.offset_m.size();
    for (std::size_t k = 0; k < px.size(); ++k) {
        const double rx = px[k] - terms.ref_x;
        const double ry = py[k] - terms.ref_y;
        const double rz = pz[k] - terms.ref_z;
        const double d_ref = std::sqrt(rx * rx + ry * ry + rz * rz);
        double cost = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double dx = px[k] - terms.anchor_x[i];
            const double dy = py[k] - terms.anchor_y[i];
            const double dz = pz[k] - terms.anchor_z[i];
            const double r = terms.offset_m[i] - std::sqrt(dx * dx + dy * dy + dz * dz) + d_ref;
            cost += r * r;
        }
        out[k] = cost;
    }
}

void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out) {
    const double r2 = radius * radius;
    for (std::size_t k = 0; k < qx.size(); ++k) {
        int n = 0;
        for (std::size_t i = 0; i < anchor_x.size(); ++i) {
            const double dx = qx[k] - anchor_x[i];
            const double dy = qy[k] - anchor_y[i];
            n += (dx * dx + dy * dy <= r2) ? 1 : 0;
        }
        out[k] = n;
    }
}

}  // namespace wakeloc::kernels::scalar
