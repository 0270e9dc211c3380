// Compiled with -mavx2 (see src/CMakeLists.txt); only reached through the
// dispatcher after a CPUID check.
#include "wakeloc/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

#include <cmath>

namespace wakeloc::kernels::avx2 {

namespace {
inline __m256d norm3(__m256d dx, __m256d dy, __m256d dz) {
    __m256d s = _mm256_mul_pd(dx, dx);
    s = _mm256_add_pd(s, _mm256_mul_pd(dy, dy));
    s = _mm256_add_pd(s, _mm256_mul_pd(dz, dz));
    return _mm256_sqrt_pd(s);
}
}  // namespace

// Four particles per lane group; no FMA so the lane arithmetic matches the
// scalar reference operation for operation.
void tdoa_cost(const TdoaCostTerms& terms, std::span<const double> px, std::span<const double> py,
               std::span<const double> pz, std::span<double> out) {
    const std::size_t n = px.size();
    const std::size_t m = terms.offset_m.size();
    const __m256d refx = _mm256_set1_pd(terms.ref_x);
    const __m256d refy = _mm256_set1_pd(terms.ref_y);
    const __m256d refz = _mm256_set1_pd(terms.ref_z);

    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d x = _mm256_loadu_pd(px.data() + k);
        const __m256d y = _mm256_loadu_pd(py.data() + k);
        const __m256d z = _mm256_loadu_pd(pz.data() + k);
        const __m256d d_ref = norm3(_mm256_sub_pd(x, refx), _mm256_sub_pd(y, refy), _mm256_sub_pd(z, refz));
        __m256d cost = _mm256_setzero_pd();
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d ax = _mm256_set1_pd(terms.anchor_x[i]);
            const __m256d ay = _mm256_set1_pd(terms.anchor_y[i]);
            const __m256d az = _mm256_set1_pd(terms.anchor_z[i]);
            const __m256d d = norm3(_mm256_sub_pd(x, ax), _mm256_sub_pd(y, ay), _mm256_sub_pd(z, az));
            const __m256d r = _mm256_add_pd(_mm256_sub_pd(_mm256_set1_pd(terms.offset_m[i]), d), d_ref);
            cost = _mm256_add_pd(cost, _mm256_mul_pd(r, r));
        }
        _mm256_storeu_pd(out.data() + k, cost);
    }
    if (k < n) {
        scalar::tdoa_cost(terms, px.subspan(k), py.subspan(k), pz.subspan(k), out.subspan(k));
    }
}

void count_within(std::span<const double> anchor_x, std::span<const double> anchor_y, double radius,
                  std::span<const double> qx, std::span<const double> qy, std::span<int> out) {
    const std::size_t n = qx.size();
    const __m256d r2 = _mm256_set1_pd(radius * radius);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d x = _mm256_loadu_pd(qx.data() + k);
        const __m256d y = _mm256_loadu_pd(qy.data() + k);
        __m256d count = _mm256_setzero_pd();
        for (std::size_t i = 0; i < anchor_x.size(); ++i) {
            const __m256d dx = _mm256_sub_pd(x, _mm256_set1_pd(anchor_x[i]));
            const __m256d dy = _mm256_sub_pd(y, _mm256_set1_pd(anchor_y[i]));
            const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
            const __m256d inside = _mm256_cmp_pd(d2, r2, _CMP_LE_OQ);
            count = _mm256_add_pd(count, _mm256_and_pd(inside, one));
        }
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, count);
        for (int j = 0; j < 4; ++j) out[k + j] = static_cast<int>(tmp[j]);
    }
    if (k < n) {
        scalar::count_within(anchor_x, anchor_y, radius, qx.subspan(k), qy.subspan(k), out.subspan(k));
    }
}

}  // namespace wakeloc::kernels::avx2

#endif  // __AVX2__
