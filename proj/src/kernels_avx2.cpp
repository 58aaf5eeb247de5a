// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// AVX2/FMA kernels. std::complex<double> is interleaved (re, im), so one
// __m256d carries two complex values. Complex products use the usual
// movedup/permute + fmaddsub decomposition:
//   x*y       : even lanes xr*yr - xi*yi, odd lanes xr*yi + xi*yr
//   conj(x)*y : even lanes xr*yr + xi*yi, odd lanes xr*yi - xi*yr

#include "kernels_impl.hpp"

#if defined(MFCAL_HAVE_AVX2_BUILD)

#include <immintrin.h>

namespace mfcal::kernels::avx2 {

namespace {

inline const double *as_d(const cplx *p) { return reinterpret_cast<const double *>(p); }
inline double *as_d(cplx *p) { return reinterpret_cast<double *>(p); }

inline __m256d cmul(__m256d x, __m256d y) {
    const __m256d xr = _mm256_movedup_pd(x);
    const __m256d xi = _mm256_permute_pd(x, 0xF);
    const __m256d ys = _mm256_permute_pd(y, 0x5);
    return _mm256_fmaddsub_pd(xr, y, _mm256_mul_pd(xi, ys));
}

inline __m256d cmul_conj(__m256d x, __m256d y) { // conj(x) * y
    const __m256d xr = _mm256_movedup_pd(x);
    const __m256d xi = _mm256_permute_pd(x, 0xF);
    const __m256d ys = _mm256_permute_pd(y, 0x5);
    return _mm256_fmsubadd_pd(xr, y, _mm256_mul_pd(xi, ys));
}

inline cplx hsum_c(__m256d acc) {
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    alignas(16) double out[2];
    _mm_store_pd(out, s);
    return {out[0], out[1]};
}

} // namespace

cplx cdotu(std::span<const cplx> x, std::span<const cplx> y) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        const __m256d yv = _mm256_loadu_pd(as_d(y.data() + i));
        acc = _mm256_add_pd(acc, cmul(xv, yv));
    }
    cplx s = hsum_c(acc);
    if (n2 < n)
        s += x[n2] * y[n2];
    return s;
}

cplx cdotc(std::span<const cplx> x, std::span<const cplx> y) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        const __m256d yv = _mm256_loadu_pd(as_d(y.data() + i));
        acc = _mm256_add_pd(acc, cmul_conj(xv, yv));
    }
    cplx s = hsum_c(acc);
    if (n2 < n)
        s += std::conj(x[n2]) * y[n2];
    return s;
}

void axpy(cplx a, std::span<const cplx> x, std::span<cplx> y) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_set1_pd(a.imag());
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        const __m256d xs = _mm256_permute_pd(xv, 0x5);
        const __m256d prod = _mm256_fmaddsub_pd(ar, xv, _mm256_mul_pd(ai, xs));
        const __m256d yv = _mm256_loadu_pd(as_d(y.data() + i));
        _mm256_storeu_pd(as_d(y.data() + i), _mm256_add_pd(yv, prod));
    }
    if (n2 < n)
        y[n2] += a * x[n2];
}

void hadamard(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        const __m256d yv = _mm256_loadu_pd(as_d(y.data() + i));
        _mm256_storeu_pd(as_d(out.data() + i), cmul(xv, yv));
    }
    if (n2 < n)
        out[n2] = x[n2] * y[n2];
}

void scale_real(std::span<const cplx> x, std::span<const double> w, std::span<cplx> out) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m128d wp = _mm_loadu_pd(w.data() + i);
        const __m256d wv =
            _mm256_set_m128d(_mm_unpackhi_pd(wp, wp), _mm_unpacklo_pd(wp, wp));
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        _mm256_storeu_pd(as_d(out.data() + i), _mm256_mul_pd(xv, wv));
    }
    if (n2 < n)
        out[n2] = x[n2] * w[n2];
}

double sumsq(std::span<const cplx> x) {
    const std::size_t n = x.size();
    const std::size_t n2 = n & ~std::size_t{1};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n2; i += 2) {
        const __m256d xv = _mm256_loadu_pd(as_d(x.data() + i));
        acc = _mm256_fmadd_pd(xv, xv, acc);
    }
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d s2 = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
    if (n2 < n)
        s += std::norm(x[n2]);
    return s;
}

double rdot(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const std::size_t n4 = n & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x.data() + i);
        const __m256d yv = _mm256_loadu_pd(y.data() + i);
        acc = _mm256_fmadd_pd(xv, yv, acc);
    }
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d s2 = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
    for (std::size_t i = n4; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

void rank1_herm_update(std::size_t n, const cplx *x, cplx *r) {
    const std::size_t n2 = n & ~std::size_t{1};
    for (std::size_t i = 0; i < n; ++i) {
        const cplx a = x[i];
        const __m256d ar = _mm256_set1_pd(a.real());
        const __m256d ai = _mm256_set1_pd(a.imag());
        cplx *row = r + i * n;
        // row_j += a * conj(x_j): even lanes ar*xr + ai*xi, odd ai*xr - ar*xi
        for (std::size_t j = 0; j < n2; j += 2) {
            const __m256d xv = _mm256_loadu_pd(as_d(x + j));
            const __m256d xs = _mm256_permute_pd(xv, 0x5);
            const __m256d prod = _mm256_fmsubadd_pd(ai, xs, _mm256_mul_pd(ar, xv));
            const __m256d rv = _mm256_loadu_pd(as_d(row + j));
            _mm256_storeu_pd(as_d(row + j), _mm256_add_pd(rv, prod));
        }
        if (n2 < n)
            row[n2] += a * std::conj(x[n2]);
    }
}

} // namespace mfcal::kernels::avx2

#endif // MFCAL_HAVE_AVX2_BUILD
