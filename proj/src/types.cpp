// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/types.hpp"
#include "mfcal/kernels.hpp"

#include <cmath>

namespace mfcal {

double frob_norm(const CMat &m) { return std::sqrt(kernels::sumsq(m.flat())); }

double frob_norm(const RMat &m) {
    return std::sqrt(kernels::rdot(m.flat(), m.flat()));
}

double norm2(std::span<const cplx> v) { return std::sqrt(kernels::sumsq(v)); }

double norm2(std::span<const double> v) { return std::sqrt(kernels::rdot(v, v)); }

CMat adjoint(const CMat &m) {
    CMat out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(j, i) = std::conj(m(i, j));
    return out;
}

double hermitian_error(const CMat &m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("hermitian_error: matrix not square");
    double acc = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            acc += std::norm(m(i, j) - std::conj(m(j, i)));
    return std::sqrt(acc);
}

CMat matmul(const CMat &a, const CMat &b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree");
    CMat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{})
                continue;
            kernels::axpy(aik, b.row(k), c.row(i));
        }
    }
    return c;
}

cvec matvec(const CMat &a, std::span<const cplx> x) {
    if (a.cols() != x.size())
        throw std::invalid_argument("matvec: dimensions disagree");
    cvec y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        y[i] = kernels::cdotu(a.row(i), x);
    return y;
}

namespace {

// Lower-triangular Cholesky factor of a; throws if a is not positive definite.
RMat cholesky(const RMat &a) {
    const std::size_t n = a.rows();
    if (a.cols() != n)
        throw std::invalid_argument("solve_spd: matrix not square");
    RMat l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw std::runtime_error("solve_spd: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

rvec cholesky_solve(const RMat &l, std::span<const double> b) {
    const std::size_t n = l.rows();
    rvec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    rvec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k)
            s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
    return x;
}

} // namespace

rvec solve_spd(const RMat &a, std::span<const double> b) {
    if (b.size() != a.rows())
        throw std::invalid_argument("solve_spd: rhs size disagrees");
    return cholesky_solve(cholesky(a), b);
}

cvec solve_spd(const RMat &a, std::span<const cplx> b) {
    if (b.size() != a.rows())
        throw std::invalid_argument("solve_spd: rhs size disagrees");
    const RMat l = cholesky(a);
    const std::size_t n = a.rows();
    rvec re(n), im(n);
    for (std::size_t i = 0; i < n; ++i) {
        re[i] = b[i].real();
        im[i] = b[i].imag();
    }
    const rvec xr = cholesky_solve(l, re);
    const rvec xi = cholesky_solve(l, im);
    cvec x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = {xr[i], xi[i]};
    return x;
}

} // namespace mfcal
