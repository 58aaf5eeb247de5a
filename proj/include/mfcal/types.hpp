// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfcal {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s

// 2-D direction cosines (l, m). Physical directions satisfy l^2 + m^2 <= 1.
struct Direction {
    double l = 0.0;
    double m = 0.0;
};

inline Direction operator+(Direction a, Direction b) { return {a.l + b.l, a.m + b.m}; }
inline Direction operator-(Direction a, Direction b) { return {a.l - b.l, a.m - b.m}; }
inline double norm(Direction d) { return std::hypot(d.l, d.m); }

// Dense row-major complex matrix. Everything in this project is small and
// dense (P is at most a few tens), so a flat buffer with explicit indexing
// is all we need; the hot inner loops go through mfcal::kernels.
class CMat {
  public:
    CMat() = default;
    CMat(std::size_t rows, std::size_t cols, cplx value = cplx{})
        : rows_(rows), cols_(cols), d_(rows * cols, value) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx &operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
    const cplx &operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

    cplx *data() { return d_.data(); }
    const cplx *data() const { return d_.data(); }

    std::span<cplx> row(std::size_t i) { return {d_.data() + i * cols_, cols_}; }
    std::span<const cplx> row(std::size_t i) const { return {d_.data() + i * cols_, cols_}; }

    std::span<const cplx> flat() const { return {d_.data(), d_.size()}; }
    std::span<cplx> flat() { return {d_.data(), d_.size()}; }

    void fill(cplx value) { d_.assign(d_.size(), value); }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    cvec d_;
};

// Dense row-major real matrix.
class RMat {
  public:
    RMat() = default;
    RMat(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), d_(rows * cols, value) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double &operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
    const double &operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

    double *data() { return d_.data(); }
    const double *data() const { return d_.data(); }

    std::span<double> row(std::size_t i) { return {d_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {d_.data() + i * cols_, cols_}; }

    std::span<const double> flat() const { return {d_.data(), d_.size()}; }

    void fill(double value) { d_.assign(d_.size(), value); }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    rvec d_;
};

double frob_norm(const CMat &m);
double frob_norm(const RMat &m);
double norm2(std::span<const cplx> v);
double norm2(std::span<const double> v);

CMat adjoint(const CMat &m);

// ||M - M^H||_F, the departure from Hermitian symmetry.
double hermitian_error(const CMat &m);

// C = A * B
CMat matmul(const CMat &a, const CMat &b);
cvec matvec(const CMat &a, std::span<const cplx> x);

// Solves A x = b for symmetric positive definite A (in-place Cholesky on a
// copy). Throws std::runtime_error when the factorization breaks down.
rvec solve_spd(const RMat &a, std::span<const double> b);

// Same SPD system with a complex right-hand side; real/imaginary parts are
// solved against one factorization.
cvec solve_spd(const RMat &a, std::span<const cplx> b);

} // namespace mfcal
