// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/array_model.hpp"
#include "mfcal/kernels.hpp"
#include "mfcal/rng.hpp"

#include <cmath>

namespace mfcal {

void ArrayGeometry::validate() const {
    if (positions.size() < 2)
        throw std::invalid_argument("geometry: need at least two sensors");
    for (const auto &p : positions)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
            throw std::invalid_argument("geometry: non-finite sensor coordinate");
}

void SkyModel::validate() const {
    if (nominal_directions.empty())
        throw std::invalid_argument("sky: need at least one calibrator source");
    if (reference_index >= nominal_directions.size())
        throw std::invalid_argument("sky: reference source index out of range");
    for (const auto &d : nominal_directions)
        if (!std::isfinite(d.l) || !std::isfinite(d.m) || norm(d) > 1.0 + 1e-12)
            throw std::invalid_argument("sky: direction cosines must satisfy |d| <= 1");
    for (const auto &powers : calibrator_powers) {
        if (powers.size() != nominal_directions.size())
            throw std::invalid_argument("sky: power vector length != source count");
        for (double s : powers)
            if (!(s > 0.0))
                throw std::invalid_argument("sky: source powers must be positive");
    }
    for (const auto &w : weak_sources)
        if (!(w.power >= 0.0))
            throw std::invalid_argument("sky: weak source powers must be nonnegative");
}

void WavelengthGrid::validate() const {
    if (wavelengths.empty())
        throw std::invalid_argument("wavelength grid: empty");
    for (double l : wavelengths)
        if (!(l > 0.0))
            throw std::invalid_argument("wavelength grid: wavelengths must be positive");
    if (!(f0 > 0.0))
        throw std::invalid_argument("wavelength grid: reference frequency must be positive");
}

CMat steering_matrix(const ArrayGeometry &geometry, const std::vector<Direction> &directions,
                     double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("steering_matrix: wavelength must be positive");
    for (const auto &d : directions)
        if (!std::isfinite(d.l) || !std::isfinite(d.m))
            throw std::invalid_argument("steering_matrix: non-finite direction");
    const std::size_t p = geometry.size();
    const std::size_t q = directions.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(p));
    const double wavenumber = 2.0 * M_PI / lambda;
    CMat a(p, q);
    for (std::size_t i = 0; i < p; ++i) {
        const double x = geometry.positions[i][0];
        const double y = geometry.positions[i][1];
        for (std::size_t j = 0; j < q; ++j) {
            const double phase = -wavenumber * (x * directions[j].l + y * directions[j].m);
            a(i, j) = std::polar(scale, phase);
        }
    }
    return a;
}

CMat model_covariance(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                      const rvec &source_powers, double lambda) {
    const std::size_t p = geometry.size();
    const std::size_t q = params.directions.size();
    if (params.gains.size() != p || params.noise_powers.size() != p ||
        params.directional_gains.size() != q || source_powers.size() != q)
        throw std::invalid_argument("model_covariance: dimension mismatch");
    const CMat a = steering_matrix(geometry, params.directions, lambda);
    CMat r(p, p);
    cvec w(p);
    for (std::size_t j = 0; j < q; ++j) {
        const double amp2 = source_powers[j] * params.directional_gains[j];
        const double amp = std::sqrt(std::max(amp2, 0.0));
        for (std::size_t i = 0; i < p; ++i)
            w[i] = amp * params.gains[i] * a(i, j);
        kernels::rank1_herm_update(p, w.data(), r.data());
    }
    for (std::size_t i = 0; i < p; ++i)
        r(i, i) += params.noise_powers[i];
    return r;
}

CMat simulate_snapshots(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                        const SkyModel &sky, const rvec &source_powers, double lambda,
                        std::size_t num_samples, std::uint64_t seed) {
    if (num_samples < 1)
        throw std::invalid_argument("simulate_snapshots: need at least one sample");
    const std::size_t p = geometry.size();
    const std::size_t q = sky.num_sources();
    if (params.gains.size() != p || params.noise_powers.size() != p ||
        params.directions.size() != q || source_powers.size() != q)
        throw std::invalid_argument("simulate_snapshots: dimension mismatch");

    const CMat a = steering_matrix(geometry, params.directions, lambda);
    std::vector<Direction> weak_dirs;
    weak_dirs.reserve(sky.weak_sources.size());
    for (const auto &w : sky.weak_sources)
        weak_dirs.push_back(w.direction);
    const CMat aw = weak_dirs.empty() ? CMat{} : steering_matrix(geometry, weak_dirs, lambda);

    Rng rng(seed);
    CMat x(p, num_samples);
    cvec accum(p);
    for (std::size_t n = 0; n < num_samples; ++n) {
        std::fill(accum.begin(), accum.end(), cplx{});
        for (std::size_t j = 0; j < q; ++j) {
            const cplx s = rng.circular_gaussian(source_powers[j]);
            const cplx gamma_s = std::sqrt(std::max(params.directional_gains[j], 0.0)) * s;
            for (std::size_t i = 0; i < p; ++i)
                accum[i] += a(i, j) * gamma_s;
        }
        for (std::size_t u = 0; u < weak_dirs.size(); ++u) {
            const cplx s = rng.circular_gaussian(sky.weak_sources[u].power);
            for (std::size_t i = 0; i < p; ++i)
                accum[i] += aw(i, u) * s;
        }
        for (std::size_t i = 0; i < p; ++i) {
            const cplx noise = rng.circular_gaussian(params.noise_powers[i]);
            x(i, n) = params.gains[i] * accum[i] + noise;
        }
    }
    return x;
}

CMat sample_covariance(const CMat &snapshots) {
    const std::size_t p = snapshots.rows();
    const std::size_t n = snapshots.cols();
    if (p == 0 || n == 0)
        throw std::invalid_argument("sample_covariance: empty snapshot matrix");
    CMat r(p, p);
    cvec col(p);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < p; ++i)
            col[i] = snapshots(i, j);
        kernels::rank1_herm_update(p, col.data(), r.data());
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto &v : r.flat())
        v *= inv_n;
    return r;
}

RMat weighting_matrix(const rvec &noise_powers) {
    for (double s : noise_powers)
        if (!(s > 0.0))
            throw std::invalid_argument("weighting_matrix: noise powers must be positive");
    const std::size_t p = noise_powers.size();
    rvec inv_sqrt(p);
    for (std::size_t i = 0; i < p; ++i)
        inv_sqrt[i] = 1.0 / std::sqrt(noise_powers[i]);
    RMat omega(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            omega(i, j) = inv_sqrt[i] * inv_sqrt[j];
    return omega;
}

double weighted_cost(const CMat &r_model, const CMat &r_hat, const RMat &omega) {
    if (r_model.rows() != r_hat.rows() || r_model.cols() != r_hat.cols() ||
        omega.rows() != r_model.rows() || omega.cols() != r_model.cols())
        throw std::invalid_argument("weighted_cost: shape mismatch");
    const std::size_t p = r_model.rows();
    cvec diff(p), weighted(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            diff[j] = r_model(i, j) - r_hat(i, j);
        kernels::scale_real(diff, omega.row(i), weighted);
        acc += kernels::sumsq(weighted);
    }
    return acc;
}

double local_cost(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                  const rvec &source_powers, double lambda, const CMat &r_hat,
                  const RMat &omega) {
    return weighted_cost(model_covariance(params, geometry, source_powers, lambda), r_hat, omega);
}

namespace {

double mean_apparent_power(const SkyModel &sky, const std::vector<rvec> &directional_gains) {
    if (sky.calibrator_powers.empty())
        throw std::invalid_argument("snr: sky has no per-wavelength powers");
    if (directional_gains.size() != sky.calibrator_powers.size())
        throw std::invalid_argument("snr: directional gain count != wavelength count");
    double acc = 0.0;
    for (std::size_t f = 0; f < sky.calibrator_powers.size(); ++f) {
        const rvec &sigma = sky.calibrator_powers[f];
        const rvec &m = directional_gains[f];
        if (m.size() != sigma.size())
            throw std::invalid_argument("snr: source count mismatch");
        acc += kernels::rdot(sigma, m);
    }
    return acc / static_cast<double>(sky.calibrator_powers.size());
}

} // namespace

double snr_of(const SkyModel &sky, const std::vector<rvec> &directional_gains,
              const std::vector<rvec> &noise_powers) {
    const double signal = mean_apparent_power(sky, directional_gains);
    double noise = 0.0;
    std::size_t count = 0;
    for (const rvec &sn : noise_powers) {
        for (double v : sn) {
            noise += v;
            ++count;
        }
    }
    if (count == 0 || !(noise > 0.0))
        throw std::invalid_argument("snr: noise powers must be positive");
    noise /= static_cast<double>(count);
    return 10.0 * std::log10(signal / noise);
}

double noise_power_for_snr(const SkyModel &sky, const std::vector<rvec> &directional_gains,
                           double target_db) {
    const double signal = mean_apparent_power(sky, directional_gains);
    if (!(signal > 0.0))
        throw std::invalid_argument("snr: total apparent power must be positive");
    return signal / std::pow(10.0, target_db / 10.0);
}

} // namespace mfcal
