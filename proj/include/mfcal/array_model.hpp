// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Narrowband array forward model. A P-element array with per-sensor complex
// gains g observes Q calibrator sources with per-source squared directional
// gains m and powers sigma:
//
//   x(n) = G A Gamma s(n) + n(n),      R = E M E^H + Sigma_n,
//   E = G A Sigma^(1/2),  M = diag(m),  A_pq = exp(-j 2pi/lambda xi_p.d_q)/sqrt(P)
//
// plus optional weak background sources that enter the data but never the
// fitted model.

#pragma once

#include "mfcal/types.hpp"

#include <array>
#include <cstdint>

namespace mfcal {

struct ArrayGeometry {
    std::vector<std::array<double, 2>> positions; // meters, sensor 0 is the phase reference

    std::size_t size() const { return positions.size(); }
    void validate() const;
};

struct WeakSource {
    Direction direction;
    double power = 0.0;
};

struct SkyModel {
    std::vector<Direction> nominal_directions;  // Q entries
    std::vector<rvec> calibrator_powers;        // F x Q, sigma per wavelength
    std::size_t reference_index = 0;            // source with fixed direction
    std::vector<WeakSource> weak_sources;

    std::size_t num_sources() const { return nominal_directions.size(); }
    void validate() const;
};

struct WavelengthGrid {
    rvec wavelengths; // meters
    double f0 = 0.0;  // reference frequency, Hz

    std::size_t size() const { return wavelengths.size(); }
    void validate() const;
};

// The estimation target for one wavelength.
struct PerWavelengthParams {
    cvec gains;                        // g, length P
    std::vector<Direction> directions; // apparent D, length Q
    rvec directional_gains;            // m, length Q, > 0
    rvec noise_powers;                 // sigma_n, length P, > 0
};

struct CovarianceSet {
    std::vector<CMat> matrices; // one P x P Hermitian matrix per wavelength
    std::size_t sample_count = 0;
};

// A_pq = exp(-j (2pi/lambda) (x_p l_q + y_p m_q)) / sqrt(P)
CMat steering_matrix(const ArrayGeometry &geometry, const std::vector<Direction> &directions,
                     double lambda);

// R(p) = G A (Sigma M) A^H G^H + diag(sigma_n)
CMat model_covariance(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                      const rvec &source_powers, double lambda);

// N snapshots of Eq.-1 data as a P x N matrix (one column per sample).
// Weak sources enter with the same sensor gains as calibrators and unit
// directional gain.
CMat simulate_snapshots(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                        const SkyModel &sky, const rvec &source_powers, double lambda,
                        std::size_t num_samples, std::uint64_t seed);

// (1/N) sum_n x_n x_n^H
CMat sample_covariance(const CMat &snapshots);

// Omega_pq = 1/sqrt(sigma_n_p sigma_n_q)
RMat weighting_matrix(const rvec &noise_powers);

// || (R_model - R_hat) .* Omega ||_F^2
double weighted_cost(const CMat &r_model, const CMat &r_hat, const RMat &omega);

double local_cost(const PerWavelengthParams &params, const ArrayGeometry &geometry,
                  const rvec &source_powers, double lambda, const CMat &r_hat,
                  const RMat &omega);

// SNR (dB) = 10 log10(mean over lambda of sum_q sigma_q m_q  /  mean noise power).
double snr_of(const SkyModel &sky, const std::vector<rvec> &directional_gains,
              const std::vector<rvec> &noise_powers);

// Uniform per-sensor noise power that realizes the requested SNR for this sky.
double noise_power_for_snr(const SkyModel &sky, const std::vector<rvec> &directional_gains,
                           double target_db);

} // namespace mfcal
