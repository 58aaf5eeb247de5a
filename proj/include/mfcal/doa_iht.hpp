// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Sparse direction / directional-gain / noise estimation. For each source a
// local grid of candidate directions defines dictionary atoms
//
//   e_i = Sigma_n^(-1/2) (g .* a(d_i)) sqrt(sigma_q),
//
// the whitened residual (data minus every other source's fitted
// contribution) is correlated with each atom's rank-one off-diagonal
// pattern, the per-wavelength correlations are pooled and hard-thresholded
// to one surviving grid point, and the resulting per-wavelength amplitude
// estimates feed a consensus update of the directional-gain coefficients.

#pragma once

#include "mfcal/admm.hpp"
#include "mfcal/array_model.hpp"
#include "mfcal/coherence.hpp"
#include "mfcal/network.hpp"
#include "mfcal/types.hpp"

namespace mfcal {

struct GridConfig {
    std::size_t points = 9;     // N_q: candidate directions per source, an odd square
    double extent = 0.05;       // half-width in direction cosines at outer iteration 1
    double refine_factor = 0.5; // extent multiplier per outer iteration
    double min_spacing = 1e-5;  // spacing floor under refinement

    void validate() const;
};

struct DirectionGrid {
    std::vector<Direction> points; // row-major square, center = current estimate
    std::size_t center_index = 0;
    double spacing = 0.0; // 0 for single-point grids
};

// Square grid centered on the current estimate; the reference source gets a
// single fixed point. outer_iteration (1-based) drives the refinement.
DirectionGrid build_direction_grid(Direction center, const GridConfig &cfg, bool reference_fixed,
                                   int outer_iteration);

// Keeps the s largest entries (ties break toward the lower index), zeroes
// the rest.
rvec hard_threshold(rvec values, std::size_t keep);

// sum_q m_q sigma_q (g .* a_q)(g .* a_q)^H, optionally skipping one source.
CMat source_model_covariance(const ArrayGeometry &geometry, const rvec &source_powers,
                             const cvec &gains, const std::vector<Direction> &directions,
                             const rvec &directional_gains, double lambda,
                             std::ptrdiff_t skip_source = -1);

// Whitened residual for source q: (Rhat - sum_{q' != q} C_q') .* Omega.
// Correlations read only its off-diagonal entries.
CMat source_residual_matrix(const CMat &r_hat, const RMat &omega, const ArrayGeometry &geometry,
                            const rvec &source_powers, const cvec &gains,
                            const std::vector<Direction> &directions,
                            const rvec &directional_gains, std::size_t q, double lambda);

// The residual as a vector: column-major entries of the matrix above with
// the diagonal discarded.
cvec offdiag_vec(const CMat &m);

// Whitened dictionary atoms for one source's grid at one wavelength.
std::vector<cvec> build_dictionary(const ArrayGeometry &geometry, const DirectionGrid &grid,
                                   const cvec &gains, const rvec &noise_powers,
                                   double source_power, double lambda);

// e^H X e - sum_j |e_j|^2 X_jj: correlation of the atom's off-diagonal
// rank-one pattern with the residual (real for Hermitian X).
double atom_correlation(const cvec &atom, const CMat &resid);

// || conj(e) (x) e ||^2 restricted to off-diagonal entries.
double atom_pattern_norm2(const cvec &atom);

struct Selection {
    std::size_t grid_index = 0;
    bool degenerate = false; // all correlations zero: previous direction kept
    rvec gain_per_lambda;    // nonnegative amplitude estimate per wavelength
};

// Pools squared correlations over this agent's wavelengths, hard-thresholds
// to one grid point, and estimates the per-wavelength amplitudes there.
Selection correlate_and_select(const std::vector<std::vector<cvec>> &dictionary_per_lambda,
                               const std::vector<CMat> &residual_per_lambda,
                               std::size_t fallback_index);

// (2 B^T B + rho N_z I)^(-1) (2 B^T m_check + rho sum_y (beta_y - u_y))
rvec alpha_m_update(const rvec &m_check, const RMat &basis_m, const std::vector<rvec> &beta,
                    const std::vector<rvec> &dual, double rho);

// sigma_n = max(diag(Rhat - source model), floor), floor = 1e-8 mean diag.
rvec estimate_noise(const CMat &r_hat, const CMat &source_model);

struct DoaAgentData {
    rvec lambdas;
    std::vector<CMat> r_hat;
    std::vector<RMat> omega;
    std::vector<rvec> source_powers; // sigma per wavelength
    RMat basis_m;                    // J_z x K_m directional-basis rows
};

struct DoaAgentState {
    rvec alpha_m;                                    // local copy, Q*K_m
    std::vector<std::vector<Direction>> directions;  // per wavelength, Q entries
    std::vector<cvec> gains;                         // per wavelength (fixed this stage)
    std::vector<rvec> noise_powers;                  // per wavelength, updated at stage end
};

struct DoaStageConfig {
    GridConfig grid;
    AdmmConfig admm;            // directional consensus settings
    double tol_direction = 1e-6; // eta_D on sum of direction moves
    int max_iterations = 10;     // IHT sweep cap
};

struct DoaStageResult {
    int iterations = 0;
    bool any_degenerate = false;
};

// Algorithm-1.3 stage: sequential per-source selection + directional-gain
// consensus, then a local noise update. Directions, alpha_m and noise powers
// are updated in place.
DoaStageResult run_doa_stage(ConsensusMode mode, const Topology &topology,
                             const std::vector<DoaAgentData> &data,
                             const ArrayGeometry &geometry, const SkyModel &sky,
                             const BasisConfig &cfg, const DoaStageConfig &stage,
                             int outer_iteration, Transport *transport,
                             std::vector<DoaAgentState> &states);

} // namespace mfcal
