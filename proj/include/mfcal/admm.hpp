// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Consensus ADMM for the undirectional-gain coefficients. Each agent z holds
// a local copy alpha^z of the consensus vector (P blocks of K_g complex
// coefficients) and minimizes its weighted covariance-fit cost
//
//   kappa^z(alpha) = sum_{lambda in Lambda_z} sum_p || rhat_p - z_p b_lambda^T alpha_p ||^2
//
// with rhat_p = S_p(Rhat) .* omega_p and z_p = S_p(Rk diag(conj g)) .* omega_p,
// where S_p takes row p without its diagonal element and conj(g) is held
// fixed while alpha_p is re-estimated (alternating conjugate update).
// Consensus is enforced either through a fusion-center average or through
// per-edge auxiliary variables beta^{z,y} exchanged with neighbors only.

#pragma once

#include "mfcal/coherence.hpp"
#include "mfcal/network.hpp"
#include "mfcal/types.hpp"

#include <functional>

namespace mfcal {

struct AdmmConfig {
    double rho = 1.0;
    bool adapt_rho = false;
    double mu = 10.0;      // residual-balancing ratio
    double tau_incr = 2.0; // rho multiplier when the primal residual dominates
    double tau_decr = 2.0; // rho divisor when the dual residual dominates
    int max_iterations = 500;
    double tol_alpha = 1e-4;       // eta_alpha, consensus stop on eps_p / ||alpha||
    double tol_alpha_local = 1e-4; // eta_alpha^z, local sweep stop
    int max_sweeps = 20;

    void validate() const;
};

enum class ConsensusMode {
    Decentralized, // neighbor messages, no fusion center
    Fusion,        // exact average at a fusion center
    Isolated,      // no exchange at all: proximal least squares per agent
};

// Everything agent z owns for one gain stage (one outer iteration).
struct GainAgentData {
    rvec lambdas;            // Lambda_z
    std::vector<CMat> r_hat; // sample (or model) covariances, one per wavelength
    std::vector<CMat> r_k;   // reference source model A Sigma M A^H per wavelength
    std::vector<RMat> omega; // weighting matrices per wavelength
    RMat basis;              // J_z x K_g gain-basis rows (B^z)
};

struct GainAgentState {
    cvec alpha;             // local consensus copy, P*K_g
    std::vector<cvec> beta; // per neighbor, aligned with topology.neighbors[z]
    std::vector<cvec> dual; // per neighbor (decentralized) scaled duals
    cvec fusion_dual;       // scaled dual against the fusion average
    double rho = 1.0;
};

struct IterationRecord {
    int t = 0;
    double eps_primal = 0.0;
    double eps_diff = 0.0;
    double rho = 0.0;
};

struct GainStageResult {
    std::vector<IterationRecord> iterations;
    bool converged = false;
};

using IterationHook = std::function<void(const IterationRecord &)>;

// S_p: row p of a square matrix with the p-th element removed.
cvec select_off_row(const CMat &m, std::size_t p);
rvec select_off_row(const RMat &m, std::size_t p);

// Stacked per-wavelength vectors for one sensor at the current alpha.
struct SensorLinearization {
    std::vector<cvec> rhat; // per wavelength in Lambda_z, each length P-1
    std::vector<cvec> z;    // same shape
};

SensorLinearization build_local_linearization(const GainAgentData &data, const cvec &alpha,
                                              const BasisConfig &cfg, std::size_t sensor);

// kappa_p at a candidate block (test/diagnostic use).
double sensor_cost(const SensorLinearization &lin, const RMat &basis,
                   std::span<const cplx> alpha_block);

// argmin kappa_p(a) + rho/2 ||a - alpha_p + u_p||^2
cvec local_alpha_update_fusion(const SensorLinearization &lin, const RMat &basis,
                               std::span<const cplx> alpha_p, std::span<const cplx> u_p,
                               double rho);

// argmin kappa_p(a) + rho/2 sum_y ||a - beta_p^{z,y} + u_p^{z,y}||^2
cvec local_alpha_update_decentralized(const SensorLinearization &lin, const RMat &basis,
                                      const std::vector<cvec> &beta_p,
                                      const std::vector<cvec> &u_p, double rho);

// Fusion center average: mean of alpha^z + u^z.
cvec fusion_average(const std::vector<const cvec *> &alpha_plus_u);

// gamma^{z,y} = alpha^z + u^{z,y} for every neighbor y.
std::vector<cvec> gamma_messages(const cvec &alpha, const std::vector<cvec> &dual);

// beta^{z,y} = (gamma^{z,y} + gamma^{y,z}) / 2 (identical at both endpoints).
cvec beta_update(const cvec &gamma_zy, const cvec &gamma_yz);

// u^{z,y} += alpha^z - beta^{z,y}
void dual_update(cvec &dual, const cvec &alpha, const cvec &beta);

// Residual-balancing rho update; returns the new rho (duals must be rescaled
// by rho_old/rho_new by the caller when it changes).
double adapt_rho(double primal_residual, double dual_residual, double rho,
                 const AdmmConfig &cfg);

// eps_p = sum_z ||H^z alpha^z - beta^z||_2 / sqrt(P K_g sum_z N_z)
double primal_residual(const Topology &topology, const std::vector<GainAgentState> &states);

// eps_DIFF = sum_{z != z'} ||alpha^z - alpha^z'||_2 / sqrt(P K_g Z (Z-1)),
// ordered pairs counted both ways.
double estimate_spread(const std::vector<GainAgentState> &states);

// Runs Algorithm-1.2-style consensus iterations until eps_p falls below
// tol_alpha * ||alpha|| (relative change for isolated agents) or the
// iteration cap. States are updated in place; transport is only used in
// decentralized mode.
GainStageResult run_gain_stage(ConsensusMode mode, const Topology &topology,
                               const std::vector<GainAgentData> &data, const BasisConfig &cfg,
                               const AdmmConfig &admm, Transport *transport,
                               std::vector<GainAgentState> &states,
                               const IterationHook &hook = {});

} // namespace mfcal
