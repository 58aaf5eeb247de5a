// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/admm.hpp"
#include "mfcal/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mfcal {

void AdmmConfig::validate() const {
    if (!(rho > 0.0))
        throw std::invalid_argument("admm: rho must be positive");
    if (!(mu > 1.0) || !(tau_incr > 1.0) || !(tau_decr > 1.0))
        throw std::invalid_argument("admm: residual balancing needs mu, tau > 1");
    if (max_iterations < 1 || max_sweeps < 1)
        throw std::invalid_argument("admm: iteration caps must be >= 1");
    if (!(tol_alpha > 0.0) || !(tol_alpha_local > 0.0))
        throw std::invalid_argument("admm: tolerances must be positive");
}

cvec select_off_row(const CMat &m, std::size_t p) {
    if (p >= m.rows() || m.rows() != m.cols())
        throw std::invalid_argument("select_off_row: index out of range");
    cvec out;
    out.reserve(m.cols() - 1);
    for (std::size_t j = 0; j < m.cols(); ++j)
        if (j != p)
            out.push_back(m(p, j));
    return out;
}

rvec select_off_row(const RMat &m, std::size_t p) {
    if (p >= m.rows() || m.rows() != m.cols())
        throw std::invalid_argument("select_off_row: index out of range");
    rvec out;
    out.reserve(m.cols() - 1);
    for (std::size_t j = 0; j < m.cols(); ++j)
        if (j != p)
            out.push_back(m(p, j));
    return out;
}

SensorLinearization build_local_linearization(const GainAgentData &data, const cvec &alpha,
                                              const BasisConfig &cfg, std::size_t sensor) {
    const std::size_t j_z = data.lambdas.size();
    if (data.r_hat.size() != j_z || data.r_k.size() != j_z || data.omega.size() != j_z)
        throw std::invalid_argument("linearization: per-wavelength data sizes disagree");
    SensorLinearization lin;
    lin.rhat.resize(j_z);
    lin.z.resize(j_z);
    for (std::size_t j = 0; j < j_z; ++j) {
        const CMat &r_hat = data.r_hat[j];
        const CMat &r_k = data.r_k[j];
        const RMat &omega = data.omega[j];
        const std::size_t p = r_hat.rows();
        if (sensor >= p)
            throw std::invalid_argument("linearization: sensor index out of range");
        const cvec gains = project_gains(alpha, data.lambdas[j], cfg);
        cvec &rv = lin.rhat[j];
        cvec &zv = lin.z[j];
        rv.resize(p - 1);
        zv.resize(p - 1);
        std::size_t k = 0;
        for (std::size_t i = 0; i < p; ++i) {
            if (i == sensor)
                continue;
            const double w = omega(sensor, i);
            rv[k] = r_hat(sensor, i) * w;
            zv[k] = r_k(sensor, i) * std::conj(gains[i]) * w;
            ++k;
        }
    }
    return lin;
}

double sensor_cost(const SensorLinearization &lin, const RMat &basis,
                   std::span<const cplx> alpha_block) {
    double acc = 0.0;
    cvec resid;
    for (std::size_t j = 0; j < lin.z.size(); ++j) {
        cplx gain{};
        for (std::size_t k = 0; k < basis.cols(); ++k)
            gain += basis(j, k) * alpha_block[k];
        resid = lin.rhat[j];
        kernels::axpy(-gain, lin.z[j], resid);
        acc += kernels::sumsq(resid);
    }
    return acc;
}

namespace {

// Solves (2 sum_j ||z_j||^2 b_j b_j^T + ridge I) a = 2 sum_j (z_j^H r_j) b_j + rhs_extra.
cvec solve_normal_equations(const SensorLinearization &lin, const RMat &basis, double ridge,
                            const cvec &rhs_extra) {
    const std::size_t k = basis.cols();
    RMat gram(k, k);
    cvec rhs = rhs_extra;
    rhs.resize(k);
    for (std::size_t j = 0; j < lin.z.size(); ++j) {
        const double znorm2 = kernels::sumsq(lin.z[j]);
        const cplx corr = kernels::cdotc(lin.z[j], lin.rhat[j]);
        for (std::size_t a = 0; a < k; ++a) {
            const double ba = basis(j, a);
            rhs[a] += 2.0 * ba * corr;
            for (std::size_t b = 0; b < k; ++b)
                gram(a, b) += 2.0 * znorm2 * ba * basis(j, b);
        }
    }
    for (std::size_t a = 0; a < k; ++a)
        gram(a, a) += ridge;
    try {
        return solve_spd(gram, rhs);
    } catch (const std::runtime_error &) {
        throw std::runtime_error("local gain update: system is ill-posed (rho = 0 with "
                                 "rank-deficient data)");
    }
}

} // namespace

cvec local_alpha_update_fusion(const SensorLinearization &lin, const RMat &basis,
                               std::span<const cplx> alpha_p, std::span<const cplx> u_p,
                               double rho) {
    const std::size_t k = basis.cols();
    if (alpha_p.size() != k || u_p.size() != k)
        throw std::invalid_argument("local update: prior block length != K_g");
    cvec extra(k);
    for (std::size_t a = 0; a < k; ++a)
        extra[a] = rho * (alpha_p[a] - u_p[a]);
    return solve_normal_equations(lin, basis, rho, extra);
}

cvec local_alpha_update_decentralized(const SensorLinearization &lin, const RMat &basis,
                                      const std::vector<cvec> &beta_p,
                                      const std::vector<cvec> &u_p, double rho) {
    const std::size_t k = basis.cols();
    if (beta_p.size() != u_p.size())
        throw std::invalid_argument("local update: neighbor block counts disagree");
    const std::size_t n_z = beta_p.size();
    cvec extra(k);
    for (std::size_t y = 0; y < n_z; ++y) {
        if (beta_p[y].size() != k || u_p[y].size() != k)
            throw std::invalid_argument("local update: neighbor block length != K_g");
        for (std::size_t a = 0; a < k; ++a)
            extra[a] += rho * (beta_p[y][a] - u_p[y][a]);
    }
    return solve_normal_equations(lin, basis, rho * static_cast<double>(n_z), extra);
}

cvec fusion_average(const std::vector<const cvec *> &alpha_plus_u) {
    if (alpha_plus_u.empty())
        throw std::invalid_argument("fusion_average: no agents");
    cvec mean(alpha_plus_u.front()->size());
    for (const cvec *v : alpha_plus_u) {
        if (v->size() != mean.size())
            throw std::invalid_argument("fusion_average: vector lengths disagree");
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean[i] += (*v)[i];
    }
    const double inv = 1.0 / static_cast<double>(alpha_plus_u.size());
    for (cplx &v : mean)
        v *= inv;
    return mean;
}

std::vector<cvec> gamma_messages(const cvec &alpha, const std::vector<cvec> &dual) {
    std::vector<cvec> out(dual.size());
    for (std::size_t y = 0; y < dual.size(); ++y) {
        if (dual[y].size() != alpha.size())
            throw std::invalid_argument("gamma_messages: dual length != alpha length");
        out[y] = alpha;
        for (std::size_t i = 0; i < alpha.size(); ++i)
            out[y][i] += dual[y][i];
    }
    return out;
}

cvec beta_update(const cvec &gamma_zy, const cvec &gamma_yz) {
    if (gamma_zy.size() != gamma_yz.size())
        throw std::invalid_argument("beta_update: message lengths disagree");
    cvec beta(gamma_zy.size());
    for (std::size_t i = 0; i < beta.size(); ++i)
        beta[i] = 0.5 * (gamma_yz[i] + gamma_zy[i]);
    return beta;
}

void dual_update(cvec &dual, const cvec &alpha, const cvec &beta) {
    if (dual.size() != alpha.size() || beta.size() != alpha.size())
        throw std::invalid_argument("dual_update: lengths disagree");
    for (std::size_t i = 0; i < dual.size(); ++i)
        dual[i] += alpha[i] - beta[i];
}

double adapt_rho(double primal, double dual, double rho, const AdmmConfig &cfg) {
    if (primal < 0.0 || dual < 0.0)
        throw std::invalid_argument("adapt_rho: residuals must be nonnegative");
    if (primal > cfg.mu * dual)
        return rho * cfg.tau_incr;
    if (dual > cfg.mu * primal)
        return rho / cfg.tau_decr;
    return rho;
}

double primal_residual(const Topology &topology, const std::vector<GainAgentState> &states) {
    std::size_t degree_sum = 0;
    double acc = 0.0;
    for (std::size_t z = 0; z < states.size(); ++z) {
        degree_sum += topology.neighbors[z].size();
        double local = 0.0;
        for (std::size_t y = 0; y < states[z].beta.size(); ++y) {
            cvec diff = states[z].alpha;
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] -= states[z].beta[y][i];
            local += kernels::sumsq(diff);
        }
        acc += std::sqrt(local);
    }
    if (degree_sum == 0)
        return 0.0;
    const double dim = static_cast<double>(states.front().alpha.size() * degree_sum);
    return acc / std::sqrt(dim);
}

double estimate_spread(const std::vector<GainAgentState> &states) {
    const std::size_t z_count = states.size();
    if (z_count < 2)
        return 0.0;
    double acc = 0.0;
    cvec diff;
    for (std::size_t a = 0; a < z_count; ++a) {
        for (std::size_t b = 0; b < z_count; ++b) {
            if (a == b)
                continue;
            diff = states[a].alpha;
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] -= states[b].alpha[i];
            acc += norm2(diff);
        }
    }
    const double dim = static_cast<double>(states.front().alpha.size()) *
                       static_cast<double>(z_count) * static_cast<double>(z_count - 1);
    return acc / std::sqrt(dim);
}

namespace {

std::span<const cplx> block(const cvec &v, std::size_t p, std::size_t k) {
    return {v.data() + p * k, k};
}

// One Algorithm-1.2.2 pass: sweep sensors in order, refreshing the conjugate
// gain copy after each sensor, until the local iterate settles.
void local_sweeps(const GainAgentData &data, const BasisConfig &cfg, const AdmmConfig &admm,
                  ConsensusMode mode, const GainAgentState &st, const cvec &fusion_prior,
                  const cvec &alpha_prev, cvec &alpha) {
    const auto k = static_cast<std::size_t>(cfg.order_gain);
    const std::size_t p_count = alpha.size() / k;
    for (int sweep = 0; sweep < admm.max_sweeps; ++sweep) {
        const cvec before = alpha;
        for (std::size_t p = 0; p < p_count; ++p) {
            const SensorLinearization lin = build_local_linearization(data, alpha, cfg, p);
            cvec updated;
            switch (mode) {
            case ConsensusMode::Decentralized: {
                std::vector<cvec> beta_p, u_p;
                beta_p.reserve(st.beta.size());
                u_p.reserve(st.dual.size());
                for (std::size_t y = 0; y < st.beta.size(); ++y) {
                    const auto bb = block(st.beta[y], p, k);
                    const auto ub = block(st.dual[y], p, k);
                    beta_p.emplace_back(bb.begin(), bb.end());
                    u_p.emplace_back(ub.begin(), ub.end());
                }
                updated = local_alpha_update_decentralized(lin, data.basis, beta_p, u_p, st.rho);
                break;
            }
            case ConsensusMode::Fusion:
                updated = local_alpha_update_fusion(lin, data.basis, block(fusion_prior, p, k),
                                                    block(st.fusion_dual, p, k), st.rho);
                break;
            case ConsensusMode::Isolated: {
                const cvec zero(k, cplx{});
                updated =
                    local_alpha_update_fusion(lin, data.basis, block(alpha_prev, p, k),
                                              std::span<const cplx>{zero.data(), k}, st.rho);
                break;
            }
            }
            std::copy(updated.begin(), updated.end(), alpha.begin() + p * k);
        }
        cvec delta = alpha;
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] -= before[i];
        if (norm2(delta) < admm.tol_alpha_local * norm2(alpha))
            break;
    }
}

} // namespace

GainStageResult run_gain_stage(ConsensusMode mode, const Topology &topology,
                               const std::vector<GainAgentData> &data, const BasisConfig &cfg,
                               const AdmmConfig &admm, Transport *transport,
                               std::vector<GainAgentState> &states, const IterationHook &hook) {
    admm.validate();
    const std::size_t z_count = states.size();
    if (data.size() != z_count || topology.num_agents != z_count || z_count == 0)
        throw std::invalid_argument("run_gain_stage: agent counts disagree");
    if (mode == ConsensusMode::Decentralized && transport == nullptr && topology.num_edges() > 0)
        throw std::invalid_argument("run_gain_stage: decentralized mode needs a transport");

    const std::size_t vec_len = states.front().alpha.size();

    // fresh duals each stage; beta starts from the agent's own iterate
    for (std::size_t z = 0; z < z_count; ++z) {
        GainAgentState &st = states[z];
        st.rho = admm.rho;
        const std::size_t n_z = topology.neighbors[z].size();
        st.beta.assign(n_z, st.alpha);
        st.dual.assign(n_z, cvec(vec_len, cplx{}));
        st.fusion_dual.assign(vec_len, cplx{});
    }

    cvec fusion_mean(vec_len, cplx{});
    if (mode == ConsensusMode::Fusion) {
        std::vector<const cvec *> ptrs;
        for (const auto &st : states)
            ptrs.push_back(&st.alpha);
        fusion_mean = fusion_average(ptrs);
    }

    GainStageResult result;
    std::vector<cvec> alpha_prev(z_count);
    double dual_res = 0.0;

    for (int t = 1; t <= admm.max_iterations; ++t) {
        for (std::size_t z = 0; z < z_count; ++z)
            alpha_prev[z] = states[z].alpha;

        for (std::size_t z = 0; z < z_count; ++z)
            local_sweeps(data[z], cfg, admm, mode, states[z], fusion_mean, alpha_prev[z],
                         states[z].alpha);

        if (mode == ConsensusMode::Decentralized && topology.num_edges() > 0) {
            // gamma exchange, then beta and dual updates
            std::vector<Envelope> outgoing;
            std::vector<std::vector<cvec>> sent(z_count);
            for (std::size_t z = 0; z < z_count; ++z) {
                sent[z] = gamma_messages(states[z].alpha, states[z].dual);
                for (std::size_t y = 0; y < topology.neighbors[z].size(); ++y) {
                    Envelope e;
                    e.round = static_cast<std::uint32_t>(t);
                    e.from = static_cast<std::uint16_t>(z);
                    e.to = static_cast<std::uint16_t>(topology.neighbors[z][y]);
                    e.kind = PayloadKind::GammaGain;
                    e.payload = sent[z][y];
                    outgoing.push_back(std::move(e));
                }
            }
            const std::vector<Envelope> incoming =
                transport->exchange_round(topology, std::move(outgoing));
            double beta_change = 0.0;
            for (const Envelope &e : incoming) {
                const std::size_t z = e.to;
                const auto &nbrs = topology.neighbors[z];
                const std::size_t y_pos = static_cast<std::size_t>(
                    std::find(nbrs.begin(), nbrs.end(), static_cast<std::size_t>(e.from)) -
                    nbrs.begin());
                cvec beta = beta_update(sent[z][y_pos], e.payload);
                cvec d = beta;
                for (std::size_t i = 0; i < d.size(); ++i)
                    d[i] -= states[z].beta[y_pos][i];
                beta_change += kernels::sumsq(d);
                states[z].beta[y_pos] = std::move(beta);
                dual_update(states[z].dual[y_pos], states[z].alpha, states[z].beta[y_pos]);
            }
            const std::size_t degree_sum = 2 * topology.num_edges();
            dual_res = states.front().rho * std::sqrt(beta_change) /
                       std::sqrt(static_cast<double>(vec_len * degree_sum));
        } else if (mode == ConsensusMode::Fusion) {
            std::vector<cvec> sums(z_count);
            std::vector<const cvec *> ptrs;
            for (std::size_t z = 0; z < z_count; ++z) {
                sums[z] = states[z].alpha;
                for (std::size_t i = 0; i < vec_len; ++i)
                    sums[z][i] += states[z].fusion_dual[i];
                ptrs.push_back(&sums[z]);
            }
            cvec new_mean = fusion_average(ptrs);
            cvec d = new_mean;
            for (std::size_t i = 0; i < vec_len; ++i)
                d[i] -= fusion_mean[i];
            dual_res = states.front().rho * norm2(d) * std::sqrt(static_cast<double>(z_count)) /
                       std::sqrt(static_cast<double>(vec_len * z_count));
            fusion_mean = std::move(new_mean);
            for (std::size_t z = 0; z < z_count; ++z)
                dual_update(states[z].fusion_dual, states[z].alpha, fusion_mean);
        }

        // residuals and the stop criterion
        double eps_p = 0.0;
        cvec mean(vec_len, cplx{});
        for (const auto &st : states)
            for (std::size_t i = 0; i < vec_len; ++i)
                mean[i] += st.alpha[i];
        for (cplx &v : mean)
            v /= static_cast<double>(z_count);
        const double mean_norm = norm2(mean);

        bool stop = false;
        if (mode == ConsensusMode::Decentralized) {
            eps_p = primal_residual(topology, states);
            stop = topology.num_edges() > 0 ? (eps_p <= admm.tol_alpha * mean_norm) : true;
        } else if (mode == ConsensusMode::Fusion) {
            double acc = 0.0;
            for (const auto &st : states) {
                cvec d = st.alpha;
                for (std::size_t i = 0; i < vec_len; ++i)
                    d[i] -= fusion_mean[i];
                acc += norm2(d);
            }
            eps_p = acc / std::sqrt(static_cast<double>(vec_len * z_count));
            stop = eps_p <= admm.tol_alpha * mean_norm;
        } else {
            double worst = 0.0;
            for (std::size_t z = 0; z < z_count; ++z) {
                cvec d = states[z].alpha;
                for (std::size_t i = 0; i < vec_len; ++i)
                    d[i] -= alpha_prev[z][i];
                const double denom = std::max(norm2(states[z].alpha), 1e-300);
                worst = std::max(worst, norm2(d) / denom);
            }
            eps_p = worst;
            stop = worst <= admm.tol_alpha;
        }

        // isolated agents converge on their own; an empty-edge "network"
        // still reports spread so degenerate runs are visible
        IterationRecord rec;
        rec.t = t;
        rec.eps_primal = eps_p;
        rec.eps_diff = estimate_spread(states);
        rec.rho = states.front().rho;
        result.iterations.push_back(rec);
        if (hook)
            hook(rec);

        if (admm.adapt_rho && mode != ConsensusMode::Isolated) {
            const double old_rho = states.front().rho;
            const double new_rho = adapt_rho(eps_p, dual_res, old_rho, admm);
            if (new_rho != old_rho) {
                const double scale = old_rho / new_rho;
                for (auto &st : states) {
                    st.rho = new_rho;
                    for (auto &u : st.dual)
                        for (cplx &v : u)
                            v *= scale;
                    for (cplx &v : st.fusion_dual)
                        v *= scale;
                }
            }
        }

        if (stop) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace mfcal
