// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/doa_iht.hpp"
#include "mfcal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfcal {

void GridConfig::validate() const {
    if (points < 1)
        throw std::invalid_argument("grid: need at least one candidate direction");
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(points))));
    if (side * side != points || side % 2 == 0)
        throw std::invalid_argument("grid: point count must be an odd square (1, 9, 25, ...)");
    if (!(extent > 0.0) || !(refine_factor > 0.0) || refine_factor > 1.0 || !(min_spacing > 0.0))
        throw std::invalid_argument("grid: extent/refine/min_spacing out of range");
}

DirectionGrid build_direction_grid(Direction center, const GridConfig &cfg, bool reference_fixed,
                                   int outer_iteration) {
    cfg.validate();
    if (outer_iteration < 1)
        throw std::invalid_argument("grid: outer iteration is 1-based");
    DirectionGrid grid;
    if (reference_fixed || cfg.points == 1) {
        grid.points = {center};
        grid.center_index = 0;
        grid.spacing = 0.0;
        return grid;
    }
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(cfg.points))));
    double extent = cfg.extent * std::pow(cfg.refine_factor, outer_iteration - 1);
    double spacing = 2.0 * extent / static_cast<double>(side - 1);
    if (spacing < cfg.min_spacing) {
        spacing = cfg.min_spacing;
        extent = spacing * static_cast<double>(side - 1) / 2.0;
    }
    grid.points.reserve(cfg.points);
    const auto half = static_cast<std::ptrdiff_t>(side / 2);
    for (std::ptrdiff_t i = -half; i <= half; ++i)
        for (std::ptrdiff_t j = -half; j <= half; ++j)
            grid.points.push_back(
                {center.l + spacing * static_cast<double>(i), center.m + spacing * static_cast<double>(j)});
    grid.center_index = cfg.points / 2;
    grid.spacing = spacing;
    return grid;
}

rvec hard_threshold(rvec values, std::size_t keep) {
    if (keep < 1)
        throw std::invalid_argument("hard_threshold: keep must be >= 1");
    if (keep >= values.size())
        return values;
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    rvec out(values.size(), 0.0);
    for (std::size_t i = 0; i < keep; ++i)
        out[order[i]] = values[order[i]];
    return out;
}

CMat source_model_covariance(const ArrayGeometry &geometry, const rvec &source_powers,
                             const cvec &gains, const std::vector<Direction> &directions,
                             const rvec &directional_gains, double lambda,
                             std::ptrdiff_t skip_source) {
    const std::size_t p = geometry.size();
    const std::size_t q = directions.size();
    if (gains.size() != p || source_powers.size() != q || directional_gains.size() != q)
        throw std::invalid_argument("source model: dimension mismatch");
    const CMat a = steering_matrix(geometry, directions, lambda);
    CMat r(p, p);
    cvec w(p);
    for (std::size_t j = 0; j < q; ++j) {
        if (static_cast<std::ptrdiff_t>(j) == skip_source)
            continue;
        const double amp = std::sqrt(std::max(source_powers[j] * directional_gains[j], 0.0));
        for (std::size_t i = 0; i < p; ++i)
            w[i] = amp * gains[i] * a(i, j);
        kernels::rank1_herm_update(p, w.data(), r.data());
    }
    return r;
}

CMat source_residual_matrix(const CMat &r_hat, const RMat &omega, const ArrayGeometry &geometry,
                            const rvec &source_powers, const cvec &gains,
                            const std::vector<Direction> &directions,
                            const rvec &directional_gains, std::size_t q, double lambda) {
    if (q >= directions.size())
        throw std::invalid_argument("source residual: source index out of range");
    const CMat others =
        source_model_covariance(geometry, source_powers, gains, directions, directional_gains,
                                lambda, static_cast<std::ptrdiff_t>(q));
    const std::size_t p = r_hat.rows();
    CMat resid(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            resid(i, j) = (r_hat(i, j) - others(i, j)) * omega(i, j);
    return resid;
}

cvec offdiag_vec(const CMat &m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("offdiag_vec: matrix not square");
    const std::size_t p = m.rows();
    cvec out;
    out.reserve(p * (p - 1));
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < p; ++i)
            if (i != j)
                out.push_back(m(i, j));
    return out;
}

std::vector<cvec> build_dictionary(const ArrayGeometry &geometry, const DirectionGrid &grid,
                                   const cvec &gains, const rvec &noise_powers,
                                   double source_power, double lambda) {
    const std::size_t p = geometry.size();
    if (gains.size() != p || noise_powers.size() != p)
        throw std::invalid_argument("dictionary: dimension mismatch");
    const CMat a = steering_matrix(geometry, grid.points, lambda);
    rvec whiten(p);
    for (std::size_t i = 0; i < p; ++i) {
        if (!(noise_powers[i] > 0.0))
            throw std::invalid_argument("dictionary: noise powers must be positive");
        whiten[i] = 1.0 / std::sqrt(noise_powers[i]);
    }
    const double amp = std::sqrt(std::max(source_power, 0.0));
    std::vector<cvec> atoms(grid.points.size(), cvec(p));
    for (std::size_t g = 0; g < grid.points.size(); ++g)
        for (std::size_t i = 0; i < p; ++i)
            atoms[g][i] = amp * whiten[i] * gains[i] * a(i, g);
    return atoms;
}

double atom_correlation(const cvec &atom, const CMat &resid) {
    if (atom.size() != resid.rows() || resid.rows() != resid.cols())
        throw std::invalid_argument("atom_correlation: dimension mismatch");
    const cvec w = matvec(resid, atom);
    const cplx quad = kernels::cdotc(atom, w);
    double diag = 0.0;
    for (std::size_t i = 0; i < atom.size(); ++i)
        diag += std::norm(atom[i]) * resid(i, i).real();
    return quad.real() - diag;
}

double atom_pattern_norm2(const cvec &atom) {
    const double s2 = kernels::sumsq(atom);
    double s4 = 0.0;
    for (const cplx &v : atom)
        s4 += std::norm(v) * std::norm(v);
    return s2 * s2 - s4;
}

Selection correlate_and_select(const std::vector<std::vector<cvec>> &dictionary_per_lambda,
                               const std::vector<CMat> &residual_per_lambda,
                               std::size_t fallback_index) {
    if (dictionary_per_lambda.empty() ||
        dictionary_per_lambda.size() != residual_per_lambda.size())
        throw std::invalid_argument("correlate_and_select: per-wavelength inputs disagree");
    const std::size_t n_grid = dictionary_per_lambda.front().size();
    const std::size_t j_z = dictionary_per_lambda.size();

    RMat corr(j_z, n_grid);
    rvec score(n_grid, 0.0);
    for (std::size_t j = 0; j < j_z; ++j) {
        const auto &atoms = dictionary_per_lambda[j];
        if (atoms.size() != n_grid)
            throw std::invalid_argument("correlate_and_select: grid sizes differ per wavelength");
        for (std::size_t g = 0; g < n_grid; ++g) {
            const double c = atom_correlation(atoms[g], residual_per_lambda[j]);
            corr(j, g) = c;
            score[g] += c * c;
        }
    }

    const rvec kept = hard_threshold(score, 1);
    Selection sel;
    const auto it = std::find_if(kept.begin(), kept.end(), [](double v) { return v != 0.0; });
    if (it == kept.end()) {
        sel.degenerate = true;
        sel.grid_index = fallback_index;
    } else {
        sel.grid_index = static_cast<std::size_t>(it - kept.begin());
    }

    sel.gain_per_lambda.resize(j_z);
    for (std::size_t j = 0; j < j_z; ++j) {
        const double denom = atom_pattern_norm2(dictionary_per_lambda[j][sel.grid_index]);
        const double c = corr(j, sel.grid_index);
        sel.gain_per_lambda[j] = denom > 0.0 ? std::max(0.0, c / denom) : 0.0;
    }
    return sel;
}

rvec alpha_m_update(const rvec &m_check, const RMat &basis_m, const std::vector<rvec> &beta,
                    const std::vector<rvec> &dual, double rho) {
    const std::size_t k = basis_m.cols();
    const std::size_t j_z = basis_m.rows();
    if (m_check.size() != j_z || beta.size() != dual.size())
        throw std::invalid_argument("alpha_m_update: dimension mismatch");
    RMat gram(k, k);
    rvec rhs(k, 0.0);
    for (std::size_t j = 0; j < j_z; ++j) {
        for (std::size_t a = 0; a < k; ++a) {
            const double ba = basis_m(j, a);
            rhs[a] += 2.0 * ba * m_check[j];
            for (std::size_t b = 0; b < k; ++b)
                gram(a, b) += 2.0 * ba * basis_m(j, b);
        }
    }
    const double ridge = rho * static_cast<double>(beta.size());
    for (std::size_t a = 0; a < k; ++a) {
        gram(a, a) += ridge;
        for (std::size_t y = 0; y < beta.size(); ++y) {
            if (beta[y].size() != k || dual[y].size() != k)
                throw std::invalid_argument("alpha_m_update: neighbor block length != K_m");
            rhs[a] += rho * (beta[y][a] - dual[y][a]);
        }
    }
    return solve_spd(gram, rhs);
}

rvec estimate_noise(const CMat &r_hat, const CMat &source_model) {
    if (r_hat.rows() != source_model.rows() || r_hat.cols() != source_model.cols())
        throw std::invalid_argument("estimate_noise: shape mismatch");
    const std::size_t p = r_hat.rows();
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        mean_diag += r_hat(i, i).real();
    mean_diag /= static_cast<double>(p);
    const double floor = 1e-8 * std::abs(mean_diag);
    rvec sigma(p);
    for (std::size_t i = 0; i < p; ++i)
        sigma[i] = std::max(r_hat(i, i).real() - source_model(i, i).real(), floor);
    return sigma;
}

namespace {

std::span<const double> m_block(const rvec &v, std::size_t q, std::size_t k) {
    return {v.data() + q * k, k};
}

// Decentralized / fusion / isolated consensus on one source's directional
// coefficients; mirrors the gain-stage message pattern with real payloads.
void directional_consensus(ConsensusMode mode, const Topology &topology,
                           const std::vector<DoaAgentData> &data,
                           const std::vector<rvec> &m_check, const AdmmConfig &admm,
                           Transport *transport, std::vector<rvec> &alpha_q) {
    const std::size_t z_count = alpha_q.size();
    const std::size_t k = data.front().basis_m.cols();
    const double rho = admm.rho;

    std::vector<std::vector<rvec>> beta(z_count), dual(z_count);
    std::vector<rvec> fusion_dual(z_count, rvec(k, 0.0));
    for (std::size_t z = 0; z < z_count; ++z) {
        beta[z].assign(topology.neighbors[z].size(), alpha_q[z]);
        dual[z].assign(topology.neighbors[z].size(), rvec(k, 0.0));
    }
    rvec fusion_mean(k, 0.0);
    if (mode == ConsensusMode::Fusion) {
        for (std::size_t z = 0; z < z_count; ++z)
            for (std::size_t i = 0; i < k; ++i)
                fusion_mean[i] += alpha_q[z][i] / static_cast<double>(z_count);
    }

    for (int t = 1; t <= admm.max_iterations; ++t) {
        const std::vector<rvec> prev = alpha_q;
        for (std::size_t z = 0; z < z_count; ++z) {
            switch (mode) {
            case ConsensusMode::Decentralized:
                alpha_q[z] = alpha_m_update(m_check[z], data[z].basis_m, beta[z], dual[z], rho);
                break;
            case ConsensusMode::Fusion: {
                rvec prior(k);
                for (std::size_t i = 0; i < k; ++i)
                    prior[i] = fusion_mean[i] - fusion_dual[z][i];
                alpha_q[z] = alpha_m_update(m_check[z], data[z].basis_m, {prior},
                                            {rvec(k, 0.0)}, rho);
                break;
            }
            case ConsensusMode::Isolated:
                alpha_q[z] = alpha_m_update(m_check[z], data[z].basis_m, {prev[z]},
                                            {rvec(k, 0.0)}, rho);
                break;
            }
        }

        double eps_p = 0.0;
        if (mode == ConsensusMode::Decentralized && topology.num_edges() > 0) {
            std::vector<Envelope> outgoing;
            std::vector<std::vector<rvec>> sent(z_count);
            for (std::size_t z = 0; z < z_count; ++z) {
                const auto &nbrs = topology.neighbors[z];
                sent[z].resize(nbrs.size());
                for (std::size_t y = 0; y < nbrs.size(); ++y) {
                    rvec gamma = alpha_q[z];
                    for (std::size_t i = 0; i < k; ++i)
                        gamma[i] += dual[z][y][i];
                    sent[z][y] = gamma;
                    Envelope e;
                    e.round = static_cast<std::uint32_t>(t);
                    e.from = static_cast<std::uint16_t>(z);
                    e.to = static_cast<std::uint16_t>(nbrs[y]);
                    e.kind = PayloadKind::GammaDirectional;
                    e.payload.resize(k);
                    for (std::size_t i = 0; i < k; ++i)
                        e.payload[i] = {gamma[i], 0.0};
                    outgoing.push_back(std::move(e));
                }
            }
            const std::vector<Envelope> incoming =
                transport->exchange_round(topology, std::move(outgoing));
            for (const Envelope &e : incoming) {
                const std::size_t z = e.to;
                const auto &nbrs = topology.neighbors[z];
                const std::size_t y_pos = static_cast<std::size_t>(
                    std::find(nbrs.begin(), nbrs.end(), static_cast<std::size_t>(e.from)) -
                    nbrs.begin());
                for (std::size_t i = 0; i < k; ++i) {
                    const double b = 0.5 * (sent[z][y_pos][i] + e.payload[i].real());
                    beta[z][y_pos][i] = b;
                    dual[z][y_pos][i] += alpha_q[z][i] - b;
                }
            }
            double acc = 0.0;
            std::size_t degree_sum = 0;
            for (std::size_t z = 0; z < z_count; ++z) {
                degree_sum += beta[z].size();
                double local = 0.0;
                for (std::size_t y = 0; y < beta[z].size(); ++y)
                    for (std::size_t i = 0; i < k; ++i) {
                        const double d = alpha_q[z][i] - beta[z][y][i];
                        local += d * d;
                    }
                acc += std::sqrt(local);
            }
            eps_p = degree_sum ? acc / std::sqrt(static_cast<double>(k * degree_sum)) : 0.0;
        } else if (mode == ConsensusMode::Fusion) {
            rvec new_mean(k, 0.0);
            for (std::size_t z = 0; z < z_count; ++z)
                for (std::size_t i = 0; i < k; ++i)
                    new_mean[i] += (alpha_q[z][i] + fusion_dual[z][i]) / static_cast<double>(z_count);
            fusion_mean = new_mean;
            double acc = 0.0;
            for (std::size_t z = 0; z < z_count; ++z) {
                double local = 0.0;
                for (std::size_t i = 0; i < k; ++i) {
                    fusion_dual[z][i] += alpha_q[z][i] - fusion_mean[i];
                    const double d = alpha_q[z][i] - fusion_mean[i];
                    local += d * d;
                }
                acc += std::sqrt(local);
            }
            eps_p = acc / std::sqrt(static_cast<double>(k * z_count));
        } else {
            double worst = 0.0;
            for (std::size_t z = 0; z < z_count; ++z) {
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < k; ++i) {
                    const double d = alpha_q[z][i] - prev[z][i];
                    num += d * d;
                    den += alpha_q[z][i] * alpha_q[z][i];
                }
                worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
            }
            eps_p = worst;
        }

        rvec mean(k, 0.0);
        for (std::size_t z = 0; z < z_count; ++z)
            for (std::size_t i = 0; i < k; ++i)
                mean[i] += alpha_q[z][i] / static_cast<double>(z_count);
        const double mean_norm = norm2(mean);
        const bool stop = mode == ConsensusMode::Isolated ? eps_p <= admm.tol_alpha
                                                          : eps_p <= admm.tol_alpha * mean_norm;
        if (stop)
            break;
    }
}

} // namespace

DoaStageResult run_doa_stage(ConsensusMode mode, const Topology &topology,
                             const std::vector<DoaAgentData> &data,
                             const ArrayGeometry &geometry, const SkyModel &sky,
                             const BasisConfig &cfg, const DoaStageConfig &stage,
                             int outer_iteration, Transport *transport,
                             std::vector<DoaAgentState> &states) {
    const std::size_t z_count = states.size();
    if (data.size() != z_count || topology.num_agents != z_count || z_count == 0)
        throw std::invalid_argument("run_doa_stage: agent counts disagree");
    const std::size_t q_count = sky.num_sources();
    const auto k_m = static_cast<std::size_t>(cfg.order_dir);

    // per-agent grids, centered on the mean of the agent's current estimates
    std::vector<std::vector<DirectionGrid>> grids(z_count);
    for (std::size_t z = 0; z < z_count; ++z) {
        grids[z].resize(q_count);
        for (std::size_t q = 0; q < q_count; ++q) {
            Direction center{};
            for (const auto &dirs : states[z].directions) {
                center.l += dirs[q].l;
                center.m += dirs[q].m;
            }
            const double inv = 1.0 / static_cast<double>(states[z].directions.size());
            center.l *= inv;
            center.m *= inv;
            grids[z][q] = build_direction_grid(center, stage.grid, q == sky.reference_index,
                                               outer_iteration);
        }
    }

    // dictionaries are fixed for the whole stage (gains, noise, grids frozen)
    std::vector<std::vector<std::vector<cvec>>> atoms(z_count); // [z][q][lambda] -> atom list
    for (std::size_t z = 0; z < z_count; ++z) {
        atoms[z].resize(q_count);
        for (std::size_t q = 0; q < q_count; ++q) {
            atoms[z][q].resize(data[z].lambdas.size());
            for (std::size_t j = 0; j < data[z].lambdas.size(); ++j)
                atoms[z][q][j] =
                    build_dictionary(geometry, grids[z][q], states[z].gains[j],
                                     states[z].noise_powers[j], data[z].source_powers[j][q],
                                     data[z].lambdas[j]);
        }
    }

    DoaStageResult result;
    for (int iter = 1; iter <= stage.max_iterations; ++iter) {
        result.iterations = iter;
        std::vector<rvec> alpha_before(z_count);
        std::vector<std::vector<std::vector<Direction>>> dirs_before(z_count);
        for (std::size_t z = 0; z < z_count; ++z) {
            alpha_before[z] = states[z].alpha_m;
            dirs_before[z] = states[z].directions;
        }

        for (std::size_t q = 0; q < q_count; ++q) {
            std::vector<rvec> m_check(z_count);
            for (std::size_t z = 0; z < z_count; ++z) {
                const std::size_t j_count = data[z].lambdas.size();
                std::vector<CMat> residuals(j_count);
                for (std::size_t j = 0; j < j_count; ++j) {
                    const rvec m_cur =
                        project_directional(states[z].alpha_m, data[z].lambdas[j], cfg);
                    residuals[j] = source_residual_matrix(
                        data[z].r_hat[j], data[z].omega[j], geometry, data[z].source_powers[j],
                        states[z].gains[j], states[z].directions[j], m_cur, q,
                        data[z].lambdas[j]);
                }
                std::vector<std::vector<cvec>> dict(j_count);
                for (std::size_t j = 0; j < j_count; ++j)
                    dict[j] = atoms[z][q][j];
                const Selection sel =
                    correlate_and_select(dict, residuals, grids[z][q].center_index);
                result.any_degenerate = result.any_degenerate || sel.degenerate;
                if (!sel.degenerate)
                    for (auto &dirs : states[z].directions)
                        dirs[q] = grids[z][q].points[sel.grid_index];
                m_check[z] = sel.gain_per_lambda;
            }

            // consensus over this source's directional coefficients
            std::vector<rvec> alpha_q(z_count);
            for (std::size_t z = 0; z < z_count; ++z) {
                const auto b = m_block(states[z].alpha_m, q, k_m);
                alpha_q[z].assign(b.begin(), b.end());
            }
            directional_consensus(mode, topology, data, m_check, stage.admm, transport, alpha_q);
            for (std::size_t z = 0; z < z_count; ++z)
                std::copy(alpha_q[z].begin(), alpha_q[z].end(),
                          states[z].alpha_m.begin() + q * k_m);
        }

        // stop when either the coefficients or the directions settle
        double alpha_move = 0.0, alpha_norm = 0.0, dir_move = 0.0;
        for (std::size_t z = 0; z < z_count; ++z) {
            for (std::size_t i = 0; i < states[z].alpha_m.size(); ++i) {
                const double d = states[z].alpha_m[i] - alpha_before[z][i];
                alpha_move += d * d;
                alpha_norm += states[z].alpha_m[i] * states[z].alpha_m[i];
            }
            for (std::size_t j = 0; j < states[z].directions.size(); ++j)
                for (std::size_t q = 0; q < q_count; ++q) {
                    const Direction d = states[z].directions[j][q] - dirs_before[z][j][q];
                    dir_move += d.l * d.l + d.m * d.m;
                }
        }
        alpha_move = std::sqrt(alpha_move);
        alpha_norm = std::sqrt(alpha_norm);
        dir_move = std::sqrt(dir_move);
        const bool alpha_converged = alpha_move < stage.admm.tol_alpha * std::max(alpha_norm, 1e-300);
        const bool dirs_converged = dir_move < stage.tol_direction;
        if (alpha_converged || dirs_converged)
            break;
    }

    // final local noise update from the fitted source model
    for (std::size_t z = 0; z < z_count; ++z) {
        for (std::size_t j = 0; j < data[z].lambdas.size(); ++j) {
            const rvec m_cur = project_directional(states[z].alpha_m, data[z].lambdas[j], cfg);
            const CMat model = source_model_covariance(
                geometry, data[z].source_powers[j], states[z].gains[j], states[z].directions[j],
                m_cur, data[z].lambdas[j]);
            states[z].noise_powers[j] = estimate_noise(data[z].r_hat[j], model);
        }
    }
    return result;
}

} // namespace mfcal
