#include "clab/scheme.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "clab/error.hpp"

namespace clab {

void SchemeConfig::validate() const {
    if (!(tau > 0.0)) throw Error("bad-config", "tau must be positive");
    if (!(T >= tau)) throw Error("bad-config", "T must be at least tau");
    if (K_max < 1) throw Error("bad-config", "K_max must be at least 1");
    if (!(tol_c0 > 0.0) || !(linear_solver_tol > 0.0) || !(bmo_eps > 0.0))
        throw Error("bad-config", "tolerances must be positive");
}

std::string to_string(IterateStatus s) {
    switch (s) {
        case IterateStatus::Converged: return "converged";
        case IterateStatus::MaxIterations: return "max-iterations";
        case IterateStatus::Diverged: return "diverged";
    }
    return "unknown";
}

Trajectory Trajectory::constant_in_time(const GridFunction& U0, double T, double tau) {
    Trajectory tr;
    tr.grid = U0.grid;
    tr.m = U0.m;
    tr.tau = tau;
    int steps = static_cast<int>(std::ceil(T / tau - 1e-9));
    for (int j = 0; j <= steps; ++j) {
        tr.times.push_back(j * tau);
        tr.states.push_back(U0);
    }
    return tr;
}

bool f_affine_in_p(const ModelSpec& model, int dim) {
    int len = model.m * dim;
    Vec u = Vec::Constant(model.m, 0.37);
    for (int trial = 0; trial < 3; ++trial) {
        Vec p1(len), p2(len);
        for (int i = 0; i < len; ++i) {
            p1[i] = std::sin(1.7 * (i + 1) * (trial + 1));
            p2[i] = std::cos(2.3 * (i + 1) + trial);
        }
        Vec mid = 0.5 * (p1 + p2);
        Vec lhs = model.f(u, mid);
        Vec rhs = 0.5 * (model.f(u, p1) + model.f(u, p2));
        double scale = 1.0 + lhs.norm() + rhs.norm();
        if ((lhs - rhs).norm() > 1e-9 * scale) return false;
        u *= -0.5; // vary u across trials too
    }
    return true;
}

double resolve_p_energy(const ModelSpec& model, int dim, const SchemeConfig& config) {
    if (config.p_energy > 0.0) return config.p_energy;
    AdmissibleP ap = max_admissible_p(model, dim, sample_box(model.m, 10.0));
    if (ap.unbounded) return 2.0;
    return std::clamp(0.5 * (1.0 + ap.p_max), 1.0, 2.0);
}

namespace {

bool on_boundary(const Grid& g, int idx) {
    auto c = g.coords(idx);
    for (int d = 0; d < g.dim; ++d)
        if (c[d] == 0 || c[d] == g.shape[d] - 1) return true;
    return false;
}

// visit(node, coeff): nodal first-derivative stencil along an axis, matching
// the gradient() operator (central inside, one-sided at the ends).
template <class F>
void gradient_stencil(const Grid& g, int idx, int axis, F&& visit) {
    auto c = g.coords(idx);
    double h = g.spacing[axis];
    int n = g.shape[axis];
    int i = c[axis];
    auto node_at = [&](int k) {
        auto cc = c;
        cc[axis] = k;
        return g.index(cc[0], g.dim == 2 ? cc[1] : 0);
    };
    if (i == 0) {
        visit(node_at(0), -1.5 / h);
        visit(node_at(1), 2.0 / h);
        visit(node_at(2), -0.5 / h);
    } else if (i == n - 1) {
        visit(node_at(n - 1), 1.5 / h);
        visit(node_at(n - 2), -2.0 / h);
        visit(node_at(n - 3), 0.5 / h);
    } else {
        visit(node_at(i + 1), 0.5 / h);
        visit(node_at(i - 1), -0.5 / h);
    }
}

struct StepSystem {
    Eigen::SparseMatrix<double> M;
    Eigen::VectorXd rhs;
};

// Implicit-Euler system for one step: rows are identity for Dirichlet
// components on the boundary; elsewhere finite-volume fluxes on faces
// (cell widths equal the trapezoid weights, so zero-flux faces conserve
// the quadrature mass exactly).
StepSystem assemble_step(const ModelSpec& model, const GridFunction& w,
                         const GridFunction& u_now, bool implicit_f,
                         const GridFunction* lag_state, const SchemeConfig& config,
                         double t_next, const SourceFn& source) {
    const Grid& g = u_now.grid;
    const int m = model.m;
    const int n = g.nodes();
    const int dim = g.dim;
    const double tau = config.tau;

    if (static_cast<int>(g.bc.size()) != m)
        throw Error("bad-grid", "grid must carry one boundary condition per component");
    if (!w.all_finite())
        throw Error("blow-up-suspected", "nonfinite frozen coefficients");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * m * (2 * dim + 1) * m);
    Eigen::VectorXd rhs(n * m);

    // per-node diffusion blocks
    std::vector<Mat> Ad(static_cast<size_t>(n) * dim);
    Vec uv(m);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < m; ++c) uv[c] = w.at(i, c);
        for (int d = 0; d < dim; ++d) Ad[static_cast<size_t>(i) * dim + d] = model.a_for_axis(uv, d, dim);
    }

    GridFunction lag_grad;
    if (!implicit_f && lag_state) lag_grad = gradient(*lag_state);

    GridFunction src_field;
    if (source) src_field = source(t_next);

    Vec p0 = Vec::Zero(m * dim);
    for (int i = 0; i < n; ++i) {
        auto cc = g.coords(i);
        bool bd = on_boundary(g, i);
        for (int c = 0; c < m; ++c) uv[c] = w.at(i, c);

        Vec f0, fval;
        Mat fp;
        if (implicit_f) {
            f0 = model.f(uv, p0);
            fp.resize(m, m * dim);
            for (int q = 0; q < m * dim; ++q) {
                Vec e = Vec::Zero(m * dim);
                e[q] = 1.0;
                fp.col(q) = model.f(uv, e) - f0;
            }
        } else {
            Vec pl = Vec::Zero(m * dim);
            if (lag_state)
                for (int q = 0; q < m * dim; ++q) pl[q] = lag_grad.at(i, q);
            fval = model.f(uv, pl);
        }

        for (int c = 0; c < m; ++c) {
            int row = i * m + c;
            if (bd && g.bc[c] == BC::Dirichlet) {
                trip.emplace_back(row, row, 1.0);
                rhs[row] = u_now.at(i, c); // boundary data held fixed in time
                continue;
            }
            trip.emplace_back(row, row, 1.0);
            rhs[row] = u_now.at(i, c);

            for (int d = 0; d < dim; ++d) {
                double h = g.spacing[d];
                double cell = g.axis_weight(d, cc[d]);
                int stride = (d == 0) ? 1 : g.shape[0];
                for (int side = -1; side <= 1; side += 2) {
                    int knb = cc[d] + side;
                    if (knb < 0 || knb >= g.shape[d]) continue; // outer face: zero flux
                    int nb = i + side * stride;
                    const Mat& Ai = Ad[static_cast<size_t>(i) * dim + d];
                    const Mat& An = Ad[static_cast<size_t>(nb) * dim + d];
                    double coef = tau / (cell * h);
                    for (int c2 = 0; c2 < m; ++c2) {
                        double aface = 0.5 * (Ai(c, c2) + An(c, c2));
                        trip.emplace_back(row, nb * m + c2, -coef * aface);
                        trip.emplace_back(row, i * m + c2, coef * aface);
                    }
                }
            }

            if (implicit_f) {
                rhs[row] += tau * f0[c];
                for (int c2 = 0; c2 < m; ++c2)
                    for (int d = 0; d < dim; ++d) {
                        double fpq = fp(c, c2 * dim + d);
                        if (fpq == 0.0) continue;
                        gradient_stencil(g, i, d, [&](int node2, double coeff) {
                            trip.emplace_back(row, node2 * m + c2, -tau * fpq * coeff);
                        });
                    }
            } else {
                rhs[row] += tau * fval[c];
            }

            if (source) rhs[row] += tau * src_field.at(i, c);
        }
    }

    StepSystem sys;
    sys.M.resize(n * m, n * m);
    sys.M.setFromTriplets(trip.begin(), trip.end());
    sys.rhs = std::move(rhs);
    return sys;
}

Eigen::VectorXd solve_system(const StepSystem& sys, double tol) {
    if (!sys.rhs.allFinite()) throw Error("blow-up-suspected", "nonfinite right-hand side");
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.M);
    if (lu.info() != Eigen::Success)
        throw Error("blow-up-suspected", "sparse factorization failed");
    Eigen::VectorXd x = lu.solve(sys.rhs);
    if (!x.allFinite()) throw Error("blow-up-suspected", "NaN in linear solve result");
    double resid = (sys.M * x - sys.rhs).lpNorm<Eigen::Infinity>() /
                   (1.0 + sys.rhs.lpNorm<Eigen::Infinity>());
    if (resid > tol)
        throw Error("solver-failed", "linear solve residual " + std::to_string(resid) +
                                         " above tolerance " + std::to_string(tol));
    return x;
}

GridFunction from_vector(const Grid& g, int m, const Eigen::VectorXd& x) {
    GridFunction f(g, m);
    for (int i = 0; i < g.nodes(); ++i)
        for (int c = 0; c < m; ++c) f.at(i, c) = x[i * m + c];
    return f;
}

} // namespace

GridFunction linear_step(const ModelSpec& model, const Trajectory& u_prev_traj,
                         const GridFunction& u_now, int j, const SchemeConfig& config,
                         const SourceFn& source) {
    if (j + 1 >= u_prev_traj.steps())
        throw Error("bad-argument", "previous trajectory does not cover step " + std::to_string(j + 1));
    const GridFunction& w = u_prev_traj.at(j + 1);
    double t_next = u_prev_traj.times[j + 1];

    bool implicit_f =
        config.f_gradient_mode == FGradientMode::Implicit && f_affine_in_p(model, u_now.grid.dim);

    if (implicit_f) {
        auto sys = assemble_step(model, w, u_now, true, nullptr, config, t_next, source);
        return from_vector(u_now.grid, model.m, solve_system(sys, config.linear_solver_tol));
    }
    // lagged gradient with one fixed corrector pass
    auto sys = assemble_step(model, w, u_now, false, &u_now, config, t_next, source);
    GridFunction first = from_vector(u_now.grid, model.m, solve_system(sys, config.linear_solver_tol));
    auto sys2 = assemble_step(model, w, u_now, false, &first, config, t_next, source);
    return from_vector(u_now.grid, model.m, solve_system(sys2, config.linear_solver_tol));
}

Trajectory solve_linearized(const ModelSpec& model, const Trajectory& u_prev_traj,
                            const GridFunction& U0, const SchemeConfig& config,
                            const SourceFn& source) {
    config.validate();
    Trajectory tr;
    tr.grid = U0.grid;
    tr.m = U0.m;
    tr.tau = config.tau;
    int steps = static_cast<int>(std::ceil(config.T / config.tau - 1e-9));
    tr.times.resize(steps + 1);
    for (int j = 0; j <= steps; ++j) tr.times[j] = j * config.tau;
    tr.states.push_back(U0);
    for (int j = 0; j < steps; ++j) {
        try {
            tr.states.push_back(linear_step(model, u_prev_traj, tr.states.back(), j, config, source));
        } catch (const Error& e) {
            if (e.code() == "blow-up-suspected") {
                tr.truncated = true;
                tr.fail_index = j + 1;
                tr.times.resize(tr.states.size());
                return tr;
            }
            throw Error(e.code(), std::string(e.what()) + " at time step " + std::to_string(j + 1));
        }
    }
    return tr;
}

namespace {

double grad_power_integral(const GridFunction& state, double two_p) {
    GridFunction Du = gradient(state);
    const Grid& g = state.grid;
    double s = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        double d2 = 0.0;
        for (int c = 0; c < Du.m; ++c) d2 += Du.at(i, c) * Du.at(i, c);
        s += g.node_weight(i) * std::pow(std::sqrt(d2), two_p);
    }
    return s;
}

double time_weight(const Trajectory& tr, int j) {
    return (j == 0 || j == tr.steps() - 1) ? 0.5 * tr.tau : tr.tau;
}

} // namespace

EnergyRecord energy_diagnostics(const ModelSpec& model, const Trajectory& u_prev_traj,
                                const Trajectory& u_traj, double p, int center, double rho,
                                double R) {
    if (!(rho < R)) throw Error("bad-annulus", "need rho < R");
    const Grid& g = u_traj.grid;
    Region Rrho = region_nodes(g, center, rho);
    Region RR = region_nodes(g, center, R);

    EnergyRecord rec;
    rec.p = p;
    rec.rho = rho;
    rec.R = R;

    Vec uv(model.m);
    int slices = std::min(u_traj.steps(), u_prev_traj.steps());
    for (int j = 0; j < slices; ++j) {
        const GridFunction& cur = u_traj.at(j);
        const GridFunction& prev = u_prev_traj.at(j);
        GridFunction Du = gradient(cur);
        GridFunction D2u = second_derivatives(cur);
        double wt = time_weight(u_traj, j);

        double local_2p = 0.0;
        for (int i : Rrho.nodes) {
            double d2 = 0.0;
            for (int c = 0; c < Du.m; ++c) d2 += Du.at(i, c) * Du.at(i, c);
            local_2p += g.node_weight(i) * std::pow(std::sqrt(d2), 2.0 * p);
        }
        rec.lhs_sup = std::max(rec.lhs_sup, local_2p);

        auto lam_at = [&](const GridFunction& field, int i) {
            for (int c = 0; c < model.m; ++c) uv[c] = field.at(i, c);
            return model.lambda_lo(uv);
        };
        auto phi2_at = [&](const GridFunction& field, int i) {
            for (int c = 0; c < model.m; ++c) uv[c] = field.at(i, c);
            double ph = model.phi(uv);
            return ph * ph;
        };

        for (int i : Rrho.nodes) {
            double gd = node_norm(Du, i);
            double hd = node_norm(D2u, i);
            rec.lhs_h += wt * g.node_weight(i) * lam_at(prev, i) *
                         std::pow(gd, 2.0 * p - 2.0) * hd * hd;
        }
        for (int i : RR.nodes) {
            double gd = node_norm(Du, i);
            double hd = node_norm(D2u, i);
            double lam = lam_at(prev, i);
            rec.rhs_pair += wt * g.node_weight(i) *
                            (lam * std::pow(gd, 2.0 * p - 2.0) * hd * hd +
                             phi2_at(prev, i) * std::pow(gd, 2.0 * p + 2.0));
            rec.g_term += wt * g.node_weight(i) * lam * std::pow(gd, 2.0 * p);
        }
    }

    double denom = rec.rhs_pair + std::pow(R - rho, -2.0) * rec.g_term;
    rec.c1_ratio = denom > 0.0 ? (rec.lhs_sup + rec.lhs_h) / denom : 0.0;
    return rec;
}

BlowupReport blowup_monitor(const Trajectory& u_traj, int n, double exponent_threshold,
                            double ceiling) {
    BlowupReport rep;
    for (int j = 0; j < u_traj.steps(); ++j) {
        double v = u_traj.at(j).all_finite() ? sobolev_norm(u_traj.at(j), n)
                                             : std::numeric_limits<double>::quiet_NaN();
        rep.w1n.push_back(v);
        if (!std::isfinite(v) || v > ceiling) rep.flag = true;
    }
    if (u_traj.truncated) rep.flag = true;

    int total = static_cast<int>(rep.w1n.size());
    int q = std::max(2, total / 4);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int j = total - q; j < total; ++j) {
        if (j < 0) continue;
        double t = u_traj.times[j];
        double v = rep.w1n[j];
        if (!(t > 0.0) || !(v > 0.0) || !std::isfinite(v)) continue;
        double x = std::log(t), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    if (cnt >= 2) {
        double det = cnt * sxx - sx * sx;
        if (std::abs(det) > 1e-300) {
            rep.fitted_exponent = (cnt * sxy - sx * sy) / det;
            if (rep.fitted_exponent > exponent_threshold) rep.flag = true;
        }
    }
    return rep;
}

IterateResult iterate(const ModelSpec& model, const GridFunction& U0, const Trajectory* u0_init,
                      const SchemeConfig& config) {
    config.validate();
    const Grid& g = U0.grid;
    if (static_cast<int>(g.bc.size()) != model.m)
        throw Error("bad-grid", "grid boundary conditions must match the system size");

    IterateResult result;
    Trajectory prev = u0_init ? *u0_init : Trajectory::constant_in_time(U0, config.T, config.tau);

    double p = resolve_p_energy(model, g.dim, config);
    int stride = std::max(1, g.nodes() / std::max(1, config.diag_max_centers));
    BallFamily family = BallFamily::dyadic(g, stride);

    double ext_min = g.extents[0];
    if (g.dim == 2) ext_min = std::min(ext_min, g.extents[1]);
    int center = g.dim == 2 ? g.index(g.shape[0] / 2, g.shape[1] / 2) : g.shape[0] / 2;
    double rho = config.energy_rho_frac * ext_min;
    double R = config.energy_R_frac * ext_min;

    double running_ct = 0.0;
    result.status = IterateStatus::MaxIterations;

    for (int k = 1; k <= config.K_max; ++k) {
        Trajectory traj = solve_linearized(model, prev, U0, config);

        DiagnosticsReport rep;
        rep.k = k;
        int slices = traj.steps();
        for (int j = 0; j < slices; ++j) {
            const GridFunction& state = traj.at(j);
            SliceDiagnostics sd;
            sd.t = traj.times[j];
            sd.flag = !state.all_finite();
            if (!sd.flag) {
                sd.bmo_norm = bmo_norm(state, family);
                auto profile = local_bmo_profile(state, config.bmo_eps, family);
                double rmin = std::numeric_limits<double>::infinity();
                for (const auto& [node, r] : profile) rmin = std::min(rmin, r);
                sd.local_bmo_R = rmin;
                int jp = std::min(j, prev.steps() - 1);
                sd.uf_ratio = uf_ratio(model, state, prev.at(jp));
                sd.w1n_norm = sobolev_norm(state, g.dim);
                sd.energy_2p = grad_power_integral(state, 2.0 * p);

                GridFunction D2u = second_derivatives(state);
                GridFunction Du = gradient(state);
                Vec uv(model.m);
                double slice_hh = 0.0;
                for (int i = 0; i < g.nodes(); ++i) {
                    for (int c = 0; c < model.m; ++c) uv[c] = prev.at(jp).at(i, c);
                    double gd = node_norm(Du, i);
                    double hd = node_norm(D2u, i);
                    slice_hh += g.node_weight(i) * model.lambda_lo(uv) *
                                std::pow(gd, 2.0 * p - 2.0) * hd * hd;
                }
                rep.hh_energy += time_weight(traj, j) * slice_hh;
                rep.bmo_sup = std::max(rep.bmo_sup, sd.bmo_norm);
                rep.uf_ratio_max = std::max(rep.uf_ratio_max, sd.uf_ratio);
            }
            rep.slices.push_back(sd);
        }

        double inc = 0.0;
        int overlap = std::min(slices, prev.steps());
        for (int j = 0; j < overlap; ++j) {
            const GridFunction& a = traj.at(j);
            const GridFunction& b = prev.at(j);
            for (size_t v = 0; v < a.values.size(); ++v)
                inc = std::max(inc, std::abs(a.values[v] - b.values[v]));
        }
        rep.increment_sup = inc;

        running_ct = std::max(running_ct, rep.bmo_sup);
        rep.running_CT = running_ct;

        if (!traj.truncated)
            rep.energy = energy_diagnostics(model, prev, traj, p, center, rho, R);

        BlowupReport monitor =
            blowup_monitor(traj, g.dim, config.blowup_exponent, config.blowup_ceiling);
        rep.blowup_flag = traj.truncated || monitor.flag;

        result.reports.push_back(rep);
        result.trajectory = traj;

        if (traj.truncated) {
            result.status = IterateStatus::Diverged;
            break;
        }
        if (inc < config.tol_c0) {
            result.status = IterateStatus::Converged;
            break;
        }
        prev = std::move(traj);
    }
    return result;
}

double discrete_residual(const ModelSpec& model, const Trajectory& traj,
                         const SchemeConfig& config, const SourceFn& source) {
    double worst = 0.0;
    for (int j = 0; j + 1 < traj.steps(); ++j) {
        const GridFunction& next = traj.at(j + 1);
        bool implicit_f = config.f_gradient_mode == FGradientMode::Implicit &&
                          f_affine_in_p(model, traj.grid.dim);
        auto sys = assemble_step(model, next, traj.at(j), implicit_f, &next, config,
                                 traj.times[j + 1], source);
        Eigen::VectorXd x(traj.grid.nodes() * model.m);
        for (int i = 0; i < traj.grid.nodes(); ++i)
            for (int c = 0; c < model.m; ++c) x[i * model.m + c] = next.at(i, c);
        double r = (sys.M * x - sys.rhs).lpNorm<Eigen::Infinity>() / config.tau;
        worst = std::max(worst, r);
    }
    return worst;
}

} // namespace clab
