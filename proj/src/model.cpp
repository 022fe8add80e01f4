#include "clab/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "clab/analysis.hpp"
#include "clab/error.hpp"

namespace clab {

double ModelSpec::phi0(const Vec& u) const {
    if (phi0_override) return phi0_override(u);
    return std::sqrt(lambda_lo(u));
}

double ModelSpec::phi(const Vec& u) const {
    if (phi_override) return phi_override(u);
    return a_u_frobenius(u) / std::sqrt(lambda_lo(u));
}

double ModelSpec::a_u_frobenius(const Vec& u) const {
    if (A_u_norm) return A_u_norm(u);
    auto stack = [&](const Vec& v) -> Mat {
        if (A) return A(v);
        auto per_axis = A_axis(v, 2);
        Mat s(per_axis[0].rows() * 2, per_axis[0].cols());
        s << per_axis[0], per_axis[1];
        return s;
    };
    double h = 1e-5 * (1.0 + u.norm());
    double sum2 = 0.0;
    for (int j = 0; j < m; ++j) {
        Vec up = u, dn = u;
        up[j] += h;
        dn[j] -= h;
        Mat d = (stack(up) - stack(dn)) / (2.0 * h);
        sum2 += d.squaredNorm();
    }
    return std::sqrt(sum2);
}

Mat ModelSpec::a_for_axis(const Vec& u, int axis, int dim) const {
    if (A_axis) return A_axis(u, dim)[axis];
    return A(u);
}

ModelSpec heat_model() {
    ModelSpec s;
    s.m = 1;
    s.name = "heat";
    s.A = [](const Vec&) { return Mat::Identity(1, 1); };
    s.A_u_norm = [](const Vec&) { return 0.0; };
    s.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
    s.lambda_lo = [](const Vec&) { return 1.0; };
    s.lambda_hi = [](const Vec&) { return 1.0; };
    s.lambda0 = 1.0;
    s.b = 1.0;
    return s;
}

ModelSpec anisotropic_model(std::vector<double> diag) {
    ModelSpec s;
    s.m = 1;
    s.name = "anisotropic";
    double lo = *std::min_element(diag.begin(), diag.end());
    double hi = *std::max_element(diag.begin(), diag.end());
    if (!(lo > 0.0)) throw Error("invalid-structure", "anisotropic diffusivities must be positive");
    s.A_axis = [diag](const Vec&, int dim) {
        std::vector<Mat> per;
        for (int d = 0; d < dim; ++d) {
            Mat a(1, 1);
            a(0, 0) = diag[static_cast<size_t>(d) < diag.size() ? d : diag.size() - 1];
            per.push_back(a);
        }
        return per;
    };
    s.A = [diag](const Vec&) {
        Mat a(1, 1);
        a(0, 0) = diag[0];
        return a;
    };
    s.A_u_norm = [](const Vec&) { return 0.0; };
    s.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
    s.lambda_lo = [lo](const Vec&) { return lo; };
    s.lambda_hi = [hi](const Vec&) { return hi; };
    s.lambda0 = lo;
    s.b = 1.0;
    return s;
}

ModelSpec power_lambda_model(double k) {
    ModelSpec s;
    s.m = 1;
    s.name = "power_lambda";
    s.A = [k](const Vec& u) {
        Mat a(1, 1);
        a(0, 0) = std::pow(1.0 + std::abs(u[0]), k);
        return a;
    };
    s.A_u_norm = [k](const Vec& u) {
        return std::abs(k) * std::pow(1.0 + std::abs(u[0]), k - 1.0);
    };
    s.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
    s.lambda_lo = [k](const Vec& u) { return std::pow(1.0 + std::abs(u[0]), k); };
    s.lambda_hi = [k](const Vec& u) { return std::pow(1.0 + std::abs(u[0]), k); };
    s.lambda0 = 1.0;
    s.b = 1.0;
    return s;
}

namespace {

std::pair<double, double> sym_eig_2x2(const Mat& A) {
    double a = A(0, 0), c = A(1, 1);
    double b = 0.5 * (A(0, 1) + A(1, 0));
    double mean = 0.5 * (a + c);
    double r = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    return {mean - r, mean + r};
}

} // namespace

ModelSpec skt2_model(std::array<double, 2> d, std::array<std::array<double, 2>, 2> a,
                     std::array<double, 2> r, std::array<std::array<double, 2>, 2> c) {
    ModelSpec s;
    s.m = 2;
    s.name = "skt2";
    double floor = 0.25 * std::min(d[0], d[1]);
    // A = P_u for P_i(u) = u_i (d_i + sum_j a_ij u_j)
    s.A = [d, a](const Vec& u) {
        Mat A(2, 2);
        for (int i = 0; i < 2; ++i) {
            double lin = d[i] + a[i][0] * u[0] + a[i][1] * u[1];
            for (int j = 0; j < 2; ++j) A(i, j) = a[i][j] * u[i] + (i == j ? lin : 0.0);
        }
        return A;
    };
    auto Afn = s.A;
    s.lambda_lo = [Afn, floor](const Vec& u) {
        return std::max(floor, sym_eig_2x2(Afn(u)).first);
    };
    auto lo = s.lambda_lo;
    s.lambda_hi = [Afn, lo](const Vec& u) {
        return std::max(lo(u), sym_eig_2x2(Afn(u)).second);
    };
    s.lambda0 = floor;
    s.f = [r, c](const Vec& u, const Vec&) {
        Vec out(2);
        for (int i = 0; i < 2; ++i)
            out[i] = u[i] * (r[i] - c[i][0] * u[0] - c[i][1] * u[1]);
        return out;
    };
    s.b = 2.0;
    return s;
}

ModelSpec unit_phi_model(int m) {
    ModelSpec s;
    s.m = m;
    s.name = "unit";
    s.A = [m](const Vec&) { return Mat::Identity(m, m); };
    s.A_u_norm = [](const Vec&) { return 0.0; };
    s.f = [m](const Vec&, const Vec&) { return Vec::Zero(m); };
    s.lambda_lo = [](const Vec&) { return 1.0; };
    s.lambda_hi = [](const Vec&) { return 1.0; };
    s.lambda0 = 1.0;
    s.b = 1.0;
    s.phi_override = [](const Vec&) { return 1.0; };
    s.phi0_override = [](const Vec&) { return 1.0; };
    return s;
}

ModelSpec builtin(const std::string& name) {
    if (name == "heat") return heat_model();
    if (name == "anisotropic") return anisotropic_model({1.0, 0.5});
    if (name == "skt2") return skt2_model();
    if (name.rfind("power_lambda(", 0) == 0 && name.back() == ')') {
        std::string inner = name.substr(13, name.size() - 14);
        std::istringstream is(inner);
        double k;
        if (is >> k) return power_lambda_model(k);
    }
    throw Error("unknown-model", "no builtin model named '" + name + "'");
}

std::vector<Vec> sample_box(int m, double half_width, int n_latin, unsigned seed) {
    std::vector<Vec> pts;
    pts.push_back(Vec::Zero(m));
    for (int i = 0; i < m; ++i) {
        Vec e = Vec::Zero(m);
        e[i] = half_width;
        pts.push_back(e);
        pts.push_back(-e);
    }
    if (m <= 4) {
        for (int mask = 0; mask < (1 << m); ++mask) {
            Vec v(m);
            for (int i = 0; i < m; ++i) v[i] = (mask >> i & 1) ? half_width : -half_width;
            pts.push_back(v);
        }
    }
    std::mt19937 rng(seed);
    std::vector<std::vector<int>> perms(m);
    for (int i = 0; i < m; ++i) {
        perms[i].resize(n_latin);
        for (int j = 0; j < n_latin; ++j) perms[i][j] = j;
        std::shuffle(perms[i].begin(), perms[i].end(), rng);
    }
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    for (int j = 0; j < n_latin; ++j) {
        Vec v(m);
        for (int i = 0; i < m; ++i) {
            double t = (perms[i][j] + jitter(rng)) / n_latin;
            v[i] = half_width * (2.0 * t - 1.0);
        }
        pts.push_back(v);
    }
    return pts;
}

namespace {

std::vector<Vec> default_xi_samples(int len, unsigned seed = 7771) {
    std::vector<Vec> xs;
    for (int i = 0; i < len; ++i) {
        Vec e = Vec::Zero(len);
        e[i] = 1.0;
        xs.push_back(e);
    }
    for (int i = 0; i < len; ++i)
        for (int j = i + 1; j < len; ++j) {
            Vec v = Vec::Zero(len);
            v[i] = v[j] = 1.0 / std::sqrt(2.0);
            xs.push_back(v);
            v[j] = -v[j];
            xs.push_back(v);
        }
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 64; ++k) {
        Vec v(len);
        for (int i = 0; i < len; ++i) v[i] = nd(rng);
        double n = v.norm();
        if (n > 0) xs.push_back(v / n);
    }
    return xs;
}

} // namespace

ConditionReport check_uniform_ellipticity(const ModelSpec& model,
                                          const std::vector<Vec>& u_samples,
                                          const std::vector<Vec>& xi_samples, int dim) {
    ConditionReport rep;
    rep.id = "A1";
    rep.pass = true;
    int len = model.m * dim;
    std::vector<Vec> xis = xi_samples.empty() ? default_xi_samples(len) : xi_samples;

    double qmin = std::numeric_limits<double>::infinity();
    double qmax = -qmin;
    double ratio_c = 0.0; // sampled constant in Lambda <= C lambda
    for (const Vec& u : u_samples) {
        double lam = model.lambda_lo(u);
        double Lam = model.lambda_hi(u);
        ratio_c = std::max(ratio_c, Lam / lam);
        std::vector<Mat> blocks;
        for (int d = 0; d < dim; ++d) blocks.push_back(model.a_for_axis(u, d, dim));
        double tol = 1e-9 * (1.0 + std::abs(lam) + std::abs(Lam));
        for (const Vec& xi : xis) {
            double q = 0.0;
            for (int d = 0; d < dim; ++d)
                for (int c1 = 0; c1 < model.m; ++c1)
                    for (int c2 = 0; c2 < model.m; ++c2)
                        q += blocks[d](c1, c2) * xi[c1 * dim + d] * xi[c2 * dim + d];
            q /= xi.squaredNorm();
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
            if (q < lam - tol || q > Lam + tol) {
                rep.pass = false;
                rep.witnesses.push_back({u, xi, q,
                                         q < lam - tol ? "quotient below lambda" : "quotient above Lambda"});
            }
        }
    }
    rep.constants["quotient_min"] = qmin;
    rep.constants["quotient_max"] = qmax;
    rep.constants["ellipticity_C"] = ratio_c;
    return rep;
}

std::pair<double, double> structural_constants(const ModelSpec& model,
                                               const std::vector<Vec>& u_samples,
                                               double fd_step_scale) {
    double k1 = 0.0, k2 = 0.0;
    for (const Vec& u : u_samples) {
        double ph = model.phi(u);
        double ph0 = model.phi0(u);
        if (!(ph > 0.0) || !std::isfinite(ph))
            throw Error("invalid-structure", "Phi vanishes or is not finite at a sample");
        if (!(ph0 > 0.0) || !std::isfinite(ph0))
            throw Error("invalid-structure", "Phi0 vanishes or is not finite at a sample");
        double h = fd_step_scale * (1.0 + u.norm());
        double grad2 = 0.0;
        for (int j = 0; j < model.m; ++j) {
            Vec up = u, dn = u;
            up[j] += h;
            dn[j] -= h;
            double d = (model.phi(up) - model.phi(dn)) / (2.0 * h);
            grad2 += d * d;
        }
        k1 = std::max(k1, std::sqrt(grad2) / ph);
        k2 = std::max(k2, ph / ph0);
    }
    return {k1, k2};
}

ConditionReport check_weight_condition(const ModelSpec& model, const GridFunction& u_field,
                                       const BallFamily& family, double p) {
    ConditionReport rep;
    rep.id = "A3";
    const Grid& g = u_field.grid;

    bool all_zero = true;
    GridFunction w(g, 1), wp(g, 1);
    double exp_base = 2.0 / 3.0;
    double exp_p = 2.0 / (p + 2.0);
    for (int i = 0; i < g.nodes(); ++i) {
        Vec u(model.m);
        for (int c = 0; c < model.m; ++c) u[c] = u_field.at(i, c);
        double ph = model.phi(u);
        if (ph != 0.0) all_zero = false;
        w.at(i, 0) = std::pow(ph, exp_base);
        wp.at(i, 0) = std::pow(ph, exp_p);
    }
    if (all_zero) {
        rep.pass = true;
        rep.note = "Phi identically zero on the field (constant diffusion); weight condition vacuous";
        rep.constants["ap_43"] = 1.0;
        return rep;
    }

    rep.constants["ap_43"] = ap_constant(w, 4.0 / 3.0, family);
    rep.constants["bmo_u"] = bmo_norm(u_field, family);
    rep.constants["p"] = p;
    rep.constants["ap_p"] = ap_constant(wp, p / (p + 2.0) + 1.0, family);
    rep.pass = std::isfinite(rep.constants["ap_43"]) && std::isfinite(rep.constants["ap_p"]);
    if (!rep.pass)
        rep.witnesses.push_back({Vec::Zero(model.m), Vec(), rep.constants["ap_43"],
                                 "weight constant not finite"});
    return rep;
}

RatioReport ratio_report(const ModelSpec& model, int n, const std::vector<Vec>& u_samples) {
    RatioReport r;
    for (const Vec& u : u_samples) {
        double lam = model.lambda_lo(u), Lam = model.lambda_hi(u);
        if (Lam > 0.0) r.s = std::max(r.s, lam / Lam);
    }
    if (!(r.s > 0.0)) throw Error("invalid-structure", "sup lambda/Lambda is not positive");
    r.delta = (static_cast<double>(n - 2) / n) / r.s;
    r.pass = r.delta < 1.0 - 1e-12;
    return r;
}

AdmissibleP max_admissible_p(const ModelSpec& model, int n, const std::vector<Vec>& u_samples) {
    AdmissibleP out;
    double s = 0.0;
    for (const Vec& u : u_samples) {
        double lam = model.lambda_lo(u), Lam = model.lambda_hi(u);
        if (Lam > 0.0) s = std::max(s, lam / Lam);
    }
    if (s >= 1.0) {
        out.unbounded = true;
        out.p_max = std::numeric_limits<double>::infinity();
    } else {
        out.p_max = 1.0 / (1.0 - s);
    }
    for (int k = 1; k <= 64 && !out.chain_ok; ++k) {
        double lo = std::max(1.0, std::pow(0.5 * n, 1.0 / k));
        double hi = 1.0 + 2.0 / n;
        if (!out.unbounded) hi = std::min(hi, std::pow(out.p_max, 1.0 / k));
        if (!(lo < hi)) continue;
        double chi = 0.5 * (lo + hi);
        double pk = std::pow(chi, k);
        bool ok = chi > 1.0 && chi < 1.0 + 2.0 / n && 2.0 * pk > n + 1e-12 &&
                  (out.unbounded || pk < out.p_max);
        if (ok) {
            out.chain_ok = true;
            out.chi0 = chi;
            out.k = k;
        }
    }
    return out;
}

double hat_lambda(const ModelSpec& model, double alpha, const Vec& u) {
    double lam = model.lambda_lo(u), Lam = model.lambda_hi(u);
    double delta = (alpha / (2.0 + alpha)) * (Lam / lam);
    if (!(delta > 0.0) || delta >= 1.0)
        throw Error("alpha-inadmissible", "delta_alpha outside (0,1)");
    return (1.0 - delta * delta) * lam;
}

ConditionReport check_growth(const ModelSpec& model, const std::vector<Vec>& u_samples,
                             const std::vector<Vec>& p_samples) {
    ConditionReport rep;
    rep.id = "F";
    rep.pass = true;
    double c_growth = 0.0, c_dgrowth = 0.0;
    for (const Vec& u : u_samples) {
        double ub = std::pow(u.norm(), model.b);
        double ub1 = 1.0 + std::pow(u.norm(), model.b - 1.0);
        for (const Vec& p : p_samples) {
            Vec fv = model.f(u, p);
            if (!fv.allFinite()) {
                rep.pass = false;
                rep.witnesses.push_back({u, p, fv.norm(), "f not finite at sample"});
                continue;
            }
            c_growth = std::max(c_growth, fv.norm() / (p.norm() + ub + 1.0));

            double hu = 1e-5 * (1.0 + u.norm());
            double fu2 = 0.0;
            for (int j = 0; j < model.m; ++j) {
                Vec up = u, dn = u;
                up[j] += hu;
                dn[j] -= hu;
                fu2 += ((model.f(up, p) - model.f(dn, p)) / (2.0 * hu)).squaredNorm();
            }
            double hp = 1e-5 * (1.0 + p.norm());
            double fp2 = 0.0;
            for (int j = 0; j < p.size(); ++j) {
                Vec pp = p, pn = p;
                pp[j] += hp;
                pn[j] -= hp;
                fp2 += ((model.f(u, pp) - model.f(u, pn)) / (2.0 * hp)).squaredNorm();
            }
            c_dgrowth = std::max(c_dgrowth, std::max(std::sqrt(fp2), std::sqrt(fu2) / ub1));
        }
    }
    rep.constants["C_growth"] = c_growth;
    rep.constants["C_dgrowth"] = c_dgrowth;
    rep.constants["b"] = model.b;
    if (!std::isfinite(c_growth) || !std::isfinite(c_dgrowth)) rep.pass = false;
    return rep;
}

double uf_ratio(const ModelSpec& model, const GridFunction& u_new, const GridFunction& u_old) {
    if (!u_new.grid.same_layout(u_old.grid) || u_new.m != u_old.m)
        throw Error("bad-shape", "uf_ratio needs fields on one grid");
    auto branch = [](double a, double b) {
        if (a == b) return 1.0;
        return a / b;
    };
    double worst = 0.0;
    Vec un(model.m), uo(model.m);
    for (int i = 0; i < u_new.grid.nodes(); ++i) {
        for (int c = 0; c < model.m; ++c) {
            un[c] = u_new.at(i, c);
            uo[c] = u_old.at(i, c);
        }
        double phi_branch = branch(model.phi(un), model.phi(uo));
        double lam_branch = branch(model.lambda_lo(un), model.lambda_lo(uo));
        worst = std::max(worst, std::min(phi_branch, lam_branch));
    }
    return worst;
}

} // namespace clab
