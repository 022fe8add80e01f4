#include "clab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clab/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace clab {

BallFamily BallFamily::dyadic(const Grid& g, int center_stride) {
    BallFamily fam;
    double h = g.min_spacing();
    double diam = g.diameter();
    double r = 0.5 * h;
    fam.radii.push_back(r);
    while (r < diam) {
        r *= 2.0;
        fam.radii.push_back(r);
    }
    for (int i = 0; i < g.nodes(); i += center_stride) fam.centers.push_back(i);
    return fam;
}

BallFamily BallFamily::with_radii(const Grid& g, std::vector<double> radii, int center_stride) {
    BallFamily fam;
    fam.radii = std::move(radii);
    for (int i = 0; i < g.nodes(); i += center_stride) fam.centers.push_back(i);
    fam.validate();
    return fam;
}

void BallFamily::validate() const {
    if (centers.empty()) throw Error("bad-family", "no centers");
    if (radii.empty()) throw Error("bad-family", "no radii");
    for (size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw Error("bad-family", "radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1]))
            throw Error("bad-family", "radii must be strictly increasing");
    }
}

namespace {

bool globally_constant(const GridFunction& u) {
    for (int c = 0; c < u.m; ++c) {
        double v0 = u.at(0, c);
        for (int i = 1; i < u.grid.nodes(); ++i)
            if (u.at(i, c) != v0) return false;
    }
    return true;
}

// Mean oscillation with the center value subtracted first; this keeps the
// computation bitwise translation-invariant for fields whose translated
// nodal values are exact.
double oscillation(const GridFunction& u, int center, double radius) {
    const Grid& g = u.grid;
    int m = u.m;
    double ref[8];
    std::vector<double> refbuf;
    double* rp = ref;
    if (m > 8) {
        refbuf.resize(m);
        rp = refbuf.data();
    }
    for (int c = 0; c < m; ++c) rp[c] = u.at(center, c);

    double wsum = 0.0;
    double acc[8];
    std::vector<double> accbuf;
    double* ap = acc;
    if (m > 8) {
        accbuf.assign(m, 0.0);
        ap = accbuf.data();
    } else {
        for (int c = 0; c < m; ++c) ap[c] = 0.0;
    }
    for_each_region_span(g, center, radius, [&](int b, int e) {
        for (int i = b; i < e; ++i) {
            double w = g.node_weight(i);
            wsum += w;
            for (int c = 0; c < m; ++c) ap[c] += w * (u.at(i, c) - rp[c]);
        }
    });
    if (wsum == 0.0) return 0.0;
    for (int c = 0; c < m; ++c) ap[c] /= wsum;

    double dev = 0.0;
    for_each_region_span(g, center, radius, [&](int b, int e) {
        for (int i = b; i < e; ++i) {
            double w = g.node_weight(i);
            double d2 = 0.0;
            for (int c = 0; c < m; ++c) {
                double d = u.at(i, c) - rp[c] - ap[c];
                d2 += d * d;
            }
            dev += w * std::sqrt(d2);
        }
    });
    return dev / wsum;
}

double node_distance(const Grid& g, int a, int b) {
    auto ca = g.coords(a), cb = g.coords(b);
    double dx = g.x(0, ca[0]) - g.x(0, cb[0]);
    double dy = g.dim == 2 ? g.x(1, ca[1]) - g.x(1, cb[1]) : 0.0;
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace

double mean_oscillation(const GridFunction& u, int center, double radius) {
    return oscillation(u, center, radius);
}

double bmo_seminorm(const GridFunction& u, const BallFamily& family) {
    family.validate();
    if (globally_constant(u)) return 0.0;
    double best = 0.0;
    const int nc = static_cast<int>(family.centers.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) reduction(max : best)
#endif
    for (int ci = 0; ci < nc; ++ci) {
        for (double r : family.radii)
            best = std::max(best, oscillation(u, family.centers[ci], r));
    }
    return best;
}

double bmo_norm(const GridFunction& u, const BallFamily& family) {
    double l1 = 0.0;
    for (int i = 0; i < u.grid.nodes(); ++i) {
        double d2 = 0.0;
        for (int c = 0; c < u.m; ++c) d2 += u.at(i, c) * u.at(i, c);
        l1 += u.grid.node_weight(i) * std::sqrt(d2);
    }
    return l1 + bmo_seminorm(u, family);
}

namespace {

// Per family center, the smallest radius whose oscillation reaches eps.
std::vector<std::pair<int, double>> violating_radii(const GridFunction& u, double eps,
                                                    const BallFamily& family) {
    const int nc = static_cast<int>(family.centers.size());
    std::vector<double> rmin(nc, -1.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
    for (int ci = 0; ci < nc; ++ci) {
        for (double r : family.radii) {
            if (oscillation(u, family.centers[ci], r) >= eps) {
                rmin[ci] = r;
                break;
            }
        }
    }
    std::vector<std::pair<int, double>> out;
    for (int ci = 0; ci < nc; ++ci)
        if (rmin[ci] >= 0.0) out.emplace_back(family.centers[ci], rmin[ci]);
    return out;
}

} // namespace

std::vector<std::pair<int, double>> local_bmo_profile(const GridFunction& u, double eps,
                                                      const BallFamily& family) {
    family.validate();
    if (!(eps > 0.0)) throw Error("bad-argument", "eps must be positive");
    auto viol = violating_radii(u, eps, family);
    double rmax = family.radii.back();

    std::vector<std::pair<int, double>> profile(family.centers.size());
    const int nc = static_cast<int>(family.centers.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ci = 0; ci < nc; ++ci) {
        int x = family.centers[ci];
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& [y, r] : viol)
            dmin = std::min(dmin, node_distance(u.grid, x, y) + r);
        double best = 0.0;
        if (viol.empty()) {
            best = rmax;
        } else {
            for (double r : family.radii)
                if (r < dmin) best = r;
        }
        profile[ci] = {x, best};
    }
    return profile;
}

double bmo_seminorm_restricted(const GridFunction& u, int center, double R,
                               const BallFamily& family) {
    double best = 0.0;
    for (int y : family.centers) {
        double d = node_distance(u.grid, y, center);
        if (d > R) continue;
        for (double r : family.radii) {
            if (d + r > R) break;
            best = std::max(best, oscillation(u, y, r));
        }
    }
    // the center's own balls always count
    for (double r : family.radii)
        if (r <= R) best = std::max(best, oscillation(u, center, r));
    return best;
}

double campanato_seminorm(const GridFunction& u, double p, double gamma,
                          const BallFamily& family) {
    family.validate();
    if (!(p >= 1.0) || !(gamma > 0.0)) throw Error("bad-argument", "need p >= 1 and gamma > 0");
    if (globally_constant(u)) return 0.0;
    const Grid& g = u.grid;
    int m = u.m;
    double best = 0.0;
    const int nc = static_cast<int>(family.centers.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) reduction(max : best)
#endif
    for (int ci = 0; ci < nc; ++ci) {
        int center = family.centers[ci];
        for (double rho : family.radii) {
            std::vector<double> mean(m, 0.0);
            double wsum = 0.0;
            for_each_region_span(g, center, rho, [&](int b, int e) {
                for (int i = b; i < e; ++i) {
                    double w = g.node_weight(i);
                    wsum += w;
                    for (int c = 0; c < m; ++c) mean[c] += w * u.at(i, c);
                }
            });
            if (wsum == 0.0) continue;
            for (double& v : mean) v /= wsum;
            double integral = 0.0;
            for_each_region_span(g, center, rho, [&](int b, int e) {
                for (int i = b; i < e; ++i) {
                    double d2 = 0.0;
                    for (int c = 0; c < m; ++c) {
                        double d = u.at(i, c) - mean[c];
                        d2 += d * d;
                    }
                    integral += g.node_weight(i) * std::pow(std::sqrt(d2), p);
                }
            });
            best = std::max(best, std::pow(rho, -gamma) * integral);
        }
    }
    return std::pow(best, 1.0 / p);
}

double ap_constant(const GridFunction& w, double gamma, const BallFamily& family) {
    family.validate();
    if (w.m != 1) throw Error("invalid-weight", "weight must be scalar");
    if (!(gamma > 1.0)) throw Error("bad-argument", "gamma must exceed 1");
    const Grid& g = w.grid;
    for (double v : w.values)
        if (!(v > 0.0) || !std::isfinite(v))
            throw Error("invalid-weight", "weight values must be positive and finite");
    if (globally_constant(w)) return 1.0;

    double dual_exp = -1.0 / (gamma - 1.0); // 1 - gamma'
    std::vector<double> dual(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) dual[i] = std::pow(w.values[i], dual_exp);

    double best = 1.0;
    const int nc = static_cast<int>(family.centers.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) reduction(max : best)
#endif
    for (int ci = 0; ci < nc; ++ci) {
        int center = family.centers[ci];
        for (double r : family.radii) {
            double wsum = 0.0, s1 = 0.0, s2 = 0.0;
            for_each_region_span(g, center, r, [&](int b, int e) {
                for (int i = b; i < e; ++i) {
                    double q = g.node_weight(i);
                    wsum += q;
                    s1 += q * w.values[i];
                    s2 += q * dual[i];
                }
            });
            if (wsum == 0.0) continue;
            best = std::max(best, (s1 / wsum) * std::pow(s2 / wsum, gamma - 1.0));
        }
    }
    return best;
}

std::pair<double, double> weight_power_check(const GridFunction& w, double delta, double gamma,
                                             const BallFamily& family) {
    if (!(delta > 0.0) || delta > 1.0) throw Error("bad-argument", "delta must lie in (0,1]");
    GridFunction wd = w;
    for (double& v : wd.values) v = std::pow(v, delta);
    double lhs = ap_constant(wd, gamma, family);
    double rhs = std::pow(ap_constant(w, gamma, family), delta);
    return {lhs, rhs};
}

GridFunction maximal_function(const GridFunction& F, const BallFamily& family) {
    family.validate();
    if (F.m != 1) throw Error("bad-shape", "maximal function takes a scalar field");
    const Grid& g = F.grid;
    const int n = g.nodes();

    std::vector<double> absF(n);
    for (int i = 0; i < n; ++i) absF[i] = std::abs(F.values[i]);

    // prefix sums over the flat index; spans never cross row boundaries
    std::vector<double> pf(n + 1, 0.0), pw(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        double q = g.node_weight(i);
        pf[i + 1] = pf[i] + q * absF[i];
        pw[i + 1] = pw[i] + q;
    }

    GridFunction out(g, 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (int x = 0; x < n; ++x) {
        double best = absF[x]; // epsilon -> 0 limit of ball means
        for (double r : family.radii) {
            double num = 0.0, den = 0.0;
            int count = 0, first = -1;
            for_each_region_span(g, x, r, [&](int b, int e) {
                num += pf[e] - pf[b];
                den += pw[e] - pw[b];
                count += e - b;
                if (first < 0) first = b;
            });
            if (count == 0) continue;
            double mean = (count == 1) ? absF[first] : num / den;
            best = std::max(best, mean);
        }
        out.values[x] = best;
    }
    return out;
}

double hardy_littlewood_ratio(const GridFunction& F, double q, const BallFamily& family) {
    if (!(q > 1.0)) throw Error("bad-argument", "q must exceed 1");
    const Grid& g = F.grid;
    double denom = 0.0;
    for (int i = 0; i < g.nodes(); ++i)
        denom += g.node_weight(i) * std::pow(std::abs(F.values[i]), q);
    if (denom == 0.0) throw Error("degenerate-input", "zero field in hardy_littlewood_ratio");
    GridFunction M = maximal_function(F, family);
    double num = 0.0;
    for (int i = 0; i < g.nodes(); ++i)
        num += g.node_weight(i) * std::pow(M.values[i], q);
    return num / denom;
}

namespace {

double frob(const GridFunction& f, int i, int c0, int k) {
    double s = 0.0;
    for (int c = c0; c < c0 + k; ++c) {
        double v = f.at(i, c);
        s += v * v;
    }
    return std::sqrt(s);
}

} // namespace

GNTerms gn_terms(const GridFunction& u, const GridFunction& U, const ModelSpec& model, double p,
                 const Region* region) {
    if (!u.grid.same_layout(U.grid)) throw Error("bad-shape", "u and U must share a grid");
    const Grid& g = U.grid;
    int dim = g.dim;
    GridFunction DU = gradient(U);
    GridFunction D2U = second_derivatives(U);
    GridFunction Du = gradient(u);

    GNTerms t;
    t.p = p;
    Vec uv(model.m);
    auto add_node = [&](int i) {
        for (int c = 0; c < model.m; ++c) uv[c] = u.at(i, c);
        double ph = model.phi(uv);
        double ph0 = model.phi0(uv);
        double w = g.node_weight(i);
        double gU = frob(DU, i, 0, U.m * dim);
        double gu = frob(Du, i, 0, u.m * dim);
        double hU = frob(D2U, i, 0, U.m * dim * dim);
        t.I1 += w * ph * ph * std::pow(gU, 2.0 * p + 2.0);
        t.I1hat += w * ph * ph * std::pow(gu, 2.0 * p + 2.0);
        t.I2 += w * ph0 * ph0 * std::pow(gU, 2.0 * p - 2.0) * hU * hU;
    };
    if (region) {
        for (int i : region->nodes) add_node(i);
    } else {
        for (int i = 0; i < g.nodes(); ++i) add_node(i);
    }
    return t;
}

double gn_global_ratio(const GridFunction& u, const GridFunction& U, const ModelSpec& model,
                       double p, const BallFamily& family) {
    GNTerms t = gn_terms(u, U, model, p);
    auto [k1, k2] = structural_constants(model, sample_box(model.m, 10.0));
    double bmoU = bmo_norm(U, family);
    double denom = bmoU * (k1 * (t.I1 + t.I1hat) + k2 * std::sqrt(t.I1 * t.I2));
    if (!(t.I1 > 0.0) || !(denom > 0.0))
        throw Error("degenerate-input", "vanishing gradient energy in gn_global_ratio");
    return t.I1 / denom;
}

GNLocalTerms gn_local_terms(const GridFunction& u, const GridFunction& U, const ModelSpec& model,
                            double p, int center, double s, double t, double cutoff_slope) {
    if (!(s < t)) throw Error("bad-annulus", "need s < t");
    const Grid& g = U.grid;
    double slope = cutoff_slope > 0.0 ? cutoff_slope : 1.0 / (t - s);
    if (slope * (t - s) < 1.0 - 1e-12)
        throw Error("bad-argument", "cutoff slope too shallow to reach 1 on B_s");

    Region Rs = region_nodes(g, center, s);
    Region Rt = region_nodes(g, center, t);

    GNLocalTerms out;
    GNTerms inner = gn_terms(u, U, model, p, &Rs);
    GNTerms outer = gn_terms(u, U, model, p, &Rt);
    out.I1_s = inner.I1;
    out.I1_t = outer.I1;
    out.I1hat_t = outer.I1hat;
    out.I2_t = outer.I2;

    GridFunction DU = gradient(U);
    Vec uv(model.m);
    double gradint = 0.0;
    for (int i : Rt.nodes) {
        for (int c = 0; c < model.m; ++c) uv[c] = u.at(i, c);
        double ph = model.phi(uv);
        double gU = frob(DU, i, 0, U.m * g.dim);
        gradint += g.node_weight(i) * ph * ph * std::pow(gU, 2.0 * p);
    }
    out.cutoff_term = slope * slope * gradint;

    // BMO norm of U on B_t: L1 over the region plus the restricted seminorm
    double l1 = 0.0;
    for (int i : Rt.nodes) {
        double d2 = 0.0;
        for (int c = 0; c < U.m; ++c) d2 += U.at(i, c) * U.at(i, c);
        l1 += g.node_weight(i) * std::sqrt(d2);
    }
    int stride = std::max<size_t>(1, Rt.nodes.size() / 256);
    BallFamily sub;
    for (size_t k = 0; k < Rt.nodes.size(); k += stride) sub.centers.push_back(Rt.nodes[k]);
    double h = g.min_spacing();
    for (double r = 0.5 * h; r < t; r *= 2.0) sub.radii.push_back(r);
    if (sub.radii.empty()) sub.radii.push_back(0.5 * h);
    out.bmo_U_t = l1 + bmo_seminorm_restricted(U, center, t, sub);
    return out;
}

IterationBound iteration_bound(double alpha, double eps, double g_R, double h_R, double rho,
                               double R) {
    if (!(alpha > 0.0)) throw Error("bad-argument", "alpha must be positive");
    if (!(g_R >= 0.0) || !(h_R >= 0.0)) throw Error("bad-argument", "g, h must be nonnegative");
    if (!(rho < R)) throw Error("bad-annulus", "need rho < R");
    if (eps < 0.0 || eps >= 1.0)
        throw Error("contraction-violated", "eps must lie in [0,1)");

    IterationBound out;
    if (eps == 0.0) {
        out.c = 1.0;
    } else {
        double lo = std::pow(eps, 1.0 / alpha);
        double best = std::numeric_limits<double>::infinity();
        const int grid_points = 1024;
        for (int i = 1; i <= grid_points; ++i) {
            double nu = lo + (1.0 - lo) * i / (grid_points + 1.0);
            double contraction = 1.0 - std::pow(nu, -alpha) * eps;
            if (!(contraction > 0.0)) continue;
            best = std::min(best, std::pow(1.0 - nu, -alpha) / contraction);
        }
        out.c = best;
    }
    out.bound = out.c * (std::pow(R - rho, -alpha) * g_R + h_R);
    return out;
}

double lp_norm(const GridFunction& u, double p) {
    const Grid& g = u.grid;
    double s = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        double d2 = 0.0;
        for (int c = 0; c < u.m; ++c) d2 += u.at(i, c) * u.at(i, c);
        s += g.node_weight(i) * std::pow(std::sqrt(d2), p);
    }
    return std::pow(s, 1.0 / p);
}

double sobolev_norm(const GridFunction& u, double p) {
    if (!(p >= 1.0)) throw Error("bad-argument", "p must be at least 1");
    return lp_norm(u, p) + lp_norm(gradient(u), p);
}

} // namespace clab
