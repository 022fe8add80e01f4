#ifndef CLAB_ANALYSIS_HPP
#define CLAB_ANALYSIS_HPP

#include <utility>
#include <vector>

#include "clab/grid.hpp"
#include "clab/model.hpp"

namespace clab {

// Discrete stand-in for "sup over all x0 in Omega, R > 0": a finite set of
// center nodes crossed with an increasing radius list.
struct BallFamily {
    std::vector<int> centers;
    std::vector<double> radii;

    // All nodes (strided) x dyadic radii from half the min spacing up to the
    // domain diameter. The sub-spacing radius keeps single-node regions in
    // every scan, so suprema see arbitrarily small balls.
    static BallFamily dyadic(const Grid& g, int center_stride = 1);
    static BallFamily with_radii(const Grid& g, std::vector<double> radii, int center_stride = 1);

    void validate() const;
};

// Mean oscillation of u over one region: mean_w |u - mean_w(u)| with the
// Euclidean norm on components.
double mean_oscillation(const GridFunction& u, int center, double radius);

double bmo_seminorm(const GridFunction& u, const BallFamily& family);
double bmo_norm(const GridFunction& u, const BallFamily& family);

// For each family center, the largest family radius R such that every family
// ball contained in B_R(center) has mean oscillation below eps (0 if none).
std::vector<std::pair<int, double>> local_bmo_profile(const GridFunction& u, double eps,
                                                      const BallFamily& family);

// Seminorm restricted to B_R(center): sup over family balls inside it.
double bmo_seminorm_restricted(const GridFunction& u, int center, double R,
                               const BallFamily& family);

double campanato_seminorm(const GridFunction& u, double p, double gamma,
                          const BallFamily& family);

double ap_constant(const GridFunction& w, double gamma, const BallFamily& family);

// ([w^delta]_gamma, [w]_gamma^delta); the first never exceeds the second.
std::pair<double, double> weight_power_check(const GridFunction& w, double delta, double gamma,
                                             const BallFamily& family);

GridFunction maximal_function(const GridFunction& F, const BallFamily& family);

double hardy_littlewood_ratio(const GridFunction& F, double q, const BallFamily& family);

struct GNTerms {
    double I1 = 0.0;    // int Phi^2(u) |DU|^{2p+2}
    double I1hat = 0.0; // int Phi^2(u) |Du|^{2p+2}
    double I2 = 0.0;    // int Phi0^2(u) |DU|^{2p-2} |D^2U|^2
    double p = 1.0;
};

GNTerms gn_terms(const GridFunction& u, const GridFunction& U, const ModelSpec& model, double p,
                 const Region* region = nullptr);

// I1 / (||U||_BMO [k1 (I1 + I1hat) + k2 sqrt(I1 I2)]), the empirical lower
// witness of the constant in the global weighted Gagliardo-Nirenberg bound.
double gn_global_ratio(const GridFunction& u, const GridFunction& U, const ModelSpec& model,
                       double p, const BallFamily& family);

struct GNLocalTerms {
    double I1_s = 0.0;
    double I1_t = 0.0;
    double I1hat_t = 0.0;
    double I2_t = 0.0;
    double cutoff_term = 0.0; // sup|Dpsi|^2 * int_{B_t} Phi^2 |DU|^{2p}
    double bmo_U_t = 0.0;     // BMO norm of U restricted to B_t
};

// Concentric annulus terms with the piecewise-linear radial cutoff; a zero
// cutoff_slope requests the canonical 1/(t-s).
GNLocalTerms gn_local_terms(const GridFunction& u, const GridFunction& U, const ModelSpec& model,
                            double p, int center, double s, double t, double cutoff_slope = 0.0);

struct IterationBound {
    double c = 0.0;
    double bound = 0.0;
};

// Hole-filling constant: c = min over a 1024-point nu-grid in (eps^{1/alpha},1)
// of (1-nu)^{-alpha} (1 - nu^{-alpha} eps)^{-1}; eps = 0 gives c = 1 exactly.
IterationBound iteration_bound(double alpha, double eps, double g_R, double h_R, double rho,
                               double R);

double lp_norm(const GridFunction& u, double p);
double sobolev_norm(const GridFunction& u, double p);

} // namespace clab

#endif
