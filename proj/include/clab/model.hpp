#ifndef CLAB_MODEL_HPP
#define CLAB_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clab/grid.hpp"

namespace clab {

struct BallFamily; // analysis.hpp

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Coefficient bundle of the system u_t = div(A(u) Du) + f(u, Du).
//
// A(u) is the m x m diffusion matrix applied componentwise to gradients
// (block-diagonal action on Du). Models whose diffusion differs per axis
// supply A_axis instead; no builtin couples derivative directions across axes.
struct ModelSpec {
    int m = 1;
    std::string name;

    std::function<Mat(const Vec&)> A;                          // m x m
    std::function<std::vector<Mat>(const Vec&, int)> A_axis;   // optional, (u, dim) -> per-axis m x m
    std::function<double(const Vec&)> A_u_norm;                // optional analytic |A_u| (Frobenius)
    std::function<Vec(const Vec&, const Vec&)> f;              // f(u, p), p holds Du entries
    std::function<double(const Vec&)> lambda_lo;               // lambda(u)
    std::function<double(const Vec&)> lambda_hi;               // Lambda(u)
    double lambda0 = 1.0;
    double b = 1.0; // growth exponent of the nonlinearity

    std::function<double(const Vec&)> phi_override;  // set for GN test structures
    std::function<double(const Vec&)> phi0_override;

    double phi0(const Vec& u) const;     // lambda(u)^{1/2} unless overridden
    double phi(const Vec& u) const;      // |A_u(u)| / lambda(u)^{1/2} unless overridden
    double a_u_frobenius(const Vec& u) const;

    Mat a_for_axis(const Vec& u, int axis, int dim) const;
};

ModelSpec heat_model();
ModelSpec anisotropic_model(std::vector<double> diag);
ModelSpec power_lambda_model(double k);
ModelSpec skt2_model(std::array<double, 2> d = {1.0, 1.0},
                     std::array<std::array<double, 2>, 2> a = {{{1.0, 0.5}, {0.5, 1.0}}},
                     std::array<double, 2> r = {1.0, 1.0},
                     std::array<std::array<double, 2>, 2> c = {{{1.0, 0.5}, {0.5, 1.0}}});
// Phi = Phi0 = 1 structure on the identity diffusion, for inequality verification.
ModelSpec unit_phi_model(int m);

// Parses "heat", "anisotropic", "skt2", "power_lambda(<k>)".
ModelSpec builtin(const std::string& name);

// Deterministic sample cloud: origin, box corners, axis points, Latin hypercube fill.
std::vector<Vec> sample_box(int m, double half_width, int n_latin = 64, unsigned seed = 20240811);

struct Witness {
    Vec u;
    Vec aux;      // e.g. the xi direction, empty if none
    double value = 0.0;
    std::string note;
};

struct ConditionReport {
    std::string id; // A1 | A2 | A3 | R | F | UF | V
    bool pass = false;
    std::vector<Witness> witnesses; // violations; pass=false implies nonempty
    std::map<std::string, double> constants;
    std::string note;
};

ConditionReport check_uniform_ellipticity(const ModelSpec& model,
                                          const std::vector<Vec>& u_samples,
                                          const std::vector<Vec>& xi_samples,
                                          int dim = 2);

// Sampled suprema of |Phi_u|/Phi and Phi/Phi0 (A.2 constants k1, k2).
std::pair<double, double> structural_constants(const ModelSpec& model,
                                               const std::vector<Vec>& u_samples,
                                               double fd_step_scale = 1e-5);

ConditionReport check_weight_condition(const ModelSpec& model, const GridFunction& u_field,
                                       const BallFamily& family, double p = 1.0);

struct RatioReport {
    double s = 0.0;     // sup lambda/Lambda over samples
    double delta = 0.0; // solves (n-2)/n = delta * s
    bool pass = false;
};

RatioReport ratio_report(const ModelSpec& model, int n, const std::vector<Vec>& u_samples);

struct AdmissibleP {
    double p_max = 0.0; // strict upper bound; +inf when lambda == Lambda
    bool unbounded = false;
    bool chain_ok = false; // exists chi0, k with 1<chi0<1+2/n, chi0^k <= p_max, 2 chi0^k > n
    double chi0 = 0.0;
    int k = 0;
};

AdmissibleP max_admissible_p(const ModelSpec& model, int n, const std::vector<Vec>& u_samples);

double hat_lambda(const ModelSpec& model, double alpha, const Vec& u);

ConditionReport check_growth(const ModelSpec& model, const std::vector<Vec>& u_samples,
                             const std::vector<Vec>& p_samples);

// Smallest C(T) witnessing the UF alternative at one time slice.
double uf_ratio(const ModelSpec& model, const GridFunction& u_new, const GridFunction& u_old);

} // namespace clab

#endif
