#ifndef CLAB_SCHEME_HPP
#define CLAB_SCHEME_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clab/analysis.hpp"
#include "clab/grid.hpp"
#include "clab/model.hpp"

namespace clab {

enum class FGradientMode { Implicit, Lagged };

struct SchemeConfig {
    double T = 0.1;
    double tau = 0.005;
    int K_max = 20;
    double tol_c0 = 1e-6;   // outer sup-norm convergence tolerance over Q
    double bmo_eps = 0.1;   // epsilon for the small-BMO radius profile
    double p_energy = 0.0;  // 0 = derive from the admissible-exponent arithmetic
    double linear_solver_tol = 1e-10;
    FGradientMode f_gradient_mode = FGradientMode::Implicit;

    // diagnostics plumbing
    int diag_max_centers = 64;
    double blowup_exponent = 1.0;
    double blowup_ceiling = 1e6;
    double energy_rho_frac = 0.25; // of the smaller half-extent
    double energy_R_frac = 0.45;

    void validate() const;
};

// One outer iterate over Q = Omega x (0,T): states[j] = u(., j*tau).
struct Trajectory {
    Grid grid;
    int m = 1;
    double tau = 0.0;
    std::vector<double> times;
    std::vector<GridFunction> states;
    bool truncated = false; // blow-up: marching stopped before T
    int fail_index = -1;

    const GridFunction& at(int j) const { return states[j]; }
    int steps() const { return static_cast<int>(states.size()); }

    static Trajectory constant_in_time(const GridFunction& U0, double T, double tau);
};

struct SliceDiagnostics {
    double t = 0.0;
    double bmo_norm = 0.0;
    double local_bmo_R = 0.0; // min over centers of the largest small-BMO radius
    double uf_ratio = 0.0;    // vs the previous outer iterate at this slice
    double w1n_norm = 0.0;
    double energy_2p = 0.0;   // int |Du|^{2p} over Omega
    bool flag = false;        // nonfinite slice
};

struct EnergyRecord {
    double p = 1.0;
    double rho = 0.0, R = 0.0;
    double lhs_sup = 0.0;  // sup_t int_{B_rho} |Du_k|^{2p}
    double lhs_h = 0.0;    // int int_{Q_rho} lambda(u_{k-1}) |Du_k|^{2p-2} |D^2u_k|^2
    double rhs_pair = 0.0; // the two Q_R reference integrals for this iterate pair
    double g_term = 0.0;   // int int_{Q_R} lambda(u_{k-1}) |Du_k|^{2p}
    double c1_ratio = 0.0; // (lhs_sup + lhs_h) / (rhs_pair + (R-rho)^{-2} g)
};

struct DiagnosticsReport {
    int k = 0;
    std::vector<SliceDiagnostics> slices;
    double increment_sup = 0.0; // ||u_k - u_{k-1}||_{inf,Q}
    double bmo_sup = 0.0;       // max over slices
    double running_CT = 0.0;    // max of bmo_sup over iterates so far
    double uf_ratio_max = 0.0;
    double hh_energy = 0.0;     // time-integrated lambda |Du|^{2p-2}|D^2u|^2 over Q
    EnergyRecord energy;
    bool blowup_flag = false;
};

enum class IterateStatus { Converged, MaxIterations, Diverged };

std::string to_string(IterateStatus s);

struct IterateResult {
    Trajectory trajectory;
    std::vector<DiagnosticsReport> reports;
    IterateStatus status = IterateStatus::MaxIterations;
};

// Optional manufactured source g(t) added to the right-hand side.
using SourceFn = std::function<GridFunction(double)>;

// One implicit-Euler step of the linear system frozen at u_{k-1}(., t_{j+1}).
GridFunction linear_step(const ModelSpec& model, const Trajectory& u_prev_traj,
                         const GridFunction& u_now, int j, const SchemeConfig& config,
                         const SourceFn& source = nullptr);

Trajectory solve_linearized(const ModelSpec& model, const Trajectory& u_prev_traj,
                            const GridFunction& U0, const SchemeConfig& config,
                            const SourceFn& source = nullptr);

IterateResult iterate(const ModelSpec& model, const GridFunction& U0,
                      const Trajectory* u0_init, const SchemeConfig& config);

EnergyRecord energy_diagnostics(const ModelSpec& model, const Trajectory& u_prev_traj,
                                const Trajectory& u_traj, double p, int center, double rho,
                                double R);

struct BlowupReport {
    std::vector<double> w1n;
    bool flag = false;
    double fitted_exponent = 0.0;
};

BlowupReport blowup_monitor(const Trajectory& u_traj, int n, double exponent_threshold = 1.0,
                            double ceiling = 1e6);

// Sup-norm residual of the nonlinear discrete system (coefficients taken from
// the trajectory itself), in time-derivative units.
double discrete_residual(const ModelSpec& model, const Trajectory& traj,
                         const SchemeConfig& config, const SourceFn& source = nullptr);

// True when f(u, .) is affine in the gradient slots (probed at collinear points).
bool f_affine_in_p(const ModelSpec& model, int dim);

// Effective energy exponent: config value, or derived from max_admissible_p.
double resolve_p_energy(const ModelSpec& model, int dim, const SchemeConfig& config);

} // namespace clab

#endif
