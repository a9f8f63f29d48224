#ifndef FSDE_MODEL_HPP
#define FSDE_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fsde/constraint.hpp"
#include "fsde/grid.hpp"

namespace fsde {

/// Dimensionless numbers and boundary data of the clamped fiber.
struct ModelParams {
    double alpha = 0.4;   // bending number
    double froude = 3.0;  // Froude number
    double drag_nr = 0.1; // drag number
    double beta = 1e-4;   // turbulent fluctuation number
    VectorXd e_g;         // gravity direction, unit
    VectorXd r_hat;       // clamp position
    VectorXd tau_hat;     // clamp tangent, unit

    void validate(int dim) const;
};

/// Mean flow field u(x, t). `jacobian` returns du/dx, used by the implicit
/// scheme's Newton matrix; both closures must be side-effect-free.
struct FlowField {
    std::function<VectorXd(const VectorXd&, double)> eval;
    std::function<MatrixXd(const VectorXd&, double)> jacobian;

    static FlowField zero(int dim);
    /// Stationary rotational field u(x) = x2 e1 - x1 e2 (2D).
    static FlowField rotational();
};

/// Linear drag operators C(pos, tangent, t) and D(pos, vel, tangent, t).
struct DragModel {
    std::function<MatrixXd(const VectorXd&, const VectorXd&, double)> C;
    std::function<MatrixXd(const VectorXd&, const VectorXd&, const VectorXd&, double)> D;

    static DragModel identity(int dim);
};

/// Complete model: geometry, parameters, flow, drag. Immutable after
/// construction; shareable across concurrent trajectory workers.
struct FiberModel {
    Grid grid;
    ModelParams params;
    FlowField flow;
    DragModel drag;

    /// Fixed clamped ghost x_0 = r_hat + ds tau_hat / 2.
    VectorXd clamp_ghost() const { return params.r_hat + 0.5 * grid.delta_s * params.tau_hat; }

    /// Reference setup: clamped at the origin, hanging straight along
    /// gravity, rotational flow, identity drags.
    static FiberModel reference(int N, double beta);
};

/// Positions and velocities with the four ghost blocks, index range -1..N+2.
struct ExtendedConfig {
    MatrixXd x; // dim x (N+4), column j+1 holds block j
    MatrixXd y;

    MatrixXd::ColXpr pos(int i) { return x.col(i + 1); }
    MatrixXd::ColXpr vel(int i) { return y.col(i + 1); }
    MatrixXd::ConstColXpr pos(int i) const { return x.col(i + 1); }
    MatrixXd::ConstColXpr vel(int i) const { return y.col(i + 1); }
};

/// Block-diagonal diffusion coefficient, one d x d block per node.
struct DiffusionMatrix {
    std::vector<MatrixXd> blocks;

    VectorXd apply(const VectorXd& dw) const;
    MatrixXd dense() const;
};

/// Ghost closure: clamped end x_-1, x_0 from (r_hat, tau_hat) with zero
/// velocities; free end by linear/quadratic extrapolation of the two
/// stress-free stencil relations, velocities by their time derivative.
ExtendedConfig extend_with_ghosts(const FiberModel& model, const VectorXd& r, const VectorXd& v);

/// Drift a(t, r, v): bending, gravity and mean-drag terms on the staggered
/// midpoint stencils.
VectorXd drift(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v);

/// Diffusion B(t, r, v); the 1/sqrt(ds) factor carries the white-noise
/// scaling of the per-cell Wiener processes.
DiffusionMatrix diffusion(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v);

/// Derivatives of the drift w.r.t. positions and velocities, with the drag
/// operators frozen at the evaluation point (exact for constant C, D).
void drift_jacobian(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v,
                    MatrixXd& d_dr, MatrixXd& d_dv);

/// Discrete Lagrange multiplier estimate: solves
///   G dmu = -[(grad g)^T (a dt + B dw) + D^2 g(v,v) dt]
/// and returns dmu / dt.
EdgeVector multiplier_rate(const FiberModel& model, double t, const VectorXd& r,
                           const VectorXd& v, const VectorXd& dw, double dt);

/// Drift of the explicit (multiplier-eliminated) formulation:
///   P(r) a(t,r,v) - grad g G^-1 D^2 g(v,v).
VectorXd explicit_drift(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v);

/// One-sided linear growth inequality of the explicit drift on the manifold:
///   <(r,v), (v, explicit_drift)> <= C_T (1 + |(r,v)|^2).
bool one_sided_growth_check(const FiberModel& model, double t, const VectorXd& r,
                            const VectorXd& v, double C_T);

/// Straight fiber along tau_hat from the clamp, zero velocity; lies on the
/// manifold exactly.
FiberState initial_straight_state(const FiberModel& model);

} // namespace fsde

#endif
