#ifndef FSDE_INTEGRATORS_HPP
#define FSDE_INTEGRATORS_HPP

#include <functional>
#include <tuple>
#include <vector>

#include "fsde/model.hpp"
#include "fsde/noise.hpp"

namespace fsde {

struct SolverOptions {
    double newton_tol = 1e-10;     // residual inf-norm
    int newton_max_iter = 50;
    double armijo_c = 1e-4;
    double armijo_shrink = 0.5;
    int armijo_max_backtracks = 30;
};

struct StepStats {
    int newton_iters = 0;
    double final_residual = 0.0;
    int backtracks = 0;
    std::vector<double> residual_history; // inf-norm per iterate, initial first
};

/// Per-step multipliers: lambda is the constraint multiplier per unit time;
/// nu the Gear-Gupta-Leimkuhler multiplier (zero for the explicit scheme,
/// where lambda holds the projection parameter eta / dt, diagnostic only).
struct MultiplierRecord {
    EdgeVector lambda;
    EdgeVector nu;
};

enum class Scheme { Implicit, Explicit };
enum class Predictor { V0, V1, V2 };

/// Initial Newton iterate for the implicit step.
struct Guess {
    VectorXd r;
    VectorXd v;
    EdgeVector lambda;
    EdgeVector nu;
};

/// One step of the implicit Euler scheme with GGL stabilization. Solves the
/// coupled system for (r', v', lambda, nu) with the diffusion term frozen at
/// the old level; the returned state satisfies g(r') = 0 and the hidden
/// constraint to newton_tol.
std::tuple<FiberState, MultiplierRecord, StepStats>
step_implicit(const FiberModel& model, const FiberState& state, double t, double dt,
              const VectorXd& dw, const SolverOptions& opts, const Guess& guess);

/// One step of the explicit projection-based semi-implicit Euler scheme.
/// Position update first, optional projection onto the manifold, then the
/// velocity update with drift terms evaluated at the new position, optional
/// tangent projection.
std::tuple<FiberState, MultiplierRecord, StepStats>
step_explicit(const FiberModel& model, const FiberState& state, double t, double dt,
              const VectorXd& dw, const SolverOptions& opts, bool do_project);

/// Newton solve of r = r_hat + grad g(r) eta, g(r) = 0.
std::tuple<VectorXd, EdgeVector, StepStats>
project_position(const FiberModel& model, const VectorXd& r_hat, const SolverOptions& opts);

/// Orthogonal projection of v_hat onto the tangent space at r.
VectorXd project_velocity(const FiberModel& model, const VectorXd& r, const VectorXd& v_hat);

/// Newton initialization: V0 takes the old level with zero multipliers, V1 a
/// plain (unprojected, multiplier-free) Euler step plus the explicit lambda
/// estimate, V2 only the lambda estimate.
Guess predictor_guess(Predictor variant, const FiberModel& model, const FiberState& state,
                      double t, double dt, const VectorXd& dw);

/// Observes each accepted step; must not mutate anything the trajectory owns.
using StepCallback = std::function<void(int step, double t, const FiberState&,
                                        const MultiplierRecord&, const StepStats&)>;

struct SimulateResult {
    FiberState final_state;
    int steps = 0;
    long total_newton_iters = 0;
    long projection_newton_iters = 0; // explicit scheme, r-projection only
    int projections = 0;
};

/// Runs round(T / dt) steps consuming the increment table. For the explicit
/// scheme, projections run every skip_n-th step (skip_n = 1: always).
SimulateResult simulate(const FiberModel& model, Scheme scheme, double T, double dt,
                        const WienerIncrements& noise, int skip_n, Predictor variant,
                        const SolverOptions& opts, const StepCallback& callback = nullptr);

} // namespace fsde

#endif
