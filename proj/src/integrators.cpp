#include "fsde/integrators.hpp"

#include <Eigen/LU>
#include <cmath>

namespace fsde {

namespace {

// Sum_k w_k D^2 g_k; the Hessians of the quadratic constraint are constant.
MatrixXd hess_weighted(const Grid& grid, const EdgeVector& w) {
    const int d = grid.dim;
    const double inv_ds2 = 1.0 / (grid.delta_s * grid.delta_s);
    MatrixXd H = MatrixXd::Zero(grid.state_size(), grid.state_size());
    for (int k = 1; k <= grid.N; ++k) {
        const double c = w[k - 1] * inv_ds2;
        H.block(d * (k - 1), d * (k - 1), d, d).diagonal().array() -= c;
        if (k > 1) {
            H.block(d * (k - 2), d * (k - 2), d, d).diagonal().array() -= c;
            H.block(d * (k - 2), d * (k - 1), d, d).diagonal().array() += c;
            H.block(d * (k - 1), d * (k - 2), d, d).diagonal().array() += c;
        }
    }
    return H;
}

// N x dN matrix with row k = (D^2 g_k v)^T, i.e. the r-derivative of
// (grad g(r))^T v. Shares the bidiagonal layout of the constraint gradient
// with velocity differences as segments (ghost velocity zero).
MatrixXd hess_rows(const Grid& grid, const VectorXd& v) {
    const VectorXd zero = VectorXd::Zero(grid.dim);
    return constraint_gradient(grid, zero, v).transpose();
}

struct NewtonProblem {
    std::function<VectorXd(const VectorXd&)> residual;
    std::function<MatrixXd(const VectorXd&)> jacobian;
};

std::pair<VectorXd, StepStats> newton_solve(const NewtonProblem& p, VectorXd z,
                                            const SolverOptions& opts, const char* what) {
    StepStats stats;
    std::vector<double>& history = stats.residual_history;
    VectorXd F = p.residual(z);
    double res = F.lpNorm<Eigen::Infinity>();
    history.push_back(res);
    while (res > opts.newton_tol) {
        if (stats.newton_iters >= opts.newton_max_iter)
            throw ConvergenceError(std::string(what) + ": Newton did not converge", history);
        const MatrixXd J = p.jacobian(z);
        const VectorXd dz = J.partialPivLu().solve(-F);
        // Armijo-Goldstein backtracking on the squared-residual merit.
        const double merit0 = 0.5 * F.squaredNorm();
        double s = 1.0;
        int bt = 0;
        VectorXd z_new, F_new;
        for (;;) {
            z_new = z + s * dz;
            F_new = p.residual(z_new);
            if (0.5 * F_new.squaredNorm() <= (1.0 - 2.0 * opts.armijo_c * s) * merit0) break;
            if (++bt > opts.armijo_max_backtracks)
                throw ConvergenceError(std::string(what) + ": line search failed", history);
            s *= opts.armijo_shrink;
        }
        z = std::move(z_new);
        F = std::move(F_new);
        res = F.lpNorm<Eigen::Infinity>();
        history.push_back(res);
        stats.newton_iters += 1;
        stats.backtracks += bt;
    }
    stats.final_residual = res;
    return {std::move(z), stats};
}

} // namespace

std::tuple<FiberState, MultiplierRecord, StepStats>
step_implicit(const FiberModel& model, const FiberState& state, double t, double dt,
              const VectorXd& dw, const SolverOptions& opts, const Guess& guess) {
    const Grid& grid = model.grid;
    const int n = grid.state_size();
    const int N = grid.N;
    const VectorXd r0 = model.clamp_ghost();
    const double t_new = t + dt;

    // Diffusion is the one explicit term: frozen at the old level.
    const VectorXd noise_kick = diffusion(model, t, state.r, state.v).apply(dw);

    // Unknowns z = (r', v', lambda, nu); residuals
    //   r' - r - dt (v' + grad g(r') nu)          = 0
    //   v' - v - dt a(t+dt, r', v') - B dw - dt grad g(r') lambda = 0
    //   g(r')                                     = 0
    //   (grad g(r'))^T v'                         = 0
    NewtonProblem p;
    p.residual = [&](const VectorXd& z) {
        const VectorXd r = z.segment(0, n);
        const VectorXd v = z.segment(n, n);
        const EdgeVector lambda = z.segment(2 * n, N);
        const EdgeVector nu = z.segment(2 * n + N, N);
        const MatrixXd grad = constraint_gradient(grid, r0, r);
        VectorXd F(2 * n + 2 * N);
        F.segment(0, n) = r - state.r - dt * (v + grad * nu);
        F.segment(n, n) =
            v - state.v - dt * drift(model, t_new, r, v) - noise_kick - dt * (grad * lambda);
        F.segment(2 * n, N) = constraint_eval(grid, r0, r);
        F.segment(2 * n + N, N) = grad.transpose() * v;
        return F;
    };
    p.jacobian = [&](const VectorXd& z) {
        const VectorXd r = z.segment(0, n);
        const VectorXd v = z.segment(n, n);
        const EdgeVector lambda = z.segment(2 * n, N);
        const EdgeVector nu = z.segment(2 * n + N, N);
        const MatrixXd grad = constraint_gradient(grid, r0, r);
        MatrixXd Ja_r, Ja_v;
        drift_jacobian(model, t_new, r, v, Ja_r, Ja_v);
        MatrixXd J = MatrixXd::Zero(2 * n + 2 * N, 2 * n + 2 * N);
        J.block(0, 0, n, n) = MatrixXd::Identity(n, n) - dt * hess_weighted(grid, nu);
        J.block(0, n, n, n) = -dt * MatrixXd::Identity(n, n);
        J.block(0, 2 * n + N, n, N) = -dt * grad;
        J.block(n, 0, n, n) = -dt * (Ja_r + hess_weighted(grid, lambda));
        J.block(n, n, n, n) = MatrixXd::Identity(n, n) - dt * Ja_v;
        J.block(n, 2 * n, n, N) = -dt * grad;
        J.block(2 * n, 0, N, n) = grad.transpose();
        J.block(2 * n + N, 0, N, n) = hess_rows(grid, v);
        J.block(2 * n + N, n, N, n) = grad.transpose();
        return J;
    };

    VectorXd z0(2 * n + 2 * N);
    z0 << guess.r, guess.v, guess.lambda, guess.nu;
    auto [z, stats] = newton_solve(p, std::move(z0), opts, "step_implicit");

    FiberState out{z.segment(0, n), z.segment(n, n)};
    MultiplierRecord mult{z.segment(2 * n, N), z.segment(2 * n + N, N)};
    return {std::move(out), std::move(mult), stats};
}

std::tuple<VectorXd, EdgeVector, StepStats>
project_position(const FiberModel& model, const VectorXd& r_hat, const SolverOptions& opts) {
    const Grid& grid = model.grid;
    const int n = grid.state_size();
    const int N = grid.N;
    const VectorXd r0 = model.clamp_ghost();

    NewtonProblem p;
    p.residual = [&](const VectorXd& z) {
        const VectorXd r = z.segment(0, n);
        const EdgeVector eta = z.segment(n, N);
        VectorXd F(n + N);
        F.segment(0, n) = r - r_hat - constraint_gradient(grid, r0, r) * eta;
        F.segment(n, N) = constraint_eval(grid, r0, r);
        return F;
    };
    p.jacobian = [&](const VectorXd& z) {
        const VectorXd r = z.segment(0, n);
        const EdgeVector eta = z.segment(n, N);
        const MatrixXd grad = constraint_gradient(grid, r0, r);
        MatrixXd J = MatrixXd::Zero(n + N, n + N);
        J.block(0, 0, n, n) = MatrixXd::Identity(n, n) - hess_weighted(grid, eta);
        J.block(0, n, n, N) = -grad;
        J.block(n, 0, N, n) = grad.transpose();
        return J;
    };

    VectorXd z0 = VectorXd::Zero(n + N);
    z0.segment(0, n) = r_hat;
    auto [z, stats] = newton_solve(p, std::move(z0), opts, "project_position");
    return {z.segment(0, n), z.segment(n, N), stats};
}

VectorXd project_velocity(const FiberModel& model, const VectorXd& r, const VectorXd& v_hat) {
    return tangent_project(model.grid, model.clamp_ghost(), r, v_hat);
}

std::tuple<FiberState, MultiplierRecord, StepStats>
step_explicit(const FiberModel& model, const FiberState& state, double t, double dt,
              const VectorXd& dw, const SolverOptions& opts, bool do_project) {
    const int N = model.grid.N;
    const VectorXd r_hat = state.r + dt * state.v;

    VectorXd r_new;
    EdgeVector eta = EdgeVector::Zero(N);
    StepStats stats;
    if (do_project) {
        std::tie(r_new, eta, stats) = project_position(model, r_hat, opts);
    } else {
        r_new = r_hat;
    }

    // Semi-implicit modification: drift terms use the new position.
    const VectorXd kick = diffusion(model, t, r_new, state.v).apply(dw);
    VectorXd v_new = state.v + dt * explicit_drift(model, t, r_new, state.v) +
                     project_velocity(model, r_new, kick);
    if (do_project) v_new = project_velocity(model, r_new, v_new);

    FiberState out{std::move(r_new), std::move(v_new)};
    MultiplierRecord mult{eta / dt, EdgeVector::Zero(N)};
    return {std::move(out), std::move(mult), stats};
}

Guess predictor_guess(Predictor variant, const FiberModel& model, const FiberState& state,
                      double t, double dt, const VectorXd& dw) {
    Guess g{state.r, state.v, EdgeVector::Zero(model.grid.N), EdgeVector::Zero(model.grid.N)};
    switch (variant) {
    case Predictor::V0:
        break;
    case Predictor::V1:
        g.lambda = multiplier_rate(model, t, state.r, state.v, dw, dt);
        g.r = state.r + dt * state.v;
        g.v = state.v + dt * drift(model, t, state.r, state.v) +
              diffusion(model, t, state.r, state.v).apply(dw);
        break;
    case Predictor::V2:
        g.lambda = multiplier_rate(model, t, state.r, state.v, dw, dt);
        break;
    }
    return g;
}

SimulateResult simulate(const FiberModel& model, Scheme scheme, double T, double dt,
                        const WienerIncrements& noise, int skip_n, Predictor variant,
                        const SolverOptions& opts, const StepCallback& callback) {
    if (skip_n < 1) throw std::invalid_argument("simulate: skip_n must be >= 1");
    if (std::abs(noise.dt - dt) > 1e-12 * std::max(1.0, dt))
        throw std::invalid_argument("simulate: noise.dt does not match dt");
    const int M = static_cast<int>(std::llround(T / dt));
    if (noise.steps < M) throw std::invalid_argument("simulate: noise table too short");
    if (noise.N != model.grid.N || noise.dim != model.grid.dim)
        throw std::invalid_argument("simulate: noise table shape mismatch");

    SimulateResult result;
    FiberState state = initial_straight_state(model);
    for (int step = 0; step < M; ++step) {
        const double t = step * dt;
        const VectorXd dw = noise.step(step);
        FiberState next;
        MultiplierRecord mult;
        StepStats stats;
        try {
            if (scheme == Scheme::Implicit) {
                const Guess guess = predictor_guess(variant, model, state, t, dt, dw);
                std::tie(next, mult, stats) = step_implicit(model, state, t, dt, dw, opts, guess);
            } else {
                const bool do_project = ((step + 1) % skip_n == 0);
                std::tie(next, mult, stats) = step_explicit(model, state, t, dt, dw, opts,
                                                            do_project);
                if (do_project) {
                    result.projection_newton_iters += stats.newton_iters;
                    result.projections += 1;
                }
            }
        } catch (ConvergenceError& e) {
            throw ConvergenceError("step " + std::to_string(step) + ": " + e.what(),
                                   e.residual_history);
        }
        state = std::move(next);
        result.total_newton_iters += stats.newton_iters;
        result.steps += 1;
        if (callback) callback(step, t + dt, state, mult, stats);
    }
    result.final_state = std::move(state);
    return result;
}

} // namespace fsde
