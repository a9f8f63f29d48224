#include "fsde/model.hpp"

#include <cmath>

namespace fsde {

void ModelParams::validate(int dim) const {
    if (alpha <= 0.0) throw std::invalid_argument("ModelParams: alpha must be positive");
    if (froude <= 0.0) throw std::invalid_argument("ModelParams: froude must be positive");
    if (drag_nr <= 0.0) throw std::invalid_argument("ModelParams: drag_nr must be positive");
    if (beta < 0.0) throw std::invalid_argument("ModelParams: beta must be nonnegative");
    if (e_g.size() != dim || r_hat.size() != dim || tau_hat.size() != dim)
        throw std::invalid_argument("ModelParams: boundary data dimension mismatch");
    if (std::abs(e_g.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("ModelParams: e_g must be a unit vector");
    if (std::abs(tau_hat.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("ModelParams: tau_hat must be a unit vector");
}

FlowField FlowField::zero(int dim) {
    FlowField f;
    f.eval = [dim](const VectorXd&, double) { return VectorXd::Zero(dim).eval(); };
    f.jacobian = [dim](const VectorXd&, double) { return MatrixXd::Zero(dim, dim).eval(); };
    return f;
}

FlowField FlowField::rotational() {
    FlowField f;
    f.eval = [](const VectorXd& x, double) {
        VectorXd u(2);
        u << x[1], -x[0];
        return u;
    };
    f.jacobian = [](const VectorXd&, double) {
        MatrixXd J(2, 2);
        J << 0.0, 1.0, -1.0, 0.0;
        return J;
    };
    return f;
}

DragModel DragModel::identity(int dim) {
    DragModel d;
    d.C = [dim](const VectorXd&, const VectorXd&, double) {
        return MatrixXd::Identity(dim, dim).eval();
    };
    d.D = [dim](const VectorXd&, const VectorXd&, const VectorXd&, double) {
        return MatrixXd::Identity(dim, dim).eval();
    };
    return d;
}

FiberModel FiberModel::reference(int N, double beta) {
    FiberModel m;
    m.grid = Grid::clamped_free(N, 1.0, 2);
    m.params.alpha = 0.4;
    m.params.froude = 3.0;
    m.params.drag_nr = 0.1;
    m.params.beta = beta;
    m.params.e_g = -Eigen::Vector2d::UnitY();
    m.params.r_hat = Eigen::Vector2d::Zero();
    m.params.tau_hat = -Eigen::Vector2d::UnitY();
    m.params.validate(2);
    m.flow = FlowField::rotational();
    m.drag = DragModel::identity(2);
    return m;
}

VectorXd DiffusionMatrix::apply(const VectorXd& dw) const {
    const int d = blocks.empty() ? 0 : static_cast<int>(blocks[0].rows());
    VectorXd out(static_cast<int>(blocks.size()) * d);
    for (int i = 0; i < static_cast<int>(blocks.size()); ++i)
        out.segment(d * i, d) = blocks[i] * dw.segment(d * i, d);
    return out;
}

MatrixXd DiffusionMatrix::dense() const {
    const int d = blocks.empty() ? 0 : static_cast<int>(blocks[0].rows());
    const int n = static_cast<int>(blocks.size());
    MatrixXd M = MatrixXd::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) M.block(d * i, d * i, d, d) = blocks[i];
    return M;
}

ExtendedConfig extend_with_ghosts(const FiberModel& model, const VectorXd& r, const VectorXd& v) {
    const Grid& grid = model.grid;
    grid.check_state(r, "extend_with_ghosts r");
    grid.check_state(v, "extend_with_ghosts v");
    const int d = grid.dim;
    const int N = grid.N;
    ExtendedConfig ext;
    ext.x.resize(d, N + 4);
    ext.y.resize(d, N + 4);
    for (int i = 1; i <= N; ++i) {
        ext.pos(i) = grid.node(r, i);
        ext.vel(i) = grid.node(v, i);
    }
    // Clamp: x_-1 + x_0 = 2 r_hat, x_0 - x_-1 = ds tau_hat; stationary.
    ext.pos(-1) = model.params.r_hat - 0.5 * grid.delta_s * model.params.tau_hat;
    ext.pos(0) = model.params.r_hat + 0.5 * grid.delta_s * model.params.tau_hat;
    ext.vel(-1).setZero();
    ext.vel(0).setZero();
    // Stress-free end: unique solution of the two third/second difference
    // relations; velocities are the time derivatives of these closures.
    ext.pos(N + 1) = 2.0 * ext.pos(N) - ext.pos(N - 1);
    ext.pos(N + 2) = 3.0 * ext.pos(N) - 2.0 * ext.pos(N - 1);
    ext.vel(N + 1) = 2.0 * ext.vel(N) - ext.vel(N - 1);
    ext.vel(N + 2) = 3.0 * ext.vel(N) - 2.0 * ext.vel(N - 1);
    return ext;
}

namespace {

struct EdgeEval {
    VectorXd mid;
    VectorXd tang;
    VectorXd midv;
};

EdgeEval edge_eval(const ExtendedConfig& ext, double ds, int lo) {
    EdgeEval e;
    e.mid = 0.5 * (ext.pos(lo) + ext.pos(lo + 1));
    e.tang = (ext.pos(lo + 1) - ext.pos(lo)) / ds;
    e.midv = 0.5 * (ext.vel(lo) + ext.vel(lo + 1));
    return e;
}

// Dependence of an extended block index on the dynamic nodes; ghosts at the
// clamped end are constant, those at the free end are linear in x_{N-1}, x_N.
using Chain = std::vector<std::pair<int, double>>;

Chain ghost_chain(int j, int N) {
    if (j >= 1 && j <= N) return {{j, 1.0}};
    if (j == N + 1) return {{N, 2.0}, {N - 1, -1.0}};
    if (j == N + 2) return {{N, 3.0}, {N - 1, -2.0}};
    return {};
}

} // namespace

VectorXd drift(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v) {
    const Grid& grid = model.grid;
    const int d = grid.dim;
    const int N = grid.N;
    const double ds = grid.delta_s;
    const ExtendedConfig ext = extend_with_ghosts(model, r, v);

    const double bend = 1.0 / (model.params.alpha * model.params.alpha * std::pow(ds, 4));
    const double grav = 1.0 / (model.params.froude * model.params.froude);
    const double drag = 0.5 / (model.params.drag_nr * model.params.drag_nr);

    VectorXd a(grid.state_size());
    for (int i = 1; i <= N; ++i) {
        VectorXd ai = bend * (-ext.pos(i + 2) + 4.0 * ext.pos(i + 1) - 6.0 * ext.pos(i) +
                              4.0 * ext.pos(i - 1) - ext.pos(i - 2));
        ai += grav * model.params.e_g;
        for (int lo : {i, i - 1}) {
            const EdgeEval e = edge_eval(ext, ds, lo);
            ai += drag * (model.drag.C(e.mid, e.tang, t) * (model.flow.eval(e.mid, t) - e.midv));
        }
        a.segment(d * (i - 1), d) = ai;
    }
    return a;
}

DiffusionMatrix diffusion(const FiberModel& model, double t, const VectorXd& r,
                          const VectorXd& v) {
    const Grid& grid = model.grid;
    const double ds = grid.delta_s;
    const ExtendedConfig ext = extend_with_ghosts(model, r, v);
    const double scale =
        model.params.beta / (2.0 * std::sqrt(ds) * model.params.drag_nr * model.params.drag_nr);

    DiffusionMatrix B;
    B.blocks.reserve(grid.N);
    for (int i = 1; i <= grid.N; ++i) {
        MatrixXd block = MatrixXd::Zero(grid.dim, grid.dim);
        for (int lo : {i, i - 1}) {
            const EdgeEval e = edge_eval(ext, ds, lo);
            block += model.drag.C(e.mid, e.tang, t) * model.drag.D(e.mid, e.midv, e.tang, t);
        }
        B.blocks.push_back(scale * block);
    }
    return B;
}

void drift_jacobian(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v,
                    MatrixXd& d_dr, MatrixXd& d_dv) {
    const Grid& grid = model.grid;
    const int d = grid.dim;
    const int N = grid.N;
    const double ds = grid.delta_s;
    const ExtendedConfig ext = extend_with_ghosts(model, r, v);

    const double bend = 1.0 / (model.params.alpha * model.params.alpha * std::pow(ds, 4));
    const double drag = 0.5 / (model.params.drag_nr * model.params.drag_nr);

    d_dr = MatrixXd::Zero(grid.state_size(), grid.state_size());
    d_dv = MatrixXd::Zero(grid.state_size(), grid.state_size());

    static constexpr double kStencil[5] = {-1.0, 4.0, -6.0, 4.0, -1.0};
    const MatrixXd Id = MatrixXd::Identity(d, d);

    for (int i = 1; i <= N; ++i) {
        const int row = d * (i - 1);
        // Bending: fourth-difference stencil with ghosts eliminated.
        for (int off = -2; off <= 2; ++off) {
            for (const auto& [j, w] : ghost_chain(i - off, N))
                d_dr.block(row, d * (j - 1), d, d) += bend * kStencil[off + 2] * w * Id;
        }
        // Drag: C frozen, exact flow Jacobian and midpoint-velocity terms.
        for (int lo : {i, i - 1}) {
            const EdgeEval e = edge_eval(ext, ds, lo);
            const MatrixXd C = model.drag.C(e.mid, e.tang, t);
            const MatrixXd CJu = C * model.flow.jacobian(e.mid, t);
            for (int p : {lo, lo + 1}) {
                for (const auto& [j, w] : ghost_chain(p, N)) {
                    d_dr.block(row, d * (j - 1), d, d) += drag * 0.5 * w * CJu;
                    d_dv.block(row, d * (j - 1), d, d) -= drag * 0.5 * w * C;
                }
            }
        }
    }
}

EdgeVector multiplier_rate(const FiberModel& model, double t, const VectorXd& r,
                           const VectorXd& v, const VectorXd& dw, double dt) {
    const VectorXd r0 = model.clamp_ghost();
    const MatrixXd grad = constraint_gradient(model.grid, r0, r);
    const SymTridiagonal G = gram_matrix(model.grid, r0, r);
    const VectorXd force = drift(model, t, r, v) * dt + diffusion(model, t, r, v).apply(dw);
    const EdgeVector rhs =
        grad.transpose() * force + second_derivative_form(model.grid, v) * dt;
    return -gram_solve(G, rhs) / dt;
}

VectorXd explicit_drift(const FiberModel& model, double t, const VectorXd& r, const VectorXd& v) {
    const VectorXd r0 = model.clamp_ghost();
    const MatrixXd grad = constraint_gradient(model.grid, r0, r);
    const SymTridiagonal G = gram_matrix(model.grid, r0, r);
    const VectorXd a = drift(model, t, r, v);
    const EdgeVector curv = second_derivative_form(model.grid, v);
    return a - grad * gram_solve(G, EdgeVector(grad.transpose() * a + curv));
}

bool one_sided_growth_check(const FiberModel& model, double t, const VectorXd& r,
                            const VectorXd& v, double C_T) {
    const double lhs = r.dot(v) + v.dot(explicit_drift(model, t, r, v));
    return lhs <= C_T * (1.0 + r.squaredNorm() + v.squaredNorm());
}

FiberState initial_straight_state(const FiberModel& model) {
    const Grid& grid = model.grid;
    FiberState s;
    s.r.resize(grid.state_size());
    s.v = VectorXd::Zero(grid.state_size());
    for (int i = 1; i <= grid.N; ++i)
        grid.node(s.r, i) = model.params.r_hat + (i + 0.5) * grid.delta_s * model.params.tau_hat;
    return s;
}

} // namespace fsde
