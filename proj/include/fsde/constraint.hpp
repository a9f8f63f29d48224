#ifndef FSDE_CONSTRAINT_HPP
#define FSDE_CONSTRAINT_HPP

#include <Eigen/Dense>

#include "fsde/grid.hpp"
#include "fsde/tridiagonal.hpp"

namespace fsde {

// Geometry of the constraint manifold of the clamped polygon chain:
//   g_{i-1/2}(x) = (1 - |x_i - x_{i-1}|^2 / ds^2) / 2,  i = 1..N,
// with x_0 = r0 the fixed clamped ghost point. All functions are pure.

/// g(r). Exactly zero on polygon configurations with all segment lengths ds.
inline EdgeVector constraint_eval(const Grid& grid, const VectorXd& r0, const VectorXd& r) {
    grid.check_state(r, "constraint_eval");
    if (r0.size() != grid.dim) throw std::invalid_argument("constraint_eval: bad r0");
    const double inv_ds2 = 1.0 / (grid.delta_s * grid.delta_s);
    EdgeVector g(grid.N);
    VectorXd prev = r0;
    for (int i = 1; i <= grid.N; ++i) {
        const auto xi = grid.node(r, i);
        g[i - 1] = 0.5 * (1.0 - (xi - prev).squaredNorm() * inv_ds2);
        prev = xi;
    }
    return g;
}

/// Gradient of g as a dN x N matrix: column i-1/2 carries -(x_i - x_{i-1})/ds^2
/// in node row i-1 (absent for i = 1, where r0 is fixed) and the same segment
/// vector with opposite sign pattern in node row i.
inline MatrixXd constraint_gradient(const Grid& grid, const VectorXd& r0, const VectorXd& r) {
    grid.check_state(r, "constraint_gradient");
    if (r0.size() != grid.dim) throw std::invalid_argument("constraint_gradient: bad r0");
    const int d = grid.dim;
    const double inv_ds2 = 1.0 / (grid.delta_s * grid.delta_s);
    MatrixXd grad = MatrixXd::Zero(grid.state_size(), grid.N);
    VectorXd prev = r0;
    for (int i = 1; i <= grid.N; ++i) {
        const VectorXd seg = (grid.node(r, i) - prev) * inv_ds2;
        grad.block(d * (i - 1), i - 1, d, 1) = -seg;
        if (i > 1) grad.block(d * (i - 2), i - 1, d, 1) = seg;
        prev = grid.node(r, i);
    }
    return grad;
}

/// Gram matrix G = (grad g)^T grad g, assembled directly from segment vectors.
inline SymTridiagonal gram_matrix(const Grid& grid, const VectorXd& r0, const VectorXd& r) {
    grid.check_state(r, "gram_matrix");
    const double inv_ds4 = 1.0 / std::pow(grid.delta_s, 4);
    SymTridiagonal G;
    G.diag.resize(grid.N);
    G.lower.resize(grid.N - 1);
    VectorXd seg_prev = grid.node(r, 1) - r0;
    G.diag[0] = seg_prev.squaredNorm() * inv_ds4;
    for (int i = 2; i <= grid.N; ++i) {
        const VectorXd seg = grid.node(r, i) - grid.node(r, i - 1);
        G.diag[i - 1] = 2.0 * seg.squaredNorm() * inv_ds4;
        G.lower[i - 2] = -seg_prev.dot(seg) * inv_ds4;
        seg_prev = seg;
    }
    return G;
}

inline EdgeVector gram_solve(const SymTridiagonal& G, const EdgeVector& b) {
    return tridiag_solve(G, b);
}

inline double gram_log_determinant(const SymTridiagonal& G) {
    return tridiag_log_determinant(G);
}

inline double gram_determinant(const SymTridiagonal& G) {
    return tridiag_determinant(G);
}

/// Orthogonal tangent-space projection P(r) y = y - grad g G^-1 (grad g)^T y.
inline VectorXd tangent_project(const Grid& grid, const VectorXd& r0, const VectorXd& r,
                                const VectorXd& y) {
    grid.check_state(y, "tangent_project");
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    const SymTridiagonal G = gram_matrix(grid, r0, r);
    return y - grad * gram_solve(G, grad.transpose() * y);
}

/// D^2 g(x)(v, v); independent of x since g is quadratic. Component i-1/2 is
/// -|v_i - v_{i-1}|^2 / ds^2 with the clamped ghost velocity v_0 = 0.
inline EdgeVector second_derivative_form(const Grid& grid, const VectorXd& v) {
    grid.check_state(v, "second_derivative_form");
    const double inv_ds2 = 1.0 / (grid.delta_s * grid.delta_s);
    EdgeVector h(grid.N);
    VectorXd prev = VectorXd::Zero(grid.dim);
    for (int i = 1; i <= grid.N; ++i) {
        h[i - 1] = -(grid.node(v, i) - prev).squaredNorm() * inv_ds2;
        prev = grid.node(v, i);
    }
    return h;
}

} // namespace fsde

#endif
