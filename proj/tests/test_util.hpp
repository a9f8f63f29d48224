#ifndef FSDE_TEST_UTIL_HPP
#define FSDE_TEST_UTIL_HPP

#include <random>

#include "fsde/constraint.hpp"
#include "fsde/model.hpp"

namespace fsde::testutil {

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

inline VectorXd random_unit(std::mt19937_64& rng, int d) {
    VectorXd v = random_vector(rng, d);
    while (v.norm() < 1e-8) v = random_vector(rng, d);
    return v / v.norm();
}

/// Random polygon on the manifold: unit-length random walk from the clamped
/// ghost point.
inline VectorXd random_manifold_state(const Grid& grid, const VectorXd& r0,
                                      std::mt19937_64& rng) {
    VectorXd r(grid.state_size());
    VectorXd prev = r0;
    for (int i = 1; i <= grid.N; ++i) {
        prev = prev + grid.delta_s * random_unit(rng, grid.dim);
        grid.node(r, i) = prev;
    }
    return r;
}

/// Random tangent vector at r via the orthogonal projector.
inline VectorXd random_tangent(const Grid& grid, const VectorXd& r0, const VectorXd& r,
                               std::mt19937_64& rng, double scale = 1.0) {
    return tangent_project(grid, r0, r, random_vector(rng, grid.state_size(), scale));
}

/// Dense projector for oracle checks.
inline MatrixXd dense_projector(const Grid& grid, const VectorXd& r0, const VectorXd& r) {
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    const MatrixXd G = (grad.transpose() * grad).eval();
    return MatrixXd::Identity(grid.state_size(), grid.state_size()) -
           grad * G.ldlt().solve(grad.transpose());
}

} // namespace fsde::testutil

#endif
