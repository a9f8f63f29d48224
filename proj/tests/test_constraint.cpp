#include <doctest.h>

#include <Eigen/LU>

#include "fsde/constraint.hpp"
#include "test_util.hpp"

using namespace fsde;
using namespace fsde::testutil;

namespace {

Grid make_grid(int N, int dim = 2) { return Grid::clamped_free(N, 1.0, dim); }

// Straight chain hanging along -e2 with r0 = -(ds/2) e2.
std::pair<VectorXd, VectorXd> straight_chain(const Grid& grid) {
    VectorXd r0 = VectorXd::Zero(grid.dim);
    r0[1] = -0.5 * grid.delta_s;
    VectorXd r(grid.state_size());
    for (int i = 1; i <= grid.N; ++i) {
        VectorXd x = VectorXd::Zero(grid.dim);
        x[1] = -(i + 0.5) * grid.delta_s;
        grid.node(r, i) = x;
    }
    return {r0, r};
}

} // namespace

TEST_CASE("constraint_eval vanishes on unit-spacing polygons") {
    const Grid grid = make_grid(6);
    const auto [r0, r] = straight_chain(grid);
    const EdgeVector g = constraint_eval(grid, r0, r);
    CHECK(g.lpNorm<Eigen::Infinity>() < 1e-14);

    auto rng = make_rng(11);
    const VectorXd rm = random_manifold_state(grid, r0, rng);
    CHECK(constraint_eval(grid, r0, rm).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("constraint_eval on a uniformly stretched chain") {
    const Grid grid = make_grid(5);
    auto [r0, r] = straight_chain(grid);
    // Stretch all segment lengths to 2 ds.
    VectorXd stretched(grid.state_size());
    for (int i = 1; i <= grid.N; ++i) {
        VectorXd x = r0;
        x[1] -= 2.0 * i * grid.delta_s;
        grid.node(stretched, i) = x;
    }
    const EdgeVector g = constraint_eval(grid, r0, stretched);
    for (int i = 0; i < grid.N; ++i) CHECK(g[i] == doctest::Approx(-1.5).epsilon(1e-14));
}

TEST_CASE("constraint_eval matches a scalar brute-force oracle") {
    const Grid grid = make_grid(3);
    auto rng = make_rng(7);
    const VectorXd r0 = random_vector(rng, 2);
    const VectorXd r = random_vector(rng, grid.state_size());
    const EdgeVector g = constraint_eval(grid, r0, r);
    const double ds2 = grid.delta_s * grid.delta_s;
    for (int i = 1; i <= grid.N; ++i) {
        double seg2 = 0.0;
        for (int k = 0; k < 2; ++k) {
            const double lo = (i == 1) ? r0[k] : r[2 * (i - 2) + k];
            const double hi = r[2 * (i - 1) + k];
            seg2 += (hi - lo) * (hi - lo);
        }
        CHECK(g[i - 1] == doctest::Approx(0.5 * (1.0 - seg2 / ds2)).epsilon(1e-13));
    }
}

TEST_CASE("constraint_eval rejects mismatched shapes") {
    const Grid grid = make_grid(4);
    CHECK_THROWS_AS(constraint_eval(grid, VectorXd::Zero(2), VectorXd::Zero(5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(constraint_eval(grid, VectorXd::Zero(3), VectorXd::Zero(8)),
                    std::invalid_argument);
}

TEST_CASE("constraint_gradient agrees with central finite differences") {
    const Grid grid = make_grid(5);
    auto rng = make_rng(21);
    const VectorXd r0 = random_vector(rng, 2);
    const VectorXd r = random_vector(rng, grid.state_size());
    const VectorXd y = random_vector(rng, grid.state_size());
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    // g is quadratic, so the central difference is exact up to rounding.
    for (double eps : {1e-5, 1e-6}) {
        const EdgeVector fd = (constraint_eval(grid, r0, r + eps * y) -
                               constraint_eval(grid, r0, r - eps * y)) /
                              (2.0 * eps);
        const EdgeVector exact = grad.transpose() * y;
        CHECK((fd - exact).lpNorm<Eigen::Infinity>() < 1e-7);
    }
}

TEST_CASE("constraint_gradient blocks have magnitude 1/ds on the straight chain") {
    const Grid grid = make_grid(4);
    const auto [r0, r] = straight_chain(grid);
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    for (int k = 0; k < grid.N; ++k) {
        for (int i = 0; i < grid.N; ++i) {
            const double norm = grad.block(2 * i, k, 2, 1).norm();
            if (i == k || i == k - 1)
                CHECK(norm == doctest::Approx(1.0 / grid.delta_s));
            else
                CHECK(norm == 0.0);
        }
    }
}

TEST_CASE("constraint_gradient sparsity for N = 2") {
    const Grid grid = make_grid(2);
    auto rng = make_rng(3);
    const VectorXd r0 = random_vector(rng, 2);
    const VectorXd r = random_vector(rng, 4);
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    // Column 1 touches node 1 only (ghost absorbed); column 2 nodes 1 and 2.
    CHECK((grad.col(0).array() != 0.0).count() == 2);
    CHECK((grad.col(1).array() != 0.0).count() == 4);
}

TEST_CASE("gram_matrix equals the dense product and has the straight-chain form") {
    const Grid grid = make_grid(6);
    auto rng = make_rng(5);
    const VectorXd r0 = random_vector(rng, 2);
    const VectorXd r = random_vector(rng, grid.state_size());
    const MatrixXd grad = constraint_gradient(grid, r0, r);
    const MatrixXd dense = grad.transpose() * grad;
    CHECK((gram_matrix(grid, r0, r).dense() - dense).lpNorm<Eigen::Infinity>() <
          1e-12 * dense.lpNorm<Eigen::Infinity>());

    const auto [s0, s] = straight_chain(grid);
    const SymTridiagonal G = gram_matrix(grid, s0, s);
    const double inv_ds2 = 1.0 / (grid.delta_s * grid.delta_s);
    CHECK(G.diag[0] == doctest::Approx(inv_ds2));
    for (int i = 1; i < grid.N; ++i) CHECK(G.diag[i] == doctest::Approx(2.0 * inv_ds2));
    for (int i = 0; i + 1 < grid.N; ++i) CHECK(G.lower[i] == doctest::Approx(-inv_ds2));
}

TEST_CASE("gram_matrix off-diagonal vanishes across a right-angle kink") {
    const Grid grid = make_grid(3);
    const double ds = grid.delta_s;
    VectorXd r0(2);
    r0 << 0.0, 0.0;
    VectorXd r(6);
    r << ds, 0.0,      // segment 1 along e1
        ds, ds,        // segment 2 along e2 (kink)
        2.0 * ds, ds;  // segment 3 along e1
    const SymTridiagonal G = gram_matrix(grid, r0, r);
    CHECK(G.lower[0] == 0.0);
    CHECK(G.lower[1] == 0.0);
}

TEST_CASE("gram_solve meets the residual contract and matches a dense LU") {
    const Grid grid = make_grid(7);
    auto rng = make_rng(17);
    const auto [r0, rs] = straight_chain(grid);
    const SymTridiagonal G = gram_matrix(grid, r0, rs);
    const EdgeVector e1 = EdgeVector::Unit(grid.N, 0);
    const EdgeVector z = gram_solve(G, e1);
    CHECK((G.apply(z) - e1).lpNorm<Eigen::Infinity>() <= 1e-12);
    const EdgeVector dense = G.dense().partialPivLu().solve(e1);
    CHECK((z - dense).lpNorm<Eigen::Infinity>() < 1e-10 * dense.lpNorm<Eigen::Infinity>());

    const VectorXd r = random_manifold_state(grid, r0, rng);
    const EdgeVector b = random_vector(rng, grid.N);
    const EdgeVector zb = gram_solve(gram_matrix(grid, r0, r), b);
    CHECK((gram_matrix(grid, r0, r).apply(zb) - b).lpNorm<Eigen::Infinity>() <=
          1e-12 * b.lpNorm<Eigen::Infinity>());
}

TEST_CASE("gram_solve flags a collapsed segment") {
    const Grid grid = make_grid(3);
    const auto [r0, rs] = straight_chain(grid);
    VectorXd r = rs;
    grid.node(r, 2) = grid.node(r, 1); // zero-length segment
    const SymTridiagonal G = gram_matrix(grid, r0, r);
    CHECK_THROWS_AS(gram_solve(G, EdgeVector::Ones(grid.N)), SingularGramError);
}

TEST_CASE("gram_determinant: straight chain, dense oracle, scalar case") {
    const Grid grid = make_grid(5);
    const auto [r0, r] = straight_chain(grid);
    const SymTridiagonal G = gram_matrix(grid, r0, r);
    // ds^(-2N) for the straight chain.
    CHECK(gram_log_determinant(G) ==
          doctest::Approx(-2.0 * grid.N * std::log(grid.delta_s)).epsilon(1e-12));

    auto rng = make_rng(9);
    const VectorXd rm = random_manifold_state(grid, r0, rng);
    const SymTridiagonal Gm = gram_matrix(grid, r0, rm);
    CHECK(gram_determinant(Gm) ==
          doctest::Approx(Gm.dense().partialPivLu().determinant()).epsilon(1e-10));

    SymTridiagonal scalar;
    scalar.diag = EdgeVector::Constant(1, 3.5);
    scalar.lower.resize(0);
    CHECK(gram_determinant(scalar) == doctest::Approx(3.5));
}

TEST_CASE("gram determinant lower bound near the manifold") {
    const Grid grid = make_grid(6);
    auto rng = make_rng(2024);
    VectorXd r0 = VectorXd::Zero(2);
    const double eps = grid.delta_s / 4.0;
    const double bound = -2.0 * grid.N * std::log(2.0 * grid.delta_s);
    for (int trial = 0; trial < 200; ++trial) {
        VectorXd r = random_manifold_state(grid, r0, rng);
        // Perturbation with Euclidean norm < eps keeps dist(r, M) < eps.
        VectorXd p = random_vector(rng, grid.state_size());
        std::uniform_real_distribution<double> mag(0.0, 0.99 * eps);
        r += p * (mag(rng) / p.norm());
        CHECK(gram_log_determinant(gram_matrix(grid, r0, r)) >= bound);
    }
}

TEST_CASE("tangent_project algebra") {
    const Grid grid = make_grid(5);
    auto rng = make_rng(31);
    const VectorXd r0 = random_vector(rng, 2);
    const VectorXd r = random_manifold_state(grid, r0, rng);
    const MatrixXd grad = constraint_gradient(grid, r0, r);

    const VectorXd yt = random_tangent(grid, r0, r, rng);
    CHECK((tangent_project(grid, r0, r, yt) - yt).norm() < 1e-10 * (1.0 + yt.norm()));

    for (int k = 0; k < grid.N; ++k) {
        const VectorXd col = grad.col(k);
        CHECK(tangent_project(grid, r0, r, col).norm() < 1e-10 * col.norm());
    }

    const VectorXd y = random_vector(rng, grid.state_size());
    const VectorXd py = tangent_project(grid, r0, r, y);
    CHECK((tangent_project(grid, r0, r, py) - py).norm() < 1e-10 * py.norm());
    CHECK((py - dense_projector(grid, r0, r) * y).norm() < 1e-10 * y.norm());
    // Hidden-constraint identity: projected velocities are tangent.
    CHECK((grad.transpose() * py).lpNorm<Eigen::Infinity>() < 1e-10 * y.norm());
}

TEST_CASE("projector algebra on random manifold states") {
    const Grid grid = make_grid(4);
    auto rng = make_rng(77);
    const VectorXd r0 = VectorXd::Zero(2);
    for (int trial = 0; trial < 100; ++trial) {
        const VectorXd r = random_manifold_state(grid, r0, rng);
        const MatrixXd P = dense_projector(grid, r0, r);
        const double scale = P.lpNorm<Eigen::Infinity>();
        CHECK((P * P - P).lpNorm<Eigen::Infinity>() < 1e-10 * scale);
        CHECK((P - P.transpose()).lpNorm<Eigen::Infinity>() < 1e-10 * scale);
        CHECK((constraint_gradient(grid, r0, r).transpose() * P).lpNorm<Eigen::Infinity>() <
              1e-10 / grid.delta_s);
    }
}

TEST_CASE("second_derivative_form") {
    const Grid grid = make_grid(5);
    const double ds2 = grid.delta_s * grid.delta_s;

    CHECK(second_derivative_form(grid, VectorXd::Zero(grid.state_size())).norm() == 0.0);

    // Rigid translation: only the edge against the fixed ghost contributes.
    VectorXd c(2);
    c << 0.3, -0.4;
    VectorXd v(grid.state_size());
    for (int i = 1; i <= grid.N; ++i) grid.node(v, i) = c;
    const EdgeVector h = second_derivative_form(grid, v);
    CHECK(h[0] == doctest::Approx(-c.squaredNorm() / ds2));
    for (int i = 1; i < grid.N; ++i) CHECK(h[i] == 0.0);

    // Second directional finite difference of g.
    auto rng = make_rng(13);
    const VectorXd r0 = random_vector(rng, 2);
    for (int trial = 0; trial < 100; ++trial) {
        const VectorXd x = random_vector(rng, grid.state_size());
        const VectorXd w = random_vector(rng, grid.state_size());
        const double eps = 1e-3;
        const EdgeVector fd = (constraint_eval(grid, r0, x + eps * w) -
                               2.0 * constraint_eval(grid, r0, x) +
                               constraint_eval(grid, r0, x - eps * w)) /
                              (eps * eps);
        CHECK((second_derivative_form(grid, w) - fd).lpNorm<Eigen::Infinity>() < 1e-6);
    }
}
