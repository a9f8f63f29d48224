#ifndef FSDE_GRID_HPP
#define FSDE_GRID_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace fsde {

using Eigen::VectorXd;
using Eigen::MatrixXd;

/// Edge-associated quantity, one value per edge i-1/2, i = 1..N.
using EdgeVector = Eigen::VectorXd;

/// Discretization geometry of the clamped-free polygon chain.
/// N dynamic nodes at s_i = (i + 1/2) * delta_s, cell size delta_s = ell / (N + 1).
struct Grid {
    int N = 0;
    double delta_s = 0.0;
    double ell = 0.0;
    int dim = 2;

    static Grid clamped_free(int N, double ell, int dim) {
        if (N < 2) throw std::invalid_argument("Grid: N must be >= 2");
        if (dim != 2 && dim != 3) throw std::invalid_argument("Grid: dim must be 2 or 3");
        if (ell <= 0.0) throw std::invalid_argument("Grid: ell must be positive");
        Grid g;
        g.N = N;
        g.ell = ell;
        g.dim = dim;
        g.delta_s = ell / (N + 1);
        return g;
    }

    int state_size() const { return dim * N; }

    /// Block view of node i (1-based, i = 1..N) in a dN-vector.
    Eigen::VectorBlock<const VectorXd> node(const VectorXd& z, int i) const {
        return z.segment(dim * (i - 1), dim);
    }
    Eigen::VectorBlock<VectorXd> node(VectorXd& z, int i) const {
        return z.segment(dim * (i - 1), dim);
    }

    void check_state(const VectorXd& z, const char* what) const {
        if (z.size() != state_size())
            throw std::invalid_argument(std::string(what) + ": expected size " +
                                        std::to_string(state_size()) + ", got " +
                                        std::to_string(z.size()));
    }
};

/// Position/velocity pair of the polygon chain, each dN-dimensional.
struct FiberState {
    VectorXd r;
    VectorXd v;
};

} // namespace fsde

#endif
