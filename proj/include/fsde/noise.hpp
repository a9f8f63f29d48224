#ifndef FSDE_NOISE_HPP
#define FSDE_NOISE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace fsde {

/// Per-trajectory table of Brownian increments for the dN-dimensional
/// standard Wiener process (one d-block per cell). Column m holds the
/// increment vector of step m; entry ~ Normal(0, dt), independent across all
/// indices. Deterministic in (seed, dt, steps, N, dim) and independent of
/// evaluation order (counter-based generator).
struct WienerIncrements {
    std::uint64_t seed = 0;
    double dt = 0.0;
    int steps = 0;
    int N = 0;
    int dim = 0;
    Eigen::MatrixXd data; // (N*dim) x steps

    Eigen::VectorXd step(int m) const { return data.col(m); }

    static WienerIncrements sample(std::uint64_t seed, int steps, int N, int dim, double dt);

    /// Sum k consecutive increments: couples a coarse time grid to this
    /// path. k must divide steps.
    WienerIncrements coarsen(int k) const;

    /// Aggregate ks fine cells per coarse cell and rescale by sqrt(1/ks),
    /// consistent with the white-noise measure: coarse-cell noise equals
    /// xi(I_coarse x .) / sqrt(ds_coarse). ks must divide N + 1.
    WienerIncrements spatial_coarsen(int ks) const;

    /// Binary dump (little-endian): magic "FSDEW1", u64 steps, u64 N,
    /// u64 dim, f64 dt, u64 seed, then column-major f64 data.
    void save(const std::string& path) const;
    static WienerIncrements load(const std::string& path);
};

} // namespace fsde

#endif
