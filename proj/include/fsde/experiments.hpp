#ifndef FSDE_EXPERIMENTS_HPP
#define FSDE_EXPERIMENTS_HPP

#include <string>
#include <vector>

#include "fsde/integrators.hpp"

namespace fsde {

/// Discrete L2 norm over fiber nodes: (sum_i |z_i|^2 ds)^(1/2).
double l2h_norm(const VectorXd& z, double delta_s);

/// |z - z_ref| / |z_ref| in the discrete L2 norm at terminal time.
double relative_error(const VectorXd& z, const VectorXd& z_ref, double delta_s);

/// Monte Carlo study configuration. Every ladder dt must be an integer
/// multiple of dt_ref so coarse and fine trajectories couple pathwise.
struct StudyConfig {
    FiberModel model;
    Scheme scheme = Scheme::Implicit;
    std::vector<double> dt_ladder;
    double dt_ref = 0.0;
    double T = 0.25;
    int samples = 100;
    std::uint64_t base_seed = 2024;
    double confidence = 0.90;
    SolverOptions opts;
    int threads = 1;
};

struct ConvergenceRow {
    double dt = 0.0;
    double mean_err_r = 0.0;
    double mean_err_rv = 0.0;
    double ci_r = 0.0;  // confidence half-widths
    double ci_rv = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double order_r = 0.0;  // least-squares slope in log-log; NaN below 3 points
    double order_rv = 0.0;
    std::vector<FiberState> reference_terminals; // one per sample, for cross-scheme checks
};

/// Strong convergence in dt against a same-scheme reference on the coarsened
/// same Brownian path (per sample: seed = base_seed xor sample index).
ConvergenceTable strong_convergence_study(const StudyConfig& cfg);

/// Coupled space-time study ds = dt -> 0 on nested grids. The reference runs
/// one nesting level below the finest ladder entry; errors compare against
/// the reference solution restricted (cell-averaged) to each ladder grid.
/// cfg.model supplies parameters; grids are rebuilt per ladder level.
ConvergenceTable coupled_convergence_study(const StudyConfig& cfg,
                                           const std::vector<double>& ds_ladder);

struct SkipRow {
    int skip_n = 0;
    double constraint_err = 0.0; // space-time norm of |d_s r|^2 - 1
    double tangency_err = 0.0;   // space-time norm of d_s r . d_s v
    double terminal_err = 0.0;   // vs the always-project run on the same path
    double avg_projection_iters = 0.0;
};

/// Projection-skipping study for the explicit scheme at fixed dt = cfg.dt_ref.
std::vector<SkipRow> projection_skip_study(const StudyConfig& cfg,
                                           const std::vector<int>& skip_ladder);

struct PredictorRow {
    double effective_turbulence = 0.0; // beta / sqrt(ds)
    Predictor variant = Predictor::V0;
    double avg_newton_iters = 0.0;
};

/// Average implicit-scheme Newton iterations per step for each predictor
/// variant, indexed by the effective turbulence number; dt = cfg.dt_ref.
std::vector<PredictorRow> predictor_study(const StudyConfig& cfg,
                                          const std::vector<Predictor>& variants,
                                          const std::vector<double>& eff_turb_ladder);

/// Least-squares order fit of log(err) vs log(dt); NaN below 3 points.
double fit_order(const std::vector<double>& dts, const std::vector<double>& errs);

/// Half-width of the normal-approximation confidence interval.
double confidence_half_width(const std::vector<double>& values, double confidence);

void write_convergence_csv(const std::string& path, const ConvergenceTable& table);
void write_skip_csv(const std::string& path, const std::vector<SkipRow>& rows);
void write_predictor_csv(const std::string& path, const std::vector<PredictorRow>& rows);

const char* predictor_name(Predictor v);
const char* scheme_name(Scheme s);

} // namespace fsde

#endif
