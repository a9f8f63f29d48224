#include "fsde/experiments.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

namespace fsde {

double l2h_norm(const VectorXd& z, double delta_s) {
    return std::sqrt(delta_s) * z.norm();
}

double relative_error(const VectorXd& z, const VectorXd& z_ref, double delta_s) {
    if (z.size() != z_ref.size())
        throw std::invalid_argument("relative_error: shape mismatch");
    const double ref = l2h_norm(z_ref, delta_s);
    if (ref == 0.0) throw std::invalid_argument("relative_error: zero reference norm");
    return l2h_norm(z - z_ref, delta_s) / ref;
}

double fit_order(const std::vector<double>& dts, const std::vector<double>& errs) {
    if (dts.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    const int n = static_cast<int>(dts.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = std::log(dts[i]);
        const double y = std::log(std::max(errs[i], 1e-300));
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

// Two-sided normal quantile via Acklam-style inverse CDF; accurate to ~1e-9,
// plenty for confidence bands.
double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double pl = 0.02425;
    if (p < pl) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - pl) return -normal_quantile(1.0 - p);
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

int ladder_factor(double dt, double dt_ref) {
    const double k = dt / dt_ref;
    const int ki = static_cast<int>(std::llround(k));
    if (ki < 1 || std::abs(k - ki) > 1e-9)
        throw std::invalid_argument("dt ladder entry is not an integer multiple of dt_ref");
    return ki;
}

VectorXd stack_rv(const FiberState& s) {
    VectorXd z(s.r.size() + s.v.size());
    z << s.r, s.v;
    return z;
}

FiberModel with_grid(const FiberModel& proto, int N) {
    FiberModel m = proto;
    m.grid = Grid::clamped_free(N, proto.grid.ell, proto.grid.dim);
    return m;
}

// Cell-average restriction of a fine node field to a grid coarser by ks.
VectorXd restrict_nodes(const Grid& fine, const VectorXd& z, int ks) {
    const int Nc = (fine.N + 1) / ks - 1;
    const int d = fine.dim;
    VectorXd out = VectorXd::Zero(Nc * d);
    for (int i = 1; i <= Nc; ++i) {
        for (int j = ks * i; j < ks * i + ks; ++j)
            out.segment(d * (i - 1), d) += z.segment(d * (j - 1), d);
        out.segment(d * (i - 1), d) /= static_cast<double>(ks);
    }
    return out;
}

} // namespace

double confidence_half_width(const std::vector<double>& values, double confidence) {
    const int n = static_cast<int>(values.size());
    if (n < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double x : values) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / (n - 1));
    const double z = normal_quantile(0.5 + confidence / 2.0);
    return z * sd / std::sqrt(static_cast<double>(n));
}

ConvergenceTable strong_convergence_study(const StudyConfig& cfg) {
    const Grid& grid = cfg.model.grid;
    const int M_ref = static_cast<int>(std::llround(cfg.T / cfg.dt_ref));
    const int L = static_cast<int>(cfg.dt_ladder.size());
    for (double dt : cfg.dt_ladder) ladder_factor(dt, cfg.dt_ref);

    std::vector<std::vector<double>> errs_r(L), errs_rv(L);
    for (auto& e : errs_r) e.resize(cfg.samples);
    for (auto& e : errs_rv) e.resize(cfg.samples);
    std::vector<FiberState> refs(cfg.samples);

    parallel_for(cfg.samples, cfg.threads, [&](int j) {
        const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(j);
        const WienerIncrements fine =
            WienerIncrements::sample(seed, M_ref, grid.N, grid.dim, cfg.dt_ref);
        const FiberState ref = simulate(cfg.model, cfg.scheme, cfg.T, cfg.dt_ref, fine, 1,
                                        Predictor::V0, cfg.opts)
                                   .final_state;
        const VectorXd ref_rv = stack_rv(ref);
        for (int l = 0; l < L; ++l) {
            const double dt = cfg.dt_ladder[l];
            const WienerIncrements coarse = fine.coarsen(ladder_factor(dt, cfg.dt_ref));
            const FiberState sol = simulate(cfg.model, cfg.scheme, cfg.T, dt, coarse, 1,
                                            Predictor::V0, cfg.opts)
                                       .final_state;
            errs_r[l][j] = relative_error(sol.r, ref.r, grid.delta_s);
            errs_rv[l][j] = relative_error(stack_rv(sol), ref_rv, grid.delta_s);
        }
        refs[j] = ref;
    });

    ConvergenceTable table;
    std::vector<double> mean_r, mean_rv;
    for (int l = 0; l < L; ++l) {
        ConvergenceRow row;
        row.dt = cfg.dt_ladder[l];
        row.mean_err_r = mean(errs_r[l]);
        row.mean_err_rv = mean(errs_rv[l]);
        row.ci_r = confidence_half_width(errs_r[l], cfg.confidence);
        row.ci_rv = confidence_half_width(errs_rv[l], cfg.confidence);
        table.rows.push_back(row);
        mean_r.push_back(row.mean_err_r);
        mean_rv.push_back(row.mean_err_rv);
    }
    table.order_r = fit_order(cfg.dt_ladder, mean_r);
    table.order_rv = fit_order(cfg.dt_ladder, mean_rv);
    table.reference_terminals = std::move(refs);
    return table;
}

ConvergenceTable coupled_convergence_study(const StudyConfig& cfg,
                                           const std::vector<double>& ds_ladder) {
    const double ell = cfg.model.grid.ell;
    const int dim = cfg.model.grid.dim;
    double ds_min = ds_ladder.front();
    for (double ds : ds_ladder) ds_min = std::min(ds_min, ds);
    const double ds_ref = ds_min / 2.0;
    const int N_ref = static_cast<int>(std::llround(ell / ds_ref)) - 1;
    const FiberModel model_ref = with_grid(cfg.model, N_ref);
    const int M_ref = static_cast<int>(std::llround(cfg.T / ds_ref));
    const int L = static_cast<int>(ds_ladder.size());

    std::vector<std::vector<double>> errs_r(L), errs_rv(L);
    for (auto& e : errs_r) e.resize(cfg.samples);
    for (auto& e : errs_rv) e.resize(cfg.samples);
    std::vector<FiberState> refs(cfg.samples);

    parallel_for(cfg.samples, cfg.threads, [&](int j) {
        const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(j);
        const WienerIncrements fine =
            WienerIncrements::sample(seed, M_ref, N_ref, dim, ds_ref);
        const FiberState ref = simulate(model_ref, cfg.scheme, cfg.T, ds_ref, fine, 1,
                                        Predictor::V0, cfg.opts)
                                   .final_state;
        for (int l = 0; l < L; ++l) {
            const double ds = ds_ladder[l];
            const int ks = ladder_factor(ds, ds_ref);
            const FiberModel model_l = with_grid(cfg.model, (N_ref + 1) / ks - 1);
            const WienerIncrements noise_l = fine.spatial_coarsen(ks).coarsen(ks);
            const FiberState sol = simulate(model_l, cfg.scheme, cfg.T, ds, noise_l, 1,
                                            Predictor::V0, cfg.opts)
                                       .final_state;
            const VectorXd ref_r = restrict_nodes(model_ref.grid, ref.r, ks);
            const VectorXd ref_v = restrict_nodes(model_ref.grid, ref.v, ks);
            VectorXd ref_rv(ref_r.size() + ref_v.size());
            ref_rv << ref_r, ref_v;
            errs_r[l][j] = relative_error(sol.r, ref_r, ds);
            errs_rv[l][j] = relative_error(stack_rv(sol), ref_rv, ds);
        }
        refs[j] = ref;
    });

    ConvergenceTable table;
    std::vector<double> mean_r, mean_rv;
    for (int l = 0; l < L; ++l) {
        ConvergenceRow row;
        row.dt = ds_ladder[l];
        row.mean_err_r = mean(errs_r[l]);
        row.mean_err_rv = mean(errs_rv[l]);
        row.ci_r = confidence_half_width(errs_r[l], cfg.confidence);
        row.ci_rv = confidence_half_width(errs_rv[l], cfg.confidence);
        table.rows.push_back(row);
        mean_r.push_back(row.mean_err_r);
        mean_rv.push_back(row.mean_err_rv);
    }
    table.order_r = fit_order(ds_ladder, mean_r);
    table.order_rv = fit_order(ds_ladder, mean_rv);
    table.reference_terminals = std::move(refs);
    return table;
}

std::vector<SkipRow> projection_skip_study(const StudyConfig& cfg,
                                           const std::vector<int>& skip_ladder) {
    const Grid& grid = cfg.model.grid;
    const double dt = cfg.dt_ref;
    const int M = static_cast<int>(std::llround(cfg.T / dt));
    const int L = static_cast<int>(skip_ladder.size());
    const int d = grid.dim;
    const VectorXd r0 = cfg.model.clamp_ghost();

    std::vector<std::vector<double>> cons(L), tang(L), term(L), iters(L);
    for (auto* v : {&cons, &tang, &term, &iters})
        for (auto& e : *v) e.resize(cfg.samples);

    parallel_for(cfg.samples, cfg.threads, [&](int j) {
        const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(j);
        const WienerIncrements noise =
            WienerIncrements::sample(seed, M, grid.N, grid.dim, dt);
        const FiberState ref = simulate(cfg.model, Scheme::Explicit, cfg.T, dt, noise, 1,
                                        Predictor::V0, cfg.opts)
                                   .final_state;
        const VectorXd ref_rv = stack_rv(ref);
        for (int l = 0; l < L; ++l) {
            double sum_cons = 0.0, sum_tang = 0.0;
            const StepCallback cb = [&](int, double, const FiberState& s,
                                        const MultiplierRecord&, const StepStats&) {
                // Edge-midpoint finite differences of r and v (clamped ghosts).
                VectorXd prev_r = r0;
                VectorXd prev_v = VectorXd::Zero(d);
                for (int i = 1; i <= grid.N; ++i) {
                    const VectorXd dr = (grid.node(s.r, i) - prev_r) / grid.delta_s;
                    const VectorXd dv = (grid.node(s.v, i) - prev_v) / grid.delta_s;
                    const double c = dr.squaredNorm() - 1.0;
                    const double q = dr.dot(dv);
                    sum_cons += c * c * grid.delta_s * dt;
                    sum_tang += q * q * grid.delta_s * dt;
                    prev_r = grid.node(s.r, i);
                    prev_v = grid.node(s.v, i);
                }
            };
            const SimulateResult res = simulate(cfg.model, Scheme::Explicit, cfg.T, dt, noise,
                                                skip_ladder[l], Predictor::V0, cfg.opts, cb);
            cons[l][j] = std::sqrt(sum_cons);
            tang[l][j] = std::sqrt(sum_tang);
            term[l][j] = relative_error(stack_rv(res.final_state), ref_rv, grid.delta_s);
            iters[l][j] = res.projections > 0 ? static_cast<double>(res.projection_newton_iters) /
                                                    res.projections
                                              : 0.0;
        }
    });

    std::vector<SkipRow> rows;
    for (int l = 0; l < L; ++l) {
        SkipRow row;
        row.skip_n = skip_ladder[l];
        row.constraint_err = mean(cons[l]);
        row.tangency_err = mean(tang[l]);
        row.terminal_err = mean(term[l]);
        row.avg_projection_iters = mean(iters[l]);
        rows.push_back(row);
    }
    return rows;
}

std::vector<PredictorRow> predictor_study(const StudyConfig& cfg,
                                          const std::vector<Predictor>& variants,
                                          const std::vector<double>& eff_turb_ladder) {
    const Grid& grid = cfg.model.grid;
    const double dt = cfg.dt_ref;
    const int M = static_cast<int>(std::llround(cfg.T / dt));
    const double sqrt_ds = std::sqrt(grid.delta_s);

    struct Cell {
        double eff = 0.0;
        Predictor variant = Predictor::V0;
    };
    std::vector<Cell> cells;
    for (double eff : eff_turb_ladder)
        for (Predictor v : variants) cells.push_back({eff, v});

    std::vector<std::vector<double>> iters(cells.size());
    for (auto& e : iters) e.resize(cfg.samples);

    parallel_for(static_cast<int>(cells.size()) * cfg.samples, cfg.threads, [&](int idx) {
        const int c = idx / cfg.samples;
        const int j = idx % cfg.samples;
        FiberModel model = cfg.model;
        model.params.beta = cells[c].eff * sqrt_ds;
        const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(j);
        const WienerIncrements noise =
            WienerIncrements::sample(seed, M, grid.N, grid.dim, dt);
        const SimulateResult res = simulate(model, Scheme::Implicit, cfg.T, dt, noise, 1,
                                            cells[c].variant, cfg.opts);
        iters[c][j] = static_cast<double>(res.total_newton_iters) / res.steps;
    });

    std::vector<PredictorRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c)
        rows.push_back({cells[c].eff, cells[c].variant, mean(iters[c])});
    return rows;
}

const char* predictor_name(Predictor v) {
    switch (v) {
    case Predictor::V0: return "v0";
    case Predictor::V1: return "v1";
    case Predictor::V2: return "v2";
    }
    return "?";
}

const char* scheme_name(Scheme s) {
    return s == Scheme::Implicit ? "implicit" : "explicit";
}

namespace {
std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(12);
    return out;
}
} // namespace

void write_convergence_csv(const std::string& path, const ConvergenceTable& table) {
    auto out = open_csv(path);
    out << "dt,mean_err_r,ci_r,mean_err_rv,ci_rv\n";
    for (const auto& r : table.rows)
        out << r.dt << ',' << r.mean_err_r << ',' << r.ci_r << ',' << r.mean_err_rv << ','
            << r.ci_rv << '\n';
}

void write_skip_csv(const std::string& path, const std::vector<SkipRow>& rows) {
    auto out = open_csv(path);
    out << "skip_n,constraint_err,tangency_err,terminal_err,avg_projection_iters\n";
    for (const auto& r : rows)
        out << r.skip_n << ',' << r.constraint_err << ',' << r.tangency_err << ','
            << r.terminal_err << ',' << r.avg_projection_iters << '\n';
}

void write_predictor_csv(const std::string& path, const std::vector<PredictorRow>& rows) {
    auto out = open_csv(path);
    out << "effective_turbulence,variant,avg_newton_iters\n";
    for (const auto& r : rows)
        out << r.effective_turbulence << ',' << predictor_name(r.variant) << ','
            << r.avg_newton_iters << '\n';
}

} // namespace fsde
