#include "gbmflow/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbmflow/ensemble.hpp"
#include "gbmflow/first_passage.hpp"
#include "gbmflow/io.hpp"
#include "gbmflow/model.hpp"
#include "gbmflow/monte_carlo.hpp"
#include "gbmflow/stats.hpp"

namespace gbmflow {

namespace {

using json = nlohmann::ordered_json;

struct ModelFlags {
    double mu = 0.0;
    double sigma = 0.0;
    double x0 = 0.0;
    double lambda_r = 0.0;
    double lambda_m = 0.0;

    ModelParams build() const { return ModelParams(mu, sigma, x0, lambda_r, lambda_m); }
};

struct McFlags {
    bool enabled = false;
    std::size_t paths = 0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::optional<double> dt;
};

struct GridFlags {
    std::optional<double> lo, hi;
    std::size_t points = 400;
    bool log_spaced = true;
};

// Shared state for one invocation.
struct Context {
    std::vector<std::string> argv;
    std::string command;
    std::string out;
    ModelFlags model;
    McFlags mc;
    std::ostream* log = nullptr;
};

void add_model_flags(CLI::App* app, ModelFlags& m, bool rates = true) {
    app->add_option("--mu", m.mu, "drift mu")->required();
    app->add_option("--sigma", m.sigma, "volatility sigma (not sigma^2)")->required();
    app->add_option("--x0", m.x0, "entry and initial value x0")->required();
    if (rates) {
        app->add_option("--lambda-r", m.lambda_r, "entry rate")->capture_default_str();
        app->add_option("--lambda-m", m.lambda_m, "per-unit exit rate")->capture_default_str();
    }
}

void add_out_flag(CLI::App* app, std::string& out) {
    app->add_option("--out", out, "CSV output path; a .manifest.json is written next to it")->required();
}

void add_mc_flags(CLI::App* app, McFlags& mc, std::size_t default_paths, bool switchable = true) {
    mc.paths = default_paths;
    if (switchable) app->add_flag("--mc", mc.enabled, "add Monte Carlo columns");
    app->add_option("--paths,--runs", mc.paths, "independent Monte Carlo runs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seed", mc.seed, "master seed")->capture_default_str();
    app->add_option("--threads", mc.threads, "worker threads (0 = all cores)")->capture_default_str();
    app->add_option("--dt", mc.dt, "simulation time step");
}

void add_grid_flags(CLI::App* app, GridFlags& g, const char* lo, const char* hi) {
    app->add_option(lo, g.lo, "lower end of the grid");
    app->add_option(hi, g.hi, "upper end of the grid");
    app->add_option("--points", g.points, "grid points")->capture_default_str()->check(CLI::Range(2, 10'000'000));
    app->add_flag("--log-grid,!--linear-grid", g.log_spaced, "log-spaced grid (default) or linear");
}

json params_json(const ModelParams& p, bool rates = true) {
    json j;
    j["mu"] = p.mu();
    j["sigma"] = p.sigma();
    j["sigma2"] = p.sigma2();
    j["x0"] = p.x0();
    if (rates) {
        j["lambda_r"] = p.lambda_r();
        j["lambda_m"] = p.lambda_m();
    }
    j["mu_bar"] = p.mu_bar();
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

json make_manifest(const Context& ctx, const json& params) {
    json m;
    m["command"] = ctx.command;
    m["argv"] = ctx.argv;
    m["params"] = params;
    m["seed"] = ctx.mc.enabled ? json(ctx.mc.seed) : json(nullptr);
    m["n_paths"] = ctx.mc.enabled ? ctx.mc.paths : 0;
    m["grid"] = json::object();
    m["tool_version"] = kToolVersion;
    m["timestamp"] = utc_timestamp();
    return m;
}

json grid_json(double lo, double hi, std::size_t points, bool log_spaced, const char* variable) {
    json g;
    g["variable"] = variable;
    g["lo"] = lo;
    g["hi"] = hi;
    g["points"] = points;
    g["log_spaced"] = log_spaced;
    return g;
}

const char* boundary_name(BoundaryFlag b) {
    switch (b) {
        case BoundaryFlag::lower: return "lower";
        case BoundaryFlag::upper: return "upper";
        default: return "interior";
    }
}

void emit(const Context& ctx, const CsvTable& table, json manifest, const json* summary = nullptr) {
    const std::filesystem::path out(ctx.out);
    const auto manifest_path = sibling_path(out, ".manifest.json");
    manifest["outputs"] = json::array({out.string(), manifest_path.string()});
    if (summary) manifest["outputs"].push_back(sibling_path(out, ".summary.json").string());
    write_atomic(out, table.render());
    if (summary) write_atomic(sibling_path(out, ".summary.json"), summary->dump(2) + "\n");
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    if (ctx.log) *ctx.log << "wrote " << out.string() << " (" << table.rows() << " rows)\n";
}

double default_dt(const ModelParams& p, double preferred) {
    const double scale = std::max({p.lambda_m(), std::abs(p.mu()), p.sigma2()});
    return std::min(preferred, 0.099 / scale);
}

// Bin edges halfway between grid points (geometrically for log grids), so the
// histogram is evaluated at the grid itself.
std::vector<double> edges_around(const std::vector<double>& xs, bool log_spaced) {
    if (xs.size() < 2) throw ParameterError("histogram grid needs at least two points");
    std::vector<double> e(xs.size() + 1);
    for (std::size_t i = 1; i < xs.size(); ++i)
        e[i] = log_spaced ? std::sqrt(xs[i - 1] * xs[i]) : 0.5 * (xs[i - 1] + xs[i]);
    if (log_spaced) {
        e.front() = xs.front() * xs.front() / e[1];
        e.back() = xs.back() * xs.back() / e[xs.size() - 1];
    } else {
        e.front() = std::max(0.0, xs.front() - (e[1] - xs.front()));
        e.back() = xs.back() + (xs.back() - e[xs.size() - 1]);
    }
    return e;
}

std::vector<double> time_grid(double t_max, std::size_t points, bool include_zero) {
    if (!(t_max > 0.0)) throw ParameterError("--t-max must be positive");
    if (points < 2) throw ParameterError("--points must be at least 2");
    std::vector<double> ts(points);
    for (std::size_t i = 0; i < points; ++i) {
        ts[i] = include_zero ? t_max * static_cast<double>(i) / static_cast<double>(points - 1)
                             : t_max * static_cast<double>(i + 1) / static_cast<double>(points);
    }
    return ts;
}

std::vector<double> positive_times(const std::vector<double>& ts) {
    std::vector<double> out;
    for (double t : ts)
        if (t > 0.0) out.push_back(t);
    return out;
}

// MC estimates aligned with a grid that may start at t = 0, where the value is known exactly.
std::pair<std::vector<double>, std::vector<double>> align_with_zero(const std::vector<double>& ts,
                                                                    const std::vector<MeanEstimate>& est,
                                                                    double value_at_zero) {
    std::vector<double> v, se;
    std::size_t k = 0;
    for (double t : ts) {
        if (t == 0.0) {
            v.push_back(value_at_zero);
            se.push_back(0.0);
        } else {
            v.push_back(est[k].mean);
            se.push_back(est[k].se);
            ++k;
        }
    }
    return {v, se};
}

// ----- commands -------------------------------------------------------------

struct StationaryFlags {
    GridFlags grid;
    std::optional<double> t_relax;
};

void cmd_stationary(Context& ctx, const StationaryFlags& f) {
    const auto p = ctx.model.build();
    p.require_stationary();
    std::vector<double> xs;
    if (f.grid.lo || f.grid.hi) {
        const double lo = f.grid.lo.value_or(p.x0() / 1e3), hi = f.grid.hi.value_or(p.x0() * 1e3);
        xs = make_grid({lo, hi, f.grid.points, f.grid.log_spaced});
    } else {
        xs = default_stationary_grid(p, f.grid.points, f.grid.log_spaced);
    }
    CsvTable table;
    table.add_column("x", xs);
    table.add_column("f_analytic", stationary_density(p, xs).values);
    auto manifest = make_manifest(ctx, params_json(p));
    manifest["grid"] = grid_json(xs.front(), xs.back(), xs.size(), f.grid.log_spaced, "x");
    if (ctx.mc.enabled) {
        const double t = f.t_relax.value_or(20.0 / p.lambda_m());
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.5));
        const std::vector<double> snap{t};
        auto sum = ensemble_statistics(p, snap, dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads, true);
        const auto est = estimate_density(sum.samples[0], edges_around(xs, f.grid.log_spaced),
                                          DensityNormalization::sample_count, f.grid.log_spaced);
        table.add_column("f_mc", est.density);
        table.add_column("f_mc_se", est.se);
        manifest["mc"] = {{"t_relax", t}, {"dt", dt}, {"particles", est.total}};
    }
    emit(ctx, table, manifest);
}

struct DensityFlags {
    GridFlags grid;
    double t = 0.0;
};

void cmd_density(Context& ctx, const DensityFlags& f) {
    const auto p = ctx.model.build();
    const double lo = f.grid.lo.value_or(p.x0() / 100.0), hi = f.grid.hi.value_or(p.x0() * 100.0);
    const auto xs = make_grid({lo, hi, f.grid.points, f.grid.log_spaced});
    CsvTable table;
    table.add_column("x", xs);
    table.add_column("f_analytic", density_finite_time(p, f.t, xs).values);
    auto params = params_json(p);
    params["t"] = f.t;
    auto manifest = make_manifest(ctx, params);
    manifest["grid"] = grid_json(lo, hi, xs.size(), f.grid.log_spaced, "x");
    if (ctx.mc.enabled) {
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.1));
        const std::vector<double> snap{f.t};
        auto sum = ensemble_statistics(p, snap, dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads, true);
        const auto est = estimate_density(sum.samples[0], edges_around(xs, f.grid.log_spaced),
                                          DensityNormalization::sample_count, f.grid.log_spaced);
        table.add_column("f_mc", est.density);
        table.add_column("f_mc_se", est.se);
        manifest["mc"] = {{"dt", dt}, {"particles", est.total}};
    }
    emit(ctx, table, manifest);
}

struct TimeFlags {
    double t_max = 50.0;
    std::size_t points = 201;
};

void add_time_flags(CLI::App* app, TimeFlags& f, double default_t_max) {
    f.t_max = default_t_max;
    app->add_option("--t-max", f.t_max, "last time on the grid")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--points", f.points, "time points")->capture_default_str()->check(CLI::Range(2, 10'000'000));
}

json moment_json(const ModelParams& p, int n) {
    if (!(p.lambda_m() > 0.0)) return json(nullptr);
    const auto m = stationary_moment(p, n);
    json j;
    j["beta"] = beta(p, n);
    switch (m.regime) {
        case MomentRegime::saturating:
            j["regime"] = "saturating";
            j["value"] = m.value;
            break;
        case MomentRegime::linear: j["regime"] = "linear"; break;
        case MomentRegime::exponential:
            j["regime"] = "exponential";
            j["growth_rate"] = m.growth_rate;
            break;
    }
    return j;
}

struct MomentFlags {
    TimeFlags time;
    std::optional<int> lambda_m_beta;
};

void cmd_moments(Context& ctx, const MomentFlags& f) {
    auto p = ctx.model.build();
    if (f.lambda_m_beta) {
        if (*f.lambda_m_beta < 1) throw ParameterError("--lambda-m-beta must be >= 1");
        p = p.with_rates(p.lambda_r(), beta(p, *f.lambda_m_beta));
    }
    const auto ts = time_grid(f.time.t_max, f.time.points, true);
    std::vector<double> mean, msd_v;
    for (double t : ts) {
        mean.push_back(moment(p, 1, t));
        msd_v.push_back(msd(p, t));
    }
    CsvTable table;
    table.add_column("t", ts);
    table.add_column("mean", mean);
    table.add_column("msd", msd_v);
    auto manifest = make_manifest(ctx, params_json(p));
    manifest["grid"] = grid_json(0.0, f.time.t_max, ts.size(), false, "t");
    manifest["results"] = {{"first_moment", moment_json(p, 1)}, {"second_moment", moment_json(p, 2)}};
    if (ctx.mc.enabled) {
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.1));
        const auto pos = positive_times(ts);
        const auto sum = ensemble_statistics(p, pos, dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads);
        auto [m, mse] = align_with_zero(ts, sum.mean, p.x0());
        auto [s, sse] = align_with_zero(ts, sum.msd, 0.0);
        table.add_column("mean_mc", m);
        table.add_column("mean_se", mse);
        table.add_column("msd_mc", s);
        table.add_column("msd_se", sse);
        manifest["mc"] = {{"dt", dt}};
    }
    emit(ctx, table, manifest);
}

void cmd_logmoments(Context& ctx, const TimeFlags& f) {
    const auto p = ctx.model.build();
    const auto ts = time_grid(f.t_max, f.points, true);
    std::vector<double> lm1, lmsd;
    for (double t : ts) {
        lm1.push_back(log_moment(p, 1, t));
        lmsd.push_back(log_msd(p, t));
    }
    CsvTable table;
    table.add_column("t", ts);
    table.add_column("log_mean", lm1);
    table.add_column("log_msd", lmsd);
    auto manifest = make_manifest(ctx, params_json(p));
    manifest["grid"] = grid_json(0.0, f.t_max, ts.size(), false, "t");
    json summary;
    summary["params"] = params_json(p);
    if (p.lambda_m() > 0.0) {
        const double mb = p.mu_bar(), lm = p.lambda_m();
        summary["log_mean_asymptote"] = std::log(p.x0()) + mb / lm;
        summary["log_msd_asymptote"] = p.sigma2() / lm + 2.0 * mb * mb / (lm * lm);
    } else {
        summary["log_mean_asymptote"] = nullptr;
        summary["log_msd_asymptote"] = nullptr;
    }
    manifest["results"] = summary;
    if (ctx.mc.enabled) {
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.1));
        const auto pos = positive_times(ts);
        const auto sum = ensemble_statistics(p, pos, dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads);
        auto [m, mse] = align_with_zero(ts, sum.log_mean, std::log(p.x0()));
        auto [s, sse] = align_with_zero(ts, sum.log_msd, 0.0);
        table.add_column("log_mean_mc", m);
        table.add_column("log_mean_se", mse);
        table.add_column("log_msd_mc", s);
        table.add_column("log_msd_se", sse);
        manifest["mc"] = {{"dt", dt}};
    }
    emit(ctx, table, manifest, &summary);
}

void cmd_boundary(Context& ctx, const TimeFlags& f) {
    const auto p = ctx.model.build();
    const auto ts = time_grid(f.t_max, f.points, true);
    std::vector<double> lo, hi;
    for (double t : ts) {
        const auto [a, b] = core_boundary(p, t);
        lo.push_back(a);
        hi.push_back(b);
    }
    CsvTable table;
    table.add_column("t", ts);
    table.add_column("x_low", lo);
    table.add_column("x_high", hi);
    auto manifest = make_manifest(ctx, params_json(p));
    manifest["grid"] = grid_json(0.0, f.t_max, ts.size(), false, "t");
    const auto l = ldf_params(p);
    manifest["results"] = {{"a", l.a}, {"y_star", l.y_star}};
    emit(ctx, table, manifest);
}

struct FptFlags {
    TimeFlags time;
    std::string mode = "free";
    double x_target = 0.0;
};

void cmd_fpt(Context& ctx, const FptFlags& f) {
    const auto p = ctx.model.build();
    const FirstPassageSetup s(p, f.x_target);
    const auto ts = time_grid(f.time.t_max, f.time.points, false);
    std::vector<double> dens;
    const bool open = f.mode == "open";
    std::optional<EntryExitSearch> search;
    if (open) search.emplace(s, p.lambda_r(), p.lambda_m());
    for (double t : ts) dens.push_back(open ? search->density(t) : fpt_density_free(s, t));
    CsvTable table;
    table.add_column("t", ts);
    table.add_column("p_analytic", dens);
    auto params = params_json(p);
    params["x_target"] = f.x_target;
    params["mode"] = f.mode;
    auto manifest = make_manifest(ctx, params);
    manifest["grid"] = grid_json(ts.front(), ts.back(), ts.size(), false, "t");
    if (ctx.mc.enabled) {
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.01));
        std::vector<FptSample> samples;
        if (open) {
            samples = sample_fpt_open(s, p.lambda_r(), p.lambda_m(), dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads);
        } else {
            if (p.mu_bar() < 0.0) throw ParameterError("free-mode simulation needs mu - sigma^2/2 >= 0 (hitting is not certain)");
            samples = sample_fpt_reset(s, 0.0, dt, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads);
        }
        const auto est = estimate_density(hit_times(samples), edges_around(ts, false), DensityNormalization::sample_count, false);
        table.add_column("p_mc", est.density);
        table.add_column("p_mc_se", est.se);
        manifest["mc"] = {{"dt", dt}};
    }
    emit(ctx, table, manifest);
}

struct MfptFlags {
    double x_target = 0.0;
    double alpha = 10.0;
    double lm_min = 0.01, lm_max = 2.0;
    int points = 41;
    bool locus = false;
    double alpha_min = 2.0, alpha_max = 20.0;
    int alpha_points = 19;
};

void cmd_mfpt(Context& ctx, const MfptFlags& f) {
    const auto p = ctx.model.build();
    const FirstPassageSetup s(p, f.x_target);
    const RateBracket bracket{f.lm_min, f.lm_max};
    auto params = params_json(p, false);
    params["x_target"] = f.x_target;
    CsvTable table;
    json summary;
    if (f.locus) {
        if (!(f.alpha_min > 0.0) || !(f.alpha_max > f.alpha_min) || f.alpha_points < 2)
            throw ParameterError("--optimal-locus needs 0 < alpha-min < alpha-max and alpha-points >= 2");
        std::vector<double> alphas, star, tstar, res, flag;
        for (int i = 0; i < f.alpha_points; ++i) {
            const double a = f.alpha_min + (f.alpha_max - f.alpha_min) * i / (f.alpha_points - 1);
            const auto r = optimal_exit(s, a, bracket, f.points);
            alphas.push_back(a);
            star.push_back(r.lambda_m_star);
            tstar.push_back(r.mfpt_star);
            res.push_back(r.residual);
            flag.push_back(static_cast<double>(r.boundary));
        }
        table.add_column("alpha", alphas);
        table.add_column("lambda_m_star", star);
        table.add_column("mfpt_star", tstar);
        table.add_column("residual", res);
        table.add_column("boundary", flag);
        summary["params"] = params;
        summary["boundary_codes"] = {{"interior", 0}, {"lower", 1}, {"upper", 2}};
        auto manifest = make_manifest(ctx, params);
        manifest["grid"] = grid_json(f.alpha_min, f.alpha_max, static_cast<std::size_t>(f.alpha_points), false, "alpha");
        manifest["results"] = summary;
        emit(ctx, table, manifest, &summary);
        return;
    }
    if (!(f.alpha > 0.0)) throw ParameterError("--alpha must be positive (lambda_r = alpha lambda_m must not vanish)");
    params["alpha"] = f.alpha;
    const auto r = optimal_exit(s, f.alpha, bracket, f.points);
    table.add_column("lambda_m", r.lambda_m_grid);
    table.add_column("mfpt", r.mfpt);
    auto manifest = make_manifest(ctx, params);
    manifest["grid"] = grid_json(f.lm_min, f.lm_max, r.lambda_m_grid.size(), true, "lambda_m");
    if (ctx.mc.enabled) {
        std::vector<double> mean, se;
        for (std::size_t i = 0; i < r.lambda_m_grid.size(); ++i) {
            const double lm = r.lambda_m_grid[i];
            const double dt = ctx.mc.dt.value_or(default_dt(p.with_rates(f.alpha * lm, lm), 0.01));
            const auto samples = sample_fpt_open(s, f.alpha * lm, lm, dt, ctx.mc.paths,
                                                 {ctx.mc.seed, i * ctx.mc.paths}, ctx.mc.threads);
            const auto m = mean_estimate(hit_times(samples));
            mean.push_back(m.mean);
            se.push_back(m.se);
        }
        table.add_column("mfpt_mc", mean);
        table.add_column("mfpt_se", se);
    }
    summary["params"] = params;
    summary["lambda_m_star"] = r.lambda_m_star;
    summary["mfpt_star"] = r.mfpt_star;
    summary["residual"] = r.residual;
    summary["boundary"] = boundary_name(r.boundary);
    manifest["results"] = summary;
    emit(ctx, table, manifest, &summary);
}

struct SpeedupFlags {
    double x_target = 0.0;
    double alpha_min = 0.5, alpha_max = 4.0;
    int alpha_points = 36;
    double lm_min = 1e-3, lm_max = 10.0;
    double r_min = 0.01, r_max = 5.0;
    double root_lo = 1.0, root_hi = 3.0;
};

void cmd_speedup(Context& ctx, const SpeedupFlags& f) {
    const auto p = ctx.model.build();
    const FirstPassageSetup s(p, f.x_target);
    if (!(f.alpha_min > 0.0) || !(f.alpha_max > f.alpha_min) || f.alpha_points < 2)
        throw ParameterError("need 0 < alpha-min < alpha-max and alpha-points >= 2");
    const RateBracket exit{f.lm_min, f.lm_max}, reset{f.r_min, f.r_max};
    const auto r0 = optimal_reset(s, reset);
    std::vector<double> alphas, eps, star, tstar;
    for (int i = 0; i < f.alpha_points; ++i) {
        const double a = f.alpha_min + (f.alpha_max - f.alpha_min) * i / (f.alpha_points - 1);
        const auto e = optimal_exit(s, a, exit);
        alphas.push_back(a);
        eps.push_back(e.mfpt_star / r0.mfpt_star);
        star.push_back(e.lambda_m_star);
        tstar.push_back(e.mfpt_star);
    }
    CsvTable table;
    table.add_column("alpha", alphas);
    table.add_column("epsilon", eps);
    table.add_column("lambda_m_star", star);
    table.add_column("mfpt_exit_star", tstar);
    auto params = params_json(p, false);
    params["x_target"] = f.x_target;
    json summary;
    summary["params"] = params;
    summary["r_star"] = r0.r_star;
    summary["mfpt_reset_star"] = r0.mfpt_star;
    summary["reset_boundary"] = boundary_name(r0.boundary);
    try {
        summary["alpha_c"] = critical_alpha(s, f.root_lo, f.root_hi, 1e-4, exit, reset);
    } catch (const NumericalError& e) {
        summary["alpha_c"] = nullptr;
        summary["alpha_c_error"] = e.what();
    }
    auto manifest = make_manifest(ctx, params);
    manifest["grid"] = grid_json(f.alpha_min, f.alpha_max, alphas.size(), false, "alpha");
    manifest["results"] = summary;
    emit(ctx, table, manifest, &summary);
}

void cmd_population(Context& ctx, const TimeFlags& f) {
    const auto p = ctx.model.build();
    const auto ts = time_grid(f.t_max, f.points, false);
    const auto est = population_mean(p, ts, ctx.mc.paths, {ctx.mc.seed, 0}, ctx.mc.threads);
    std::vector<double> an, mc, se;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        an.push_back(phi(p, ts[k]));
        mc.push_back(est.mean[k].mean);
        se.push_back(est.mean[k].se);
    }
    CsvTable table;
    table.add_column("t", ts);
    table.add_column("phi_analytic", an);
    table.add_column("phi_gillespie", mc);
    table.add_column("phi_se", se);
    auto manifest = make_manifest(ctx, params_json(p));
    manifest["grid"] = grid_json(ts.front(), ts.back(), ts.size(), false, "t");
    emit(ctx, table, manifest);
}

struct SimulateFlags {
    std::string kind = "ensemble";
    double t = 0.0;
    double x_target = 0.0;
    double r = 0.0;
};

void cmd_simulate(Context& ctx, const SimulateFlags& f) {
    const auto p = ctx.model.build();
    auto params = params_json(p);
    CsvTable table;
    const RngSpec base{ctx.mc.seed, 0};
    if (f.kind == "ensemble") {
        if (!(f.t > 0.0)) throw ParameterError("--t must be positive for ensemble snapshots");
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.1));
        const std::vector<double> snap{f.t};
        std::vector<double> idx, xs;
        for (std::size_t i = 0; i < ctx.mc.paths; ++i) {
            RandomStream rng(base.with_stream(i));
            const auto states = simulate_ensemble(p, snap, dt, rng);
            for (double x : states[0].particles) {
                idx.push_back(static_cast<double>(i));
                xs.push_back(x);
            }
        }
        table.add_column("ensemble", idx);
        table.add_column("x", xs);
        params["t"] = f.t;
        params["dt"] = dt;
    } else {
        const FirstPassageSetup s(p, f.x_target);
        params["x_target"] = f.x_target;
        const double dt = ctx.mc.dt.value_or(default_dt(p, 0.01));
        std::vector<FptSample> samples;
        if (f.kind == "fpt-open") {
            samples = sample_fpt_open(s, p.lambda_r(), p.lambda_m(), dt, ctx.mc.paths, base, ctx.mc.threads);
        } else {
            params["r"] = f.r;
            samples = sample_fpt_reset(s, f.r, dt, ctx.mc.paths, base, ctx.mc.threads);
        }
        std::vector<double> run, hit, used, gen;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            run.push_back(static_cast<double>(i));
            hit.push_back(samples[i].hit_time);
            used.push_back(static_cast<double>(samples[i].n_entries_used));
            gen.push_back(static_cast<double>(samples[i].generation));
        }
        table.add_column("run", run);
        table.add_column("hit_time", hit);
        table.add_column("n_entries_used", used);
        table.add_column("generation", gen);
        params["dt"] = dt;
    }
    params["kind"] = f.kind;
    emit(ctx, table, make_manifest(ctx, params));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"gbmflow: geometric Brownian motion with entry and exit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Context ctx;
    ctx.argv = args;
    ctx.log = &out;
    std::function<void()> action;
    std::map<std::string, McFlags> mc_flags;  // node-stable, one set per subcommand

    StationaryFlags stationary;
    auto* c_st = app.add_subcommand("stationary", "stationary density on an x grid");
    add_model_flags(c_st, ctx.model);
    add_out_flag(c_st, ctx.out);
    add_grid_flags(c_st, stationary.grid, "--x-min", "--x-max");
    add_mc_flags(c_st, mc_flags["stationary"], 1000);
    c_st->add_option("--t-relax", stationary.t_relax, "simulated relaxation time (default 20/lambda_m)");
    c_st->callback([&] { action = [&] { cmd_stationary(ctx, stationary); }; });

    DensityFlags density;
    auto* c_de = app.add_subcommand("density", "finite-time normalized density on an x grid");
    add_model_flags(c_de, ctx.model);
    add_out_flag(c_de, ctx.out);
    add_grid_flags(c_de, density.grid, "--x-min", "--x-max");
    add_mc_flags(c_de, mc_flags["density"], 1000);
    c_de->add_option("--t", density.t, "time")->required()->check(CLI::PositiveNumber);
    c_de->callback([&] { action = [&] { cmd_density(ctx, density); }; });

    MomentFlags moments;
    auto* c_mo = app.add_subcommand("moments", "mean and MSD against time");
    add_model_flags(c_mo, ctx.model);
    add_out_flag(c_mo, ctx.out);
    add_time_flags(c_mo, moments.time, 50.0);
    add_mc_flags(c_mo, mc_flags["moments"], 1000);
    c_mo->add_option("--lambda-m-beta", moments.lambda_m_beta, "set lambda_m to beta(N), the marginal rate of moment N");
    c_mo->callback([&] { action = [&] { cmd_moments(ctx, moments); }; });

    TimeFlags logm;
    auto* c_lo = app.add_subcommand("logmoments", "log-mean and log-MSD against time");
    add_model_flags(c_lo, ctx.model);
    add_out_flag(c_lo, ctx.out);
    add_time_flags(c_lo, logm, 20.0);
    add_mc_flags(c_lo, mc_flags["logmoments"], 500);
    c_lo->callback([&] { action = [&] { cmd_logmoments(ctx, logm); }; });

    TimeFlags bound;
    auto* c_bo = app.add_subcommand("boundary", "inner-core boundary against time");
    add_model_flags(c_bo, ctx.model);
    add_out_flag(c_bo, ctx.out);
    add_time_flags(c_bo, bound, 50.0);
    c_bo->callback([&] { action = [&] { cmd_boundary(ctx, bound); }; });

    FptFlags fpt;
    auto* c_fp = app.add_subcommand("fpt", "first-passage time density, free or with entry and exit");
    add_model_flags(c_fp, ctx.model);
    add_out_flag(c_fp, ctx.out);
    add_time_flags(c_fp, fpt.time, 100.0);
    add_mc_flags(c_fp, mc_flags["fpt"], 100000);
    c_fp->add_option("--mode", fpt.mode, "free | open")->check(CLI::IsMember({"free", "open"}))->capture_default_str();
    c_fp->add_option("--x-target", fpt.x_target, "absorbing target x_T > x0")->required();
    c_fp->callback([&] { action = [&] { cmd_fpt(ctx, fpt); }; });

    MfptFlags mfpt;
    auto* c_mf = app.add_subcommand("mfpt", "MFPT against lambda_m along lambda_r = alpha lambda_m");
    add_model_flags(c_mf, ctx.model, false);
    add_out_flag(c_mf, ctx.out);
    add_mc_flags(c_mf, mc_flags["mfpt"], 100000);
    c_mf->add_option("--x-target", mfpt.x_target, "absorbing target x_T > x0")->required();
    c_mf->add_option("--alpha", mfpt.alpha, "lambda_r / lambda_m")->capture_default_str();
    c_mf->add_option("--lm-min", mfpt.lm_min, "smallest lambda_m")->capture_default_str();
    c_mf->add_option("--lm-max", mfpt.lm_max, "largest lambda_m")->capture_default_str();
    c_mf->add_option("--points", mfpt.points, "log-spaced lambda_m points")->capture_default_str()->check(CLI::Range(3, 100000));
    c_mf->add_flag("--optimal-locus", mfpt.locus, "emit lambda_m* against alpha instead of a scan");
    c_mf->add_option("--alpha-min", mfpt.alpha_min, "locus: first alpha")->capture_default_str();
    c_mf->add_option("--alpha-max", mfpt.alpha_max, "locus: last alpha")->capture_default_str();
    c_mf->add_option("--alpha-points", mfpt.alpha_points, "locus: number of alphas")->capture_default_str();
    c_mf->callback([&] { action = [&] { cmd_mfpt(ctx, mfpt); }; });

    SpeedupFlags speed;
    auto* c_sp = app.add_subcommand("speedup", "speed-up ratio of optimal entry-exit over optimal resetting");
    add_model_flags(c_sp, ctx.model, false);
    add_out_flag(c_sp, ctx.out);
    c_sp->add_option("--x-target", speed.x_target, "absorbing target x_T > x0")->required();
    c_sp->add_option("--alpha-min", speed.alpha_min)->capture_default_str();
    c_sp->add_option("--alpha-max", speed.alpha_max)->capture_default_str();
    c_sp->add_option("--alpha-points", speed.alpha_points)->capture_default_str();
    c_sp->add_option("--lm-min", speed.lm_min, "exit-rate bracket, lower end")->capture_default_str();
    c_sp->add_option("--lm-max", speed.lm_max, "exit-rate bracket, upper end")->capture_default_str();
    c_sp->add_option("--r-min", speed.r_min, "reset-rate bracket, lower end")->capture_default_str();
    c_sp->add_option("--r-max", speed.r_max, "reset-rate bracket, upper end")->capture_default_str();
    c_sp->add_option("--root-lo", speed.root_lo, "alpha_c search, lower end")->capture_default_str();
    c_sp->add_option("--root-hi", speed.root_hi, "alpha_c search, upper end")->capture_default_str();
    c_sp->callback([&] { action = [&] { cmd_speedup(ctx, speed); }; });

    TimeFlags pop;
    auto* c_po = app.add_subcommand("population", "mean population: closed form against Gillespie runs");
    add_model_flags(c_po, ctx.model);
    add_out_flag(c_po, ctx.out);
    pop.points = 10;
    add_time_flags(c_po, pop, 6.0);
    add_mc_flags(c_po, mc_flags["population"], 100000, false);
    c_po->callback([&] { action = [&] { cmd_population(ctx, pop); }; });

    SimulateFlags sim;
    auto* c_si = app.add_subcommand("simulate", "raw Monte Carlo samples");
    add_model_flags(c_si, ctx.model);
    add_out_flag(c_si, ctx.out);
    add_mc_flags(c_si, mc_flags["simulate"], 1000, false);
    c_si->add_option("--kind", sim.kind, "ensemble | fpt-open | fpt-reset")
        ->check(CLI::IsMember({"ensemble", "fpt-open", "fpt-reset"}))
        ->capture_default_str();
    c_si->add_option("--t", sim.t, "ensemble snapshot time");
    c_si->add_option("--x-target", sim.x_target, "target for fpt kinds");
    c_si->add_option("--r", sim.r, "reset rate for fpt-reset")->capture_default_str();
    c_si->callback([&] { action = [&] { cmd_simulate(ctx, sim); }; });

    std::string manifest_path, replay_out;
    auto* c_re = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    c_re->add_option("--manifest", manifest_path, "manifest JSON written by an earlier run")->required()->check(CLI::ExistingFile);
    c_re->add_option("--out", replay_out, "write to this CSV path instead of the recorded one");
    c_re->callback([&] {
        action = [&] {
            std::ifstream in(manifest_path);
            const auto m = json::parse(in);
            auto argv = m.at("argv").get<std::vector<std::string>>();
            if (!replay_out.empty()) {
                for (std::size_t i = 0; i + 1 < argv.size(); ++i)
                    if (argv[i] == "--out") argv[i + 1] = replay_out;
            }
            const int code = run_cli(argv, out, err);
            if (code != kExitOk) throw NumericalError("replayed command exited with code " + std::to_string(code));
        };
    });

    std::vector<const char*> argv{"gbmflow"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }
    for (auto* sub : app.get_subcommands()) ctx.command = sub->get_name();
    if (const auto it = mc_flags.find(ctx.command); it != mc_flags.end()) ctx.mc = it->second;
    if (ctx.command == "population" || ctx.command == "simulate") ctx.mc.enabled = true;

    try {
        action();
        return kExitOk;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed manifest: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace gbmflow
