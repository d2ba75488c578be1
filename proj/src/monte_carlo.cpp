#include "gbmflow/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gbmflow/parallel.hpp"

namespace gbmflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_times(std::span<const double> ts, const char* what) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] >= 0.0) || !std::isfinite(ts[i])) throw ParameterError(std::string(what) + " must be finite and >= 0");
        if (i > 0 && !(ts[i] > ts[i - 1])) throw ParameterError(std::string(what) + " must be increasing");
    }
}

// Next step end, snapping onto `target` instead of leaving a sliver behind.
double step_end(double t, double dt, double target) {
    const double next = t + dt;
    return next >= target - 1e-9 * dt ? target : next;
}

}  // namespace

void check_time_step(const ModelParams& p, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
    const double scale = std::max({p.lambda_m(), std::abs(p.mu()), p.sigma2()});
    if (!(dt * scale < 0.1)) {
        std::ostringstream msg;
        msg << "dt=" << dt << " too large: dt * max(lambda_m, |mu|, sigma^2) must be < 0.1";
        throw ParameterError(msg.str());
    }
}

std::vector<EnsembleState> simulate_ensemble(const ModelParams& p, std::span<const double> snapshot_times, double dt,
                                             RandomStream& rng) {
    check_time_step(p, dt);
    check_times(snapshot_times, "snapshot times");
    const double mb = p.mu_bar(), sig = p.sigma(), lm = p.lambda_m(), lr = p.lambda_r();
    const double y0 = std::log(p.x0());

    struct Particle {
        double y;
        double death;
    };
    std::vector<Particle> alive{{y0, rng.exponential(lm)}};
    double t = 0.0;
    double next_entry = rng.exponential(lr);

    std::vector<EnsembleState> out;
    out.reserve(snapshot_times.size());
    for (const double target : snapshot_times) {
        while (t < target) {
            const double t1 = step_end(t, dt, target);
            const double h = t1 - t;
            const double drift = mb * h, vol = sig * std::sqrt(h);
            std::size_t keep = 0;
            for (std::size_t i = 0; i < alive.size(); ++i) {
                Particle q = alive[i];
                if (q.death <= t1) continue;
                q.y += drift + vol * rng.normal();
                alive[keep++] = q;
            }
            alive.resize(keep);
            while (next_entry <= t1) {
                const double born = next_entry;
                const double death = born + rng.exponential(lm);
                if (death > t1) {
                    const double age = t1 - born;
                    alive.push_back({y0 + mb * age + sig * std::sqrt(age) * rng.normal(), death});
                }
                next_entry = born + rng.exponential(lr);
            }
            t = t1;
        }
        EnsembleState snap;
        snap.time = target;
        snap.particles.reserve(alive.size());
        for (const auto& q : alive) snap.particles.push_back(std::exp(q.y));
        out.push_back(std::move(snap));
    }
    return out;
}

TimeSeries gillespie_population(const ModelParams& p, std::span<const double> checkpoints, RandomStream& rng) {
    check_times(checkpoints, "checkpoints");
    TimeSeries out;
    out.ts.assign(checkpoints.begin(), checkpoints.end());
    out.values.resize(checkpoints.size());
    const double lr = p.lambda_r(), lm = p.lambda_m();
    std::uint64_t n = 1;
    double t = 0.0;
    std::size_t k = 0;
    while (k < checkpoints.size()) {
        const double total = lr + static_cast<double>(n) * lm;
        const double next = total > 0.0 ? t + rng.exponential(total) : kInf;
        while (k < checkpoints.size() && checkpoints[k] < next) out.values[k++] = static_cast<double>(n);
        if (k == checkpoints.size()) break;
        if (rng.uniform() * total < lr)
            ++n;
        else
            --n;
        t = next;
    }
    return out;
}

namespace {

// Offset of the first crossing within a step, given that it happened. For a bridge from distance d0 to an
// end at |d1| past (or reflected through) the target, u = tau / (h - tau) is inverse Gaussian with mean
// d0 / |d1| and shape d0^2 / (s2 h).
double crossing_offset(double d0, double d1, double s2, double h, RandomStream& rng) {
    const double shape = d0 * d0 / (s2 * h);
    const double a = std::abs(d1);
    const double z = rng.normal();
    double u;
    if (a == 0.0) {
        u = shape / (z * z);
    } else {
        // Michael, Schucany and Haas, written without cancellation.
        const double m = d0 / a;
        const double r = m * z * z / (2.0 * shape);
        const double x = m / (1.0 + r + std::sqrt(r * (2.0 + r)));
        u = rng.uniform() * (m + x) <= m ? x : m * m / x;
    }
    if (!std::isfinite(u)) return h;
    return h * u / (1.0 + u);
}

// Log-space distance to the target shrinks as the searcher climbs.
struct Mover {
    double mb, sig, s2;

    // Advances distance d over h. Returns the crossing offset within the step, or a negative value when the
    // target was not reached.
    double advance(double& d, double h, RandomStream& rng) const {
        const double d1 = d - mb * h - sig * std::sqrt(h) * rng.normal();
        const double d0 = d;
        d = d1;
        if (d1 > 0.0 && !(rng.uniform() < std::exp(-2.0 * d0 * d1 / (s2 * h)))) return -1.0;
        return crossing_offset(d0, d1, s2, h, rng);
    }
};

[[noreturn]] void budget_exhausted(const char* what, double t, std::uint64_t budget) {
    std::ostringstream msg;
    msg << what << ": event budget of " << budget << " searcher-steps exhausted at t=" << t
        << " without reaching the target";
    throw NumericalError(msg.str());
}

}  // namespace

FptSample simulate_fpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double dt, RandomStream& rng,
                            std::uint64_t event_budget) {
    if (!(lambda_r > 0.0) || !std::isfinite(lambda_r)) throw ParameterError("simulate_fpt_open requires lambda_r > 0");
    if (!(lambda_m >= 0.0) || !std::isfinite(lambda_m)) throw ParameterError("lambda_m must be nonnegative");
    check_time_step(s.params().with_rates(lambda_r, lambda_m), dt);
    const double L = s.log_ratio();
    const Mover mover{s.params().mu_bar(), s.params().sigma(), s.params().sigma2()};

    struct Searcher {
        double d;
        double death;
        std::uint64_t generation;
    };
    std::vector<Searcher> live{{L, rng.exponential(lambda_m), 0}};
    std::vector<double> entry_times;
    std::uint64_t entries = 0, work = 0;
    double t = 0.0;
    double next_entry = rng.exponential(lambda_r);

    for (;;) {
        const double t1 = t + dt;
        double best = kInf;
        std::uint64_t best_gen = 0;
        const auto consider = [&](double start, double offset, std::uint64_t gen) {
            const double hit = start + offset;
            if (offset >= 0.0 && hit < best) {
                best = hit;
                best_gen = gen;
            }
        };

        std::size_t keep = 0;
        for (std::size_t i = 0; i < live.size(); ++i) {
            Searcher q = live[i];
            const double end = std::min(t1, q.death);
            if (end > t) consider(t, mover.advance(q.d, end - t, rng), q.generation);
            if (q.death > t1) live[keep++] = q;
        }
        live.resize(keep);
        work += keep + 1;

        entry_times.clear();
        while (next_entry < t1) {
            const double born = next_entry;
            entry_times.push_back(born);
            Searcher q{L, born + rng.exponential(lambda_m), ++entries};
            const double end = std::min(t1, q.death);
            if (end > born) consider(born, mover.advance(q.d, end - born, rng), q.generation);
            if (q.death > t1) live.push_back(q);
            next_entry = born + rng.exponential(lambda_r);
        }

        if (best < kInf) {
            const auto late = std::count_if(entry_times.begin(), entry_times.end(), [&](double e) { return e >= best; });
            return {best, entries - static_cast<std::uint64_t>(late), best_gen};
        }
        if (work > event_budget) budget_exhausted("simulate_fpt_open", t1, event_budget);
        t = t1;
    }
}

FptSample simulate_fpt_reset(const FirstPassageSetup& s, double r, double dt, RandomStream& rng,
                             std::uint64_t event_budget) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ParameterError("reset rate must be nonnegative");
    check_time_step(s.params().with_rates(0.0, 0.0), dt);
    const double L = s.log_ratio();
    const Mover mover{s.params().mu_bar(), s.params().sigma(), s.params().sigma2()};
    double d = L, t = 0.0;
    double next_reset = rng.exponential(r);
    std::uint64_t resets = 0, steps = 0;
    for (;;) {
        const double t1 = t + dt;
        double start = t;
        for (;;) {
            const double end = std::min(t1, next_reset);
            if (end > start) {
                const double offset = mover.advance(d, end - start, rng);
                if (offset >= 0.0) return {start + offset, resets, resets};
            }
            if (next_reset >= t1) break;
            d = L;
            ++resets;
            start = next_reset;
            next_reset += rng.exponential(r);
        }
        if (++steps > event_budget) budget_exhausted("simulate_fpt_reset", t1, event_budget);
        t = t1;
    }
}

std::vector<FptSample> sample_fpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double dt,
                                       std::size_t runs, RngSpec base, unsigned threads) {
    std::vector<FptSample> out(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        RandomStream rng(base.with_stream(base.stream_index + i));
        out[i] = simulate_fpt_open(s, lambda_r, lambda_m, dt, rng);
    });
    return out;
}

std::vector<FptSample> sample_fpt_reset(const FirstPassageSetup& s, double r, double dt, std::size_t runs,
                                        RngSpec base, unsigned threads) {
    std::vector<FptSample> out(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        RandomStream rng(base.with_stream(base.stream_index + i));
        out[i] = simulate_fpt_reset(s, r, dt, rng);
    });
    return out;
}

std::vector<double> hit_times(const std::vector<FptSample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& x : samples) out.push_back(x.hit_time);
    return out;
}

PopulationEstimate population_mean(const ModelParams& p, std::span<const double> checkpoints, std::size_t runs,
                                   RngSpec base, unsigned threads) {
    if (runs == 0) throw ParameterError("population_mean needs at least one run");
    std::vector<TimeSeries> paths(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        RandomStream rng(base.with_stream(base.stream_index + i));
        paths[i] = gillespie_population(p, checkpoints, rng);
    });
    PopulationEstimate out;
    out.ts.assign(checkpoints.begin(), checkpoints.end());
    std::vector<double> column(runs);
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        for (std::size_t i = 0; i < runs; ++i) column[i] = paths[i].values[k];
        out.mean.push_back(mean_estimate(column));
    }
    return out;
}

EnsembleSummary ensemble_statistics(const ModelParams& p, std::span<const double> snapshot_times, double dt,
                                    std::size_t ensembles, RngSpec base, unsigned threads, bool keep_samples) {
    if (ensembles == 0) throw ParameterError("ensemble_statistics needs at least one ensemble");
    check_time_step(p, dt);
    const std::size_t m = snapshot_times.size();
    // Per ensemble and snapshot: count, sum x, sum (x-x0)^2, sum log x, sum (log x - log x0)^2.
    std::vector<std::array<double, 5>> sums(ensembles * m);
    std::vector<std::vector<EnsembleState>> kept(keep_samples ? ensembles : 0);
    const double x0 = p.x0(), l0 = std::log(x0);
    parallel_for(ensembles, threads, [&](std::size_t i) {
        RandomStream rng(base.with_stream(base.stream_index + i));
        auto states = simulate_ensemble(p, snapshot_times, dt, rng);
        for (std::size_t k = 0; k < m; ++k) {
            std::array<double, 5> acc{};
            for (double x : states[k].particles) {
                const double lx = std::log(x);
                acc[0] += 1.0;
                acc[1] += x;
                acc[2] += (x - x0) * (x - x0);
                acc[3] += lx;
                acc[4] += (lx - l0) * (lx - l0);
            }
            sums[i * m + k] = acc;
        }
        if (keep_samples) kept[i] = std::move(states);
    });

    EnsembleSummary out;
    out.ts.assign(snapshot_times.begin(), snapshot_times.end());
    std::vector<double> count(ensembles), col(ensembles);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < ensembles; ++i) count[i] = sums[i * m + k][0];
        out.population.push_back(mean_estimate(count));
        auto ratio = [&](std::size_t j) {
            for (std::size_t i = 0; i < ensembles; ++i) col[i] = sums[i * m + k][j];
            return ratio_estimate(col, count);
        };
        out.mean.push_back(ratio(1));
        out.msd.push_back(ratio(2));
        out.log_mean.push_back(ratio(3));
        out.log_msd.push_back(ratio(4));
        if (keep_samples) {
            std::vector<double> pooled;
            for (const auto& states : kept) pooled.insert(pooled.end(), states[k].particles.begin(), states[k].particles.end());
            out.samples.push_back(std::move(pooled));
        }
    }
    return out;
}

}  // namespace gbmflow
