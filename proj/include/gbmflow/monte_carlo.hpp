#pragma once

// Stochastic simulators used as oracles for the analytic results:
// open-population GBM ensembles, exact birth-death population counts,
// multi-searcher first passage with exits and recruitment, and a single
// searcher under stochastic resetting.

#include <cstdint>
#include <span>
#include <vector>

#include "gbmflow/first_passage.hpp"
#include "gbmflow/model.hpp"
#include "gbmflow/rng.hpp"
#include "gbmflow/stats.hpp"

namespace gbmflow {

struct EnsembleState {
    double time = 0.0;
    std::vector<double> particles; ///< current values, all > 0; may be empty
};

/// Throws ParameterError unless dt > 0 and dt * max(lambda_m, |mu|, sigma^2) < 0.1.
void check_time_step(const ModelParams& p, double dt);

/**
 * One ensemble started from a single particle at x0, returned at each snapshot time.
 *
 * Particles move by exact log-normal increments over steps of at most dt.
 * Exit times are exponential clocks drawn at entry and entries arrive with
 * exponential gaps; an entrant is advanced over the remainder of its step,
 * so neither rate introduces a discretization error.
 */
std::vector<EnsembleState> simulate_ensemble(const ModelParams& p, std::span<const double> snapshot_times, double dt,
                                             RandomStream& rng);

/// Exact birth-death trajectory (n -> n+1 at lambda_r, n -> n-1 at n lambda_m) from n = 1, read at the checkpoints.
TimeSeries gillespie_population(const ModelParams& p, std::span<const double> checkpoints, RandomStream& rng);

struct FptSample {
    double hit_time = 0.0;
    std::uint64_t n_entries_used = 0; ///< recruits (or resets) that happened before the hit
    std::uint64_t generation = 0;     ///< 0 for the initial searcher, k for the k-th recruit or k-th reset
};

/// Searcher-steps allowed per run before a NumericalError is raised.
inline constexpr std::uint64_t kDefaultEventBudget = 200'000'000;

/**
 * Time for the first of a growing team of searchers to reach x_T.
 *
 * Searchers live in log-space, move by exact Gaussian increments, die after
 * exponential(lambda_m) lifetimes, and recruits enter at x0 with
 * exponential(lambda_r) gaps. A step that ends below the target still
 * counts as a hit with the Brownian-bridge crossing probability
 * exp(-2 d1 d2 / (sigma^2 h)). The hit time inside the step is drawn from
 * the bridge crossing-time law, so the result carries no time lattice.
 */
FptSample simulate_fpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double dt, RandomStream& rng,
                            std::uint64_t event_budget = kDefaultEventBudget);

/// Single searcher that teleports to x0 at exponential(r) epochs; r = 0 gives plain GBM.
FptSample simulate_fpt_reset(const FirstPassageSetup& s, double r, double dt, RandomStream& rng,
                             std::uint64_t event_budget = kDefaultEventBudget);

// Batch drivers. Run i uses the stream base.with_stream(base.stream_index + i),
// and results are kept in run order, so output is independent of `threads`.

std::vector<FptSample> sample_fpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double dt,
                                       std::size_t runs, RngSpec base, unsigned threads = 0);

std::vector<FptSample> sample_fpt_reset(const FirstPassageSetup& s, double r, double dt, std::size_t runs,
                                        RngSpec base, unsigned threads = 0);

std::vector<double> hit_times(const std::vector<FptSample>& samples);

struct PopulationEstimate {
    std::vector<double> ts;
    std::vector<MeanEstimate> mean;
};

PopulationEstimate population_mean(const ModelParams& p, std::span<const double> checkpoints, std::size_t runs,
                                   RngSpec base, unsigned threads = 0);

/// Ensemble averages at each snapshot, pooled over independent ensembles with ratio estimators.
struct EnsembleSummary {
    std::vector<double> ts;
    std::vector<MeanEstimate> population;
    std::vector<MeanEstimate> mean;     ///< <x>
    std::vector<MeanEstimate> msd;      ///< <(x - x0)^2>
    std::vector<MeanEstimate> log_mean; ///< <log x>
    std::vector<MeanEstimate> log_msd;  ///< <(log x - log x0)^2>
    /// Pooled particle values per snapshot, filled only when requested.
    std::vector<std::vector<double>> samples;
};

EnsembleSummary ensemble_statistics(const ModelParams& p, std::span<const double> snapshot_times, double dt,
                                    std::size_t ensembles, RngSpec base, unsigned threads = 0,
                                    bool keep_samples = false);

}  // namespace gbmflow
