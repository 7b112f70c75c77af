#pragma once

#include "molcomm/channel.hpp"
#include "molcomm/observations.hpp"
#include "molcomm/random.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace molcomm {

enum class SourceMode {
    Point,   // every molecule starts at the transmitter
    Lattice, // 1 nm cubic lattice around the transmitter, nearest sites first
};

enum class Propagation {
    /// Move and degrade every molecule at every step.
    PerStep,
    /// Jump straight between recorded steps with the summed displacement and
    /// compounded survival. Same distribution as PerStep at the recorded steps.
    SampleSkip,
};

inline constexpr double kLatticePitch = 1e-9;

struct SimConfig {
    ChannelParams params;
    double time_step = 1e-4;
    int steps = 100;
    /// 1-based step indices at which the receiver counts molecules; strictly
    /// increasing. Counts are taken after the move and degradation of a step.
    std::vector<int> sample_steps;
    SourceMode source = SourceMode::Lattice;
    Propagation propagation = Propagation::PerStep;
    std::uint64_t seed = 1;

    /// Throws ConfigError. Requires time_step > 0, 0 <= k dt < 1, D >= 0 and
    /// sample steps within [1, steps].
    void validate() const;
    /// Absolute sample times (release time + step * dt).
    std::vector<double> sample_times() const;
};

struct TrialResult {
    std::vector<std::int64_t> counts;
    std::int64_t survivors = 0;

    bool operator==(const TrialResult&) const = default;
};

struct Vec3 {
    double x, y, z;
};

/// Number of released molecules (N rounded to the nearest integer).
std::int64_t released_count(const ChannelParams& p);

std::vector<Vec3> init_source(const SimConfig& cfg);

/// Moves every position through `steps` drift-diffusion steps of length dt,
/// without degradation.
void advance(std::span<Vec3> positions, const ChannelParams& p, double dt, int steps, Rng& stream);

TrialResult run_trial(const SimConfig& cfg, Rng& stream);
/// Same, starting from positions returned by init_source(cfg); avoids
/// rebuilding the lattice for every trial.
TrialResult run_trial(const SimConfig& cfg, std::span<const Vec3> start, Rng& stream);

/// Trial i runs on derive_stream(master_seed, i); the output is independent
/// of `threads` (0 = hardware concurrency).
std::vector<TrialResult> run_ensemble(const SimConfig& cfg, int n_trials, std::uint64_t master_seed,
                                      int threads = 0);

/// Independent Poisson counts with means expected_observations(p, t_m).
ObservationSeries poisson_sample(const ChannelParams& p, std::span<const double> times, Rng& stream);

/// Maps sample times (relative to release) onto step indices; throws
/// ConfigError when a time is off the step grid by more than dt/2 * 1e-6.
std::vector<int> snap_to_steps(std::span<const double> elapsed_times, double time_step);

} // namespace molcomm
