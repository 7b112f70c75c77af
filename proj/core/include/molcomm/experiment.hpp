#pragma once

#include "molcomm/channel.hpp"
#include "molcomm/fisher.hpp"
#include "molcomm/ml.hpp"
#include "molcomm/peak.hpp"
#include "molcomm/results.hpp"
#include "molcomm/sim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace molcomm {

enum class SamplingVariant {
    /// M = 1 samples at 2 ms; otherwise M equally spaced samples ending at 10 ms.
    Default,
    /// M = 2 samples at 2 and 3 ms; every other M as Default, which must
    /// then contain 2 ms.
    Anchored,
};

struct SamplingScheme {
    int samples = 0;
    /// Elapsed times after release, strictly increasing, in seconds.
    std::vector<double> times;
};

/// Throws ConfigError for M < 1 or an anchored M whose grid misses 2 ms.
SamplingScheme build_scheme(int samples, SamplingVariant variant);

enum class ExperimentKind { Impulse, Crlb, Estimate, Peak };
enum class Generator { Poisson, Particle };
enum class EstimatorKind { MlGrid, MlNewton, MlAnalytic, PeakTime, PeakValue, PeakTimeValue };

std::string_view experiment_name(ExperimentKind kind);
std::string_view generator_name(Generator g);
std::string_view estimator_name(EstimatorKind e);
std::string_view sampling_variant_name(SamplingVariant v);
std::string_view peak_target_name(PeakTarget t);
Generator parse_generator(std::string_view name);
EstimatorKind parse_estimator(std::string_view name);
SamplingVariant parse_sampling_variant(std::string_view name);
PeakTarget parse_peak_target(std::string_view name);
bool is_peak_estimator(EstimatorKind e);

inline constexpr std::string_view kSamplesVariable = "samples";

struct SimulationSettings {
    double time_step = 1e-4;
    int steps = 100;
    SourceMode source = SourceMode::Lattice;
    Propagation propagation = Propagation::PerStep;
    /// Impulse validation records these 1-based steps; empty means all.
    std::vector<int> record_steps;
};

struct SweepSpec {
    ExperimentKind kind = ExperimentKind::Crlb;
    ChannelParams truth;

    /// kSamplesVariable or a parameter name.
    std::string sweep_variable{kSamplesVariable};
    /// Empty means a single point at the truth.
    std::vector<double> sweep_values;
    /// Sample counts tried at every sweep point when the variable is not M.
    std::vector<int> samples{100};
    SamplingVariant variant = SamplingVariant::Default;

    std::vector<ParamId> unknowns{ParamId::Distance};
    std::vector<EstimatorKind> estimators;
    std::map<ParamId, ParamBounds> bounds;
    /// Empty `points` selects GridSpec::defaults.
    GridSpec grid;
    NewtonOptions newton;

    std::vector<int> windows{7};
    std::vector<PeakTarget> peak_targets{PeakTarget::Distance};

    SimulationSettings simulation;
    Generator generator = Generator::Poisson;
    /// Unset means 1000 for impulse validation and 10000 otherwise.
    std::optional<int> trials;
    std::uint64_t seed = 1;
    /// Worker count; 0 uses every core. Never affects results.
    int threads = 0;
    std::map<ParamId, double> references;

    int trial_count() const;
    /// The configured estimators, or the defaults of the experiment kind.
    std::vector<EstimatorKind> resolved_estimators() const;
    /// Throws ConfigError.
    void validate() const;
};

/// Bound on one quantity at a sweep point. An empty `crlb` with `defined`
/// set means the bound does not exist.
struct BoundEntry {
    std::string parameter;
    bool defined = true;
    std::optional<double> crlb;
    std::optional<double> normalized;
};

/// Error statistics of one estimator for one quantity. Empty MSE fields mean
/// no trial produced a valid estimate.
struct EstimateEntry {
    std::string estimator;
    std::string parameter;
    std::optional<double> mse;
    std::optional<double> mse_normalized;
    int failures = 0;
};

/// One output line of the CRLB, estimator and peak sweeps.
struct SweepRow {
    double swept = 0.0;
    int samples = 0;
    int window = 0; // peak sweeps only
    std::vector<BoundEntry> bounds;
    double condition_number = 0.0;
    bool singular = false;
    std::vector<EstimateEntry> estimates;
    int trials = 0;
};

struct ImpulseRow {
    double swept = 0.0;
    int step = 0;
    double time = 0.0; // elapsed since release
    double expected = 0.0;
    double sim_mean = 0.0;
    double sim_se = 0.0;
    std::optional<double> rel_deviation;
    /// Particle generator only.
    std::optional<double> survivor_fraction;
    int trials = 0;
};

std::vector<SweepRow> run_crlb_sweep(const SweepSpec& spec);
std::vector<SweepRow> run_estimator_sweep(const SweepSpec& spec);
std::vector<SweepRow> run_peak_sweep(const SweepSpec& spec);
std::vector<ImpulseRow> run_impulse_validation(const SweepSpec& spec);

ResultTable sweep_table(const SweepSpec& spec, const std::vector<SweepRow>& rows);
ResultTable impulse_table(const SweepSpec& spec, const std::vector<ImpulseRow>& rows);

/// Runs the experiment selected by spec.kind and tabulates it.
ResultTable run_experiment(const SweepSpec& spec);

std::string_view library_version();

} // namespace molcomm
