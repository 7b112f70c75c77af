#pragma once

#include "molcomm/channel.hpp"
#include "molcomm/fisher.hpp"
#include "molcomm/observations.hpp"
#include "molcomm/random.hpp"

#include <span>
#include <string>
#include <vector>

namespace molcomm {

/// Substitute for a zero count in closed-form single-sample estimates.
inline constexpr double kZeroCountSubstitute = 0.5;

struct ParamBounds {
    double min;
    double max;
};

/// Grid-search limits of the reference environment. The release-time upper
/// limit is the first sample time and is treated as open.
ParamBounds default_bounds(ParamId id, double first_sample_time);

/// Diffusion and molecule count are searched on a logarithmic grid.
bool searched_logarithmically(ParamId id);

struct EstimationProblem {
    UnknownSet unknowns;
    /// Known values; slots of unknown parameters hold initial guesses.
    ChannelParams known;
    /// One entry per unknown, aligned with `unknowns`.
    std::vector<ParamBounds> bounds;

    static EstimationProblem with_default_bounds(UnknownSet unknowns, const ChannelParams& known,
                                                 const ObservationSeries& obs);
    /// Throws UsageError on inconsistent bounds.
    void validate(const ObservationSeries& obs) const;
};

enum class EstimateMethod { AnalyticalSingleSample, NewtonRaphson, GridSearch };

struct EstimateReport {
    UnknownSet unknowns;
    std::vector<double> values;
    EstimateMethod method;
    bool converged = false;
    int iterations = 0;
    bool valid = false;
    std::string notes{};
    double log_likelihood = 0.0;

    double value(ParamId id) const;
};

struct ScalarEstimate {
    double value;
    bool valid;
};

/// All real-valued solutions of a single-parameter inversion.
struct CandidateSet {
    std::vector<double> values;
    bool valid = true;
    std::string note;

    std::vector<ScalarEstimate> as_estimates() const;
};

/// Sum_m [s_m ln N_ob(t_m) - ln s_m! - N_ob(t_m)]. Returns -infinity when a
/// positive count meets a zero mean.
double log_likelihood(const ChannelParams& p, const ObservationSeries& obs);

/// Closed-form single-observation ML inversions for distance, degradation,
/// both flow components and molecule count. Release time and diffusion have
/// no closed form and raise UsageError.
CandidateSet ml_single_sample(ParamId id, const ChannelParams& p, double t1, double s1,
                              double zero_substitute = kZeroCountSubstitute);

struct NewtonOptions {
    int max_iterations = 100;
    double relative_step = 1e-9;
    double pivot_tolerance = 1e-14;
};

/// Newton-Raphson on the exact score and Hessian for the unknown sets {d},
/// {t0} and {d, t0}.
EstimateReport newton_raphson(const EstimationProblem& problem, const ObservationSeries& obs,
                              std::span<const double> init, const NewtonOptions& options = {});

struct GridSpec {
    /// Points per unknown; a single entry applies to every axis.
    std::vector<int> points;
    /// Zoom rounds, each re-gridding a 3-cell window around the incumbent.
    int refinements = 3;

    static GridSpec defaults(std::size_t unknown_count);
    int points_for(std::size_t axis) const;
};

/// Exhaustive bounded grid search of the log-likelihood (1 to 4 unknowns).
EstimateReport grid_search_ml(const EstimationProblem& problem, const ObservationSeries& obs,
                              const GridSpec& grid);

/// Unbiased coin among the valid candidates. Consumes no randomness when at
/// most one candidate is valid.
ScalarEstimate select_candidate(std::span<const ScalarEstimate> candidates, Rng& rng);
ScalarEstimate select_candidate(const CandidateSet& candidates, Rng& rng);

} // namespace molcomm
