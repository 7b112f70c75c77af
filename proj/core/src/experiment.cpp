#include "molcomm/experiment.hpp"

#include "molcomm/errors.hpp"
#include "molcomm/parallel.hpp"
#include "molcomm/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#ifndef MOLCOMM_VERSION
#define MOLCOMM_VERSION "0.0.0"
#endif

namespace molcomm {

std::string_view library_version() { return MOLCOMM_VERSION; }

// ---------------------------------------------------------------------------
// Names

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::pair<E, std::string_view> (&table)[N], const char* what) {
    for (const auto& [value, text] : table) {
        if (text == name) return value;
    }
    std::string options;
    for (const auto& entry : table) options += (options.empty() ? "" : ", ") + std::string(entry.second);
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "' (expected one of " + options +
                      ")");
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::pair<E, std::string_view> (&table)[N]) {
    for (const auto& [v, text] : table) {
        if (v == value) return text;
    }
    return "?";
}

constexpr std::pair<ExperimentKind, std::string_view> kExperimentNames[] = {
    {ExperimentKind::Impulse, "impulse"},
    {ExperimentKind::Crlb, "crlb"},
    {ExperimentKind::Estimate, "estimate"},
    {ExperimentKind::Peak, "peak"},
};
constexpr std::pair<Generator, std::string_view> kGeneratorNames[] = {
    {Generator::Poisson, "poisson"},
    {Generator::Particle, "particle"},
};
constexpr std::pair<EstimatorKind, std::string_view> kEstimatorNames[] = {
    {EstimatorKind::MlGrid, "ml_grid"},       {EstimatorKind::MlNewton, "ml_newton"},
    {EstimatorKind::MlAnalytic, "ml_analytic"}, {EstimatorKind::PeakTime, "peak_time"},
    {EstimatorKind::PeakValue, "peak_value"}, {EstimatorKind::PeakTimeValue, "peak_time_value"},
};
constexpr std::pair<SamplingVariant, std::string_view> kVariantNames[] = {
    {SamplingVariant::Default, "default"},
    {SamplingVariant::Anchored, "anchored"},
};
constexpr std::pair<PeakTarget, std::string_view> kPeakTargetNames[] = {
    {PeakTarget::ReleaseTime, "release_time"},     {PeakTarget::Distance, "distance"},
    {PeakTarget::Diffusion, "diffusion"},          {PeakTarget::Degradation, "degradation"},
    {PeakTarget::FlowMagnitude, "flow_magnitude"}, {PeakTarget::FlowPar, "flow_parallel"},
    {PeakTarget::FlowPerp, "flow_perpendicular"},  {PeakTarget::NumMolecules, "molecules"},
};

} // namespace

std::string_view experiment_name(ExperimentKind kind) { return enum_name(kind, kExperimentNames); }
std::string_view generator_name(Generator g) { return enum_name(g, kGeneratorNames); }
std::string_view estimator_name(EstimatorKind e) { return enum_name(e, kEstimatorNames); }
std::string_view sampling_variant_name(SamplingVariant v) { return enum_name(v, kVariantNames); }
std::string_view peak_target_name(PeakTarget t) { return enum_name(t, kPeakTargetNames); }
Generator parse_generator(std::string_view name) { return parse_enum(name, kGeneratorNames, "generator"); }
EstimatorKind parse_estimator(std::string_view name) { return parse_enum(name, kEstimatorNames, "estimator"); }
SamplingVariant parse_sampling_variant(std::string_view name) {
    return parse_enum(name, kVariantNames, "sampling variant");
}
PeakTarget parse_peak_target(std::string_view name) { return parse_enum(name, kPeakTargetNames, "peak target"); }

bool is_peak_estimator(EstimatorKind e) {
    return e == EstimatorKind::PeakTime || e == EstimatorKind::PeakValue || e == EstimatorKind::PeakTimeValue;
}

// ---------------------------------------------------------------------------
// Sampling schemes

SamplingScheme build_scheme(int samples, SamplingVariant variant) {
    if (samples < 1) throw ConfigError("number of samples must be at least 1");
    SamplingScheme scheme{samples, {}};
    if (variant == SamplingVariant::Anchored && samples == 2) {
        scheme.times = {2e-3, 3e-3};
        return scheme;
    }
    if (samples == 1) {
        scheme.times = {2e-3};
        return scheme;
    }
    // Whole-millisecond arithmetic first keeps grid points such as 2 ms exact.
    for (int i = 1; i <= samples; ++i) scheme.times.push_back(10.0 * i / samples / 1000.0);
    if (variant == SamplingVariant::Anchored && samples % 5 != 0) {
        throw ConfigError("anchored sampling needs a sample at 2 ms, which the equally spaced grid of " +
                          std::to_string(samples) + " samples ending at 10 ms does not contain");
    }
    return scheme;
}

// ---------------------------------------------------------------------------
// Sweep definition

int SweepSpec::trial_count() const {
    if (trials) return *trials;
    return kind == ExperimentKind::Impulse ? 1000 : 10000;
}

std::vector<EstimatorKind> SweepSpec::resolved_estimators() const {
    if (!estimators.empty()) return estimators;
    if (kind == ExperimentKind::Peak) {
        return {EstimatorKind::PeakTime, EstimatorKind::PeakValue, EstimatorKind::PeakTimeValue};
    }
    if (kind == ExperimentKind::Estimate) return {EstimatorKind::MlGrid};
    return {};
}

namespace {

struct Point {
    double swept;
    int samples;
    ChannelParams params;
};

bool sweeps_samples(const SweepSpec& spec) { return spec.sweep_variable == kSamplesVariable; }

std::vector<Point> sweep_points(const SweepSpec& spec) {
    std::vector<Point> out;
    if (sweeps_samples(spec)) {
        if (spec.kind == ExperimentKind::Impulse) {
            out.push_back({0.0, 0, spec.truth});
            return out;
        }
        std::vector<double> values = spec.sweep_values;
        if (values.empty()) {
            for (const int m : spec.samples) values.push_back(m);
        }
        for (const double v : values) {
            if (!(v >= 1.0) || v != std::floor(v) || v > 1e6) {
                throw ConfigError("sample counts must be positive integers");
            }
            out.push_back({v, static_cast<int>(v), spec.truth});
        }
        return out;
    }
    const auto id = param_from_name(spec.sweep_variable);
    if (!id) throw ConfigError("unknown sweep variable '" + spec.sweep_variable + "'");
    std::vector<double> values = spec.sweep_values;
    if (values.empty()) values.push_back(spec.truth.get(*id));
    for (const double v : values) {
        const ChannelParams p = spec.truth.with(*id, v);
        if (spec.kind == ExperimentKind::Impulse) {
            out.push_back({v, 0, p});
            continue;
        }
        for (const int m : spec.samples) out.push_back({v, m, p});
    }
    return out;
}

std::optional<ParamId> target_param(PeakTarget t) {
    switch (t) {
    case PeakTarget::ReleaseTime: return ParamId::ReleaseTime;
    case PeakTarget::Distance: return ParamId::Distance;
    case PeakTarget::Diffusion: return ParamId::Diffusion;
    case PeakTarget::Degradation: return ParamId::Degradation;
    case PeakTarget::FlowPar: return ParamId::FlowPar;
    case PeakTarget::FlowPerp: return ParamId::FlowPerp;
    case PeakTarget::NumMolecules: return ParamId::NumMolecules;
    case PeakTarget::FlowMagnitude: break;
    }
    return std::nullopt;
}

bool peak_supported(EstimatorKind e, PeakTarget t) {
    switch (e) {
    case EstimatorKind::PeakTime: return t != PeakTarget::NumMolecules;
    case EstimatorKind::PeakValue: return target_param(t).has_value() && t != PeakTarget::ReleaseTime;
    case EstimatorKind::PeakTimeValue: return target_param(t).has_value();
    default: return false;
    }
}

bool has_closed_form(ParamId id) { return id != ParamId::ReleaseTime && id != ParamId::Diffusion; }

} // namespace

void SweepSpec::validate() const {
    if (trials && *trials < 1) throw ConfigError("trials must be at least 1");
    if (threads < 0) throw ConfigError("threads must be nonnegative");
    if (!sweeps_samples(*this) && !param_from_name(sweep_variable)) {
        throw ConfigError("unknown sweep variable '" + sweep_variable + "'");
    }
    if (samples.empty()) throw ConfigError("at least one sample count is required");

    std::vector<Point> points;
    try {
        points = sweep_points(*this);
        for (const auto& pt : points) {
            pt.params.validate();
            if (!(pt.params.distance > 0.0)) throw ConfigError("distance must be positive");
            if (kind != ExperimentKind::Impulse) build_scheme(pt.samples, variant);
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid channel parameters: ") + e.what());
    }

    for (const auto& [id, b] : bounds) {
        if (!(b.min < b.max)) throw ConfigError("bounds for " + std::string(param_name(id)) + " need min < max");
    }
    for (const auto& [id, ref] : references) {
        if (!(ref != 0.0) || !std::isfinite(ref)) {
            throw ConfigError("reference for " + std::string(param_name(id)) + " must be finite and nonzero");
        }
    }
    if (!(simulation.time_step > 0.0) || simulation.steps < 1) {
        throw ConfigError("simulation needs a positive time step and at least one step");
    }
    for (const int s : simulation.record_steps) {
        if (s < 1 || s > simulation.steps) throw ConfigError("recorded steps must lie within the simulated steps");
    }
    if (!std::is_sorted(simulation.record_steps.begin(), simulation.record_steps.end()) ||
        std::adjacent_find(simulation.record_steps.begin(), simulation.record_steps.end()) !=
            simulation.record_steps.end()) {
        throw ConfigError("recorded steps must be strictly increasing");
    }
    for (const int p : grid.points) {
        if (p < 2) throw ConfigError("grid needs at least 2 points per axis");
    }
    if (grid.refinements < 0) throw ConfigError("grid refinements must be nonnegative");
    for (const int w : windows) {
        if (w < 1 || w % 2 == 0) throw ConfigError("peak windows must be positive odd integers");
    }

    std::optional<UnknownSet> set;
    try {
        set.emplace(std::span<const ParamId>(unknowns));
    } catch (const UsageError& e) {
        throw ConfigError(std::string("unknowns: ") + e.what());
    }

    if ((kind == ExperimentKind::Crlb || kind == ExperimentKind::Impulse) && !estimators.empty()) {
        throw ConfigError("the " + std::string(experiment_name(kind)) + " experiment takes no estimators");
    }
    for (const EstimatorKind e : resolved_estimators()) {
        if (kind == ExperimentKind::Estimate && is_peak_estimator(e)) {
            throw ConfigError("estimator '" + std::string(estimator_name(e)) + "' belongs to the peak experiment");
        }
        if (kind == ExperimentKind::Peak && !is_peak_estimator(e)) {
            throw ConfigError("estimator '" + std::string(estimator_name(e)) + "' is not a peak estimator");
        }
        if (kind != ExperimentKind::Estimate) continue;
        if (e == EstimatorKind::MlGrid && set->size() > 4) {
            throw ConfigError("grid search supports at most 4 unknowns");
        }
        if (e == EstimatorKind::MlNewton) {
            for (const ParamId id : *set) {
                if (id != ParamId::Distance && id != ParamId::ReleaseTime) {
                    throw ConfigError("Newton-Raphson supports only distance and release_time unknowns");
                }
            }
        }
        if (e == EstimatorKind::MlAnalytic) {
            if (set->size() != 1 || !has_closed_form((*set)[0])) {
                throw ConfigError(
                    "the analytical estimator needs a single distance, degradation, flow or molecules unknown");
            }
            for (const auto& pt : points) {
                if (pt.samples != 1) throw ConfigError("the analytical estimator needs exactly one sample");
            }
        }
    }
    if (kind == ExperimentKind::Peak) {
        if (windows.empty() || peak_targets.empty()) throw ConfigError("peak sweeps need windows and targets");
    }
}

// ---------------------------------------------------------------------------
// Shared machinery

namespace {

struct Context {
    ChannelParams params;
    std::vector<double> times; // absolute
    SimConfig sim;
    std::vector<Vec3> start;
};

Context make_context(const SweepSpec& spec, const Point& pt) {
    Context ctx;
    ctx.params = pt.params;
    const SamplingScheme scheme = build_scheme(pt.samples, spec.variant);
    for (const double t : scheme.times) ctx.times.push_back(pt.params.release_time + t);
    if (spec.generator == Generator::Particle) {
        ctx.sim.params = pt.params;
        ctx.sim.time_step = spec.simulation.time_step;
        ctx.sim.steps = spec.simulation.steps;
        ctx.sim.source = spec.simulation.source;
        ctx.sim.propagation = spec.simulation.propagation;
        ctx.sim.sample_steps = snap_to_steps(scheme.times, spec.simulation.time_step);
        ctx.sim.validate();
        ctx.start = init_source(ctx.sim);
    }
    return ctx;
}

ObservationSeries observe(const SweepSpec& spec, const Context& ctx, Rng& rng) {
    if (spec.generator == Generator::Poisson) return poisson_sample(ctx.params, ctx.times, rng);
    const TrialResult r = run_trial(ctx.sim, ctx.start, rng);
    std::vector<double> counts(r.counts.begin(), r.counts.end());
    return ObservationSeries(ctx.times, counts);
}

double reference_for(const SweepSpec& spec, ParamId id, const ChannelParams& truth) {
    const auto it = spec.references.find(id);
    return it != spec.references.end() ? it->second : reference_value(id, truth);
}

GridSpec resolved_grid(const SweepSpec& spec, std::size_t unknowns) {
    if (!spec.grid.points.empty()) return spec.grid;
    GridSpec g = GridSpec::defaults(unknowns);
    g.refinements = spec.grid.refinements;
    return g;
}

std::vector<BoundEntry> bound_entries(const SweepSpec& spec, const UnknownSet& unknowns, const ChannelParams& p,
                                      std::span<const double> times, double* condition, bool* singular) {
    const CrlbReport report = crlb(fim(p, unknowns, times));
    if (condition) *condition = report.condition_number;
    if (singular) *singular = report.singular;
    std::vector<BoundEntry> out;
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        BoundEntry b;
        b.parameter = std::string(param_name(unknowns[i]));
        b.crlb = report.bounds[i];
        if (b.crlb) {
            const double ref = reference_for(spec, unknowns[i], p);
            b.normalized = *b.crlb / (ref * ref);
        }
        out.push_back(std::move(b));
    }
    return out;
}

struct Accumulator {
    std::vector<double> sq_err;
    std::vector<char> ok;
};

EstimateEntry summarize(std::string estimator, std::string parameter, const std::vector<double>& sq,
                        const std::vector<char>& ok, std::size_t stride, std::size_t offset, double ref) {
    EstimateEntry e{std::move(estimator), std::move(parameter), std::nullopt, std::nullopt, 0};
    double sum = 0.0;
    int valid = 0;
    for (std::size_t trial = 0; trial < ok.size() / stride; ++trial) {
        if (!ok[trial * stride + offset]) {
            ++e.failures;
            continue;
        }
        ++valid;
        sum += sq[trial * stride + offset];
    }
    if (valid > 0) {
        e.mse = sum / valid;
        e.mse_normalized = *e.mse / (ref * ref);
    }
    return e;
}

} // namespace

// ---------------------------------------------------------------------------
// CRLB sweep

std::vector<SweepRow> run_crlb_sweep(const SweepSpec& spec) {
    spec.validate();
    const UnknownSet unknowns{std::span<const ParamId>(spec.unknowns)};
    std::vector<SweepRow> rows;
    for (const Point& pt : sweep_points(spec)) {
        SweepRow row;
        row.swept = pt.swept;
        row.samples = pt.samples;
        std::vector<double> times;
        for (const double t : build_scheme(pt.samples, spec.variant).times) times.push_back(pt.params.release_time + t);
        row.bounds = bound_entries(spec, unknowns, pt.params, times, &row.condition_number, &row.singular);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// ML sweep

namespace {

// Returns the estimates of every unknown, or nothing for a failed trial.
std::optional<std::vector<double>> run_ml(EstimatorKind kind, const SweepSpec& spec, const Context& ctx,
                                          const UnknownSet& unknowns, const ObservationSeries& obs, Rng& rng) {
    EstimationProblem problem = EstimationProblem::with_default_bounds(unknowns, ctx.params, obs);
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        const auto it = spec.bounds.find(unknowns[i]);
        if (it != spec.bounds.end()) problem.bounds[i] = it->second;
    }
    switch (kind) {
    case EstimatorKind::MlGrid: {
        const EstimateReport r = grid_search_ml(problem, obs, resolved_grid(spec, unknowns.size()));
        if (!r.valid) return std::nullopt;
        return r.values;
    }
    case EstimatorKind::MlNewton: {
        std::vector<double> init;
        for (const ParamId id : unknowns) init.push_back(ctx.params.get(id));
        const EstimateReport r = newton_raphson(problem, obs, init, spec.newton);
        if (!r.valid || !r.converged) return std::nullopt;
        return r.values;
    }
    case EstimatorKind::MlAnalytic: {
        const CandidateSet c = ml_single_sample(unknowns[0], ctx.params, obs.front().time, obs.front().count);
        const ScalarEstimate pick = select_candidate(c, rng);
        if (!pick.valid || !std::isfinite(pick.value)) return std::nullopt;
        return std::vector<double>{pick.value};
    }
    default:
        break;
    }
    throw UsageError("not a likelihood estimator");
}

} // namespace

std::vector<SweepRow> run_estimator_sweep(const SweepSpec& spec) {
    spec.validate();
    const UnknownSet unknowns{std::span<const ParamId>(spec.unknowns)};
    const auto estimators = spec.resolved_estimators();
    const int n = spec.trial_count();
    const std::size_t L = unknowns.size();
    const std::size_t E = estimators.size();
    const auto points = sweep_points(spec);

    std::vector<SweepRow> rows;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Point& pt = points[pi];
        const Context ctx = make_context(spec, pt);
        SweepRow row;
        row.swept = pt.swept;
        row.samples = pt.samples;
        row.trials = n;
        row.bounds = bound_entries(spec, unknowns, ctx.params, ctx.times, &row.condition_number, &row.singular);

        const std::uint64_t point_seed = derive_seed(spec.seed, pi);
        std::vector<double> sq(static_cast<std::size_t>(n) * E * L, 0.0);
        std::vector<char> ok(static_cast<std::size_t>(n) * E * L, 0);
        parallel_for(static_cast<std::size_t>(n), spec.threads, [&](std::size_t trial) {
            const std::uint64_t trial_seed = derive_seed(point_seed, trial);
            Rng obs_rng = derive_stream(trial_seed, 0);
            const ObservationSeries obs = observe(spec, ctx, obs_rng);
            for (std::size_t e = 0; e < E; ++e) {
                Rng choice = derive_stream(trial_seed, 1 + e);
                std::optional<std::vector<double>> est;
                try {
                    est = run_ml(estimators[e], spec, ctx, unknowns, obs, choice);
                } catch (const DomainError&) {
                }
                if (!est) continue;
                for (std::size_t l = 0; l < L; ++l) {
                    const double err = (*est)[l] - ctx.params.get(unknowns[l]);
                    const std::size_t slot = (trial * E + e) * L + l;
                    sq[slot] = err * err;
                    ok[slot] = 1;
                }
            }
        });
        for (std::size_t e = 0; e < E; ++e) {
            for (std::size_t l = 0; l < L; ++l) {
                row.estimates.push_back(summarize(std::string(estimator_name(estimators[e])),
                                                  std::string(param_name(unknowns[l])), sq, ok, E * L, e * L + l,
                                                  reference_for(spec, unknowns[l], ctx.params)));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Peak sweep

namespace {

struct PeakCombo {
    int window;
    PeakTarget target;
    EstimatorKind estimator;
};

double peak_truth(PeakTarget t, const ChannelParams& p) {
    if (const auto id = target_param(t)) return p.get(*id);
    return std::sqrt(p.flow_speed_sq());
}

double peak_reference(const SweepSpec& spec, PeakTarget t, const ChannelParams& p) {
    if (const auto id = target_param(t)) return reference_for(spec, *id, p);
    return std::sqrt(p.flow_speed_sq());
}

CandidateSet run_peak_estimator(const SweepSpec& spec, const PeakCombo& c, const ChannelParams& p,
                                const PeakObservation& peak) {
    if (c.estimator == EstimatorKind::PeakTime) return peak_estimate_from_time(c.target, p, peak.time);
    const ParamId id = *target_param(c.target);
    std::optional<ParamBounds> b;
    if (const auto it = spec.bounds.find(id); it != spec.bounds.end()) b = it->second;
    return peak_estimate_from_value(id, p, peak, c.estimator == EstimatorKind::PeakTimeValue, b);
}

} // namespace

std::vector<SweepRow> run_peak_sweep(const SweepSpec& spec) {
    spec.validate();
    const auto estimators = spec.resolved_estimators();
    const int n = spec.trial_count();
    const auto points = sweep_points(spec);

    std::vector<SweepRow> rows;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Point& pt = points[pi];
        const Context ctx = make_context(spec, pt);

        std::vector<PeakCombo> combos;
        for (const int w : spec.windows) {
            for (const EstimatorKind e : estimators) {
                for (const PeakTarget t : spec.peak_targets) {
                    if (peak_supported(e, t)) combos.push_back({w, t, e});
                }
            }
        }
        const std::size_t C = combos.size();
        const std::uint64_t point_seed = derive_seed(spec.seed, pi);
        std::vector<double> sq(static_cast<std::size_t>(n) * C, 0.0);
        std::vector<char> ok(static_cast<std::size_t>(n) * C, 0);
        parallel_for(static_cast<std::size_t>(n), spec.threads, [&](std::size_t trial) {
            const std::uint64_t trial_seed = derive_seed(point_seed, trial);
            Rng obs_rng = derive_stream(trial_seed, 0);
            const ObservationSeries obs = observe(spec, ctx, obs_rng);
            for (std::size_t c = 0; c < C; ++c) {
                Rng choice = derive_stream(trial_seed, 1 + c);
                try {
                    const PeakObservation peak = detect_peak(obs, combos[c].window);
                    const CandidateSet cands = run_peak_estimator(spec, combos[c], ctx.params, peak);
                    const ScalarEstimate pick = select_candidate(cands, choice);
                    if (!pick.valid || !std::isfinite(pick.value)) continue;
                    const double err = pick.value - peak_truth(combos[c].target, ctx.params);
                    sq[trial * C + c] = err * err;
                    ok[trial * C + c] = 1;
                } catch (const DomainError&) {
                }
            }
        });

        for (const int w : spec.windows) {
            SweepRow row;
            row.swept = pt.swept;
            row.samples = pt.samples;
            row.window = w;
            row.trials = n;
            for (const PeakTarget t : spec.peak_targets) {
                BoundEntry b;
                b.parameter = std::string(peak_target_name(t));
                const auto id = target_param(t);
                b.defined = id.has_value();
                if (id) {
                    // Single-sample bound with the sample placed at the expected peak.
                    try {
                        const double t1 = ctx.params.release_time + peak_time(ctx.params);
                        const CrlbReport r = crlb(fim(ctx.params, UnknownSet{*id}, std::span<const double>(&t1, 1)));
                        b.crlb = r.bounds[0];
                        if (b.crlb) {
                            const double ref = peak_reference(spec, t, ctx.params);
                            b.normalized = *b.crlb / (ref * ref);
                        }
                    } catch (const DomainError&) {
                        b.defined = false;
                    }
                }
                row.bounds.push_back(std::move(b));
            }
            for (std::size_t c = 0; c < C; ++c) {
                if (combos[c].window != w) continue;
                row.estimates.push_back(summarize(std::string(estimator_name(combos[c].estimator)),
                                                  std::string(peak_target_name(combos[c].target)), sq, ok, C, c,
                                                  peak_reference(spec, combos[c].target, ctx.params)));
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Impulse validation

std::vector<ImpulseRow> run_impulse_validation(const SweepSpec& spec) {
    spec.validate();
    const int n = spec.trial_count();
    const auto points = sweep_points(spec);
    std::vector<int> steps = spec.simulation.record_steps;
    if (steps.empty()) {
        for (int s = 1; s <= spec.simulation.steps; ++s) steps.push_back(s);
    }
    const double dt = spec.simulation.time_step;

    std::vector<ImpulseRow> rows;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Point& pt = points[pi];
        const std::uint64_t point_seed = derive_seed(spec.seed, pi);
        std::vector<double> elapsed;
        std::vector<double> absolute;
        for (const int s : steps) {
            elapsed.push_back(s * dt);
            absolute.push_back(pt.params.release_time + s * dt);
        }

        // counts[trial * S + m]
        const std::size_t S = steps.size();
        std::vector<double> counts(static_cast<std::size_t>(n) * S, 0.0);
        std::optional<double> survivor_fraction;
        if (spec.generator == Generator::Particle) {
            SimConfig cfg;
            cfg.params = pt.params;
            cfg.time_step = dt;
            cfg.steps = spec.simulation.steps;
            cfg.sample_steps = steps;
            cfg.source = spec.simulation.source;
            cfg.propagation = spec.simulation.propagation;
            const auto results = run_ensemble(cfg, n, point_seed, spec.threads);
            double survivors = 0.0;
            for (std::size_t t = 0; t < results.size(); ++t) {
                for (std::size_t m = 0; m < S; ++m) counts[t * S + m] = static_cast<double>(results[t].counts[m]);
                survivors += static_cast<double>(results[t].survivors);
            }
            const auto released = released_count(pt.params);
            if (released > 0) survivor_fraction = survivors / (static_cast<double>(released) * n);
        } else {
            parallel_for(static_cast<std::size_t>(n), spec.threads, [&](std::size_t trial) {
                Rng rng = derive_stream(point_seed, trial);
                const ObservationSeries obs = poisson_sample(pt.params, absolute, rng);
                for (std::size_t m = 0; m < S; ++m) counts[trial * S + m] = obs[m].count;
            });
        }

        for (std::size_t m = 0; m < S; ++m) {
            double sum = 0.0;
            for (int t = 0; t < n; ++t) sum += counts[static_cast<std::size_t>(t) * S + m];
            const double mean = sum / n;
            double ss = 0.0;
            for (int t = 0; t < n; ++t) {
                const double dev = counts[static_cast<std::size_t>(t) * S + m] - mean;
                ss += dev * dev;
            }
            ImpulseRow row;
            row.swept = pt.swept;
            row.step = steps[m];
            row.time = elapsed[m];
            row.expected = expected_observations(pt.params, absolute[m]);
            row.sim_mean = mean;
            row.sim_se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
            if (row.expected > 0.0) row.rel_deviation = (mean - row.expected) / row.expected;
            row.survivor_fraction = survivor_fraction;
            row.trials = n;
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::string squared_unit(std::string_view unit) {
    if (unit == "1") return "1";
    if (unit.find('/') == std::string_view::npos && unit.find('^') == std::string_view::npos) {
        return std::string(unit) + "^2";
    }
    return "(" + std::string(unit) + ")^2";
}

std::string quantity_unit(std::string_view name) {
    if (name == "flow_magnitude") return "m/s";
    if (const auto id = param_from_name(name)) return std::string(param_unit(*id));
    return "1";
}

Cell optional_cell(const std::optional<double>& v, bool unbounded_if_empty) {
    if (v) return *v;
    if (unbounded_if_empty) return Unbounded{};
    return Absent{};
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (const int v : values) out += (out.empty() ? "" : " ") + std::to_string(v);
    return out;
}

void add_common_metadata(const SweepSpec& spec, ResultTable& table) {
    table.metadata.emplace_back("tool", "molcomm " + std::string(library_version()));
    table.metadata.emplace_back("experiment", std::string(experiment_name(spec.kind)));
    table.metadata.emplace_back("seed", std::to_string(spec.seed));
    if (spec.kind != ExperimentKind::Crlb) {
        table.metadata.emplace_back("generator", std::string(generator_name(spec.generator)));
        table.metadata.emplace_back("trials", std::to_string(spec.trial_count()));
    }
    table.metadata.emplace_back("sweep_variable", spec.sweep_variable);
    if (spec.generator == Generator::Particle || spec.kind == ExperimentKind::Impulse) {
        table.metadata.emplace_back("time_step", format_number(spec.simulation.time_step) + " s");
        table.metadata.emplace_back("steps", std::to_string(spec.simulation.steps));
        if (spec.generator == Generator::Particle) {
            table.metadata.emplace_back("source", spec.simulation.source == SourceMode::Lattice ? "lattice" : "point");
            table.metadata.emplace_back("propagation",
                                        spec.simulation.propagation == Propagation::PerStep ? "per_step" : "sample_skip");
        }
    }
    std::ostringstream truth;
    for (const ParamId id : kAllParams) {
        truth << param_name(id) << '=' << format_number(spec.truth.get(id)) << ' ';
    }
    truth << "rx_radius=" << format_number(spec.truth.rx_radius);
    table.metadata.emplace_back("channel", truth.str());
}

} // namespace

ResultTable sweep_table(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
    ResultTable table;
    add_common_metadata(spec, table);
    table.metadata.emplace_back("sampling", std::string(sampling_variant_name(spec.variant)));
    if (!sweeps_samples(spec)) table.metadata.emplace_back("samples", join_ints(spec.samples));
    if (spec.kind == ExperimentKind::Estimate) {
        std::string names;
        for (const ParamId id : spec.unknowns) names += (names.empty() ? "" : " ") + std::string(param_name(id));
        table.metadata.emplace_back("unknowns", names);
        const auto ests = spec.resolved_estimators();
        if (std::find(ests.begin(), ests.end(), EstimatorKind::MlGrid) != ests.end()) {
            const GridSpec g = resolved_grid(spec, spec.unknowns.size());
            table.metadata.emplace_back("grid", "points=" + join_ints(g.points) +
                                                    " refinements=" + std::to_string(g.refinements));
        }
    }
    if (spec.kind == ExperimentKind::Peak) {
        table.metadata.emplace_back("windows", join_ints(spec.windows));
        table.metadata.emplace_back("peak_crlb", "single sample at the expected peak time");
    }

    const bool by_samples = sweeps_samples(spec);
    if (by_samples) {
        table.add_column("samples", "1");
    } else {
        table.add_column(spec.sweep_variable, std::string(param_unit(*param_from_name(spec.sweep_variable))));
        table.add_column("samples", "1");
    }
    if (spec.kind == ExperimentKind::Peak) table.add_column("window", "1");

    // Column layout follows the first row; every row of a sweep has the same shape.
    if (!rows.empty()) {
        for (const auto& b : rows.front().bounds) {
            table.add_column("crlb_" + b.parameter, squared_unit(quantity_unit(b.parameter)));
            table.add_column("crlb_norm_" + b.parameter, "1");
        }
    } else {
        std::vector<std::string> names;
        if (spec.kind == ExperimentKind::Peak) {
            for (const PeakTarget t : spec.peak_targets) names.emplace_back(peak_target_name(t));
        } else {
            for (const ParamId id : spec.unknowns) names.emplace_back(param_name(id));
        }
        for (const auto& name : names) {
            table.add_column("crlb_" + name, squared_unit(quantity_unit(name)));
            table.add_column("crlb_norm_" + name, "1");
        }
    }
    if (spec.kind == ExperimentKind::Crlb) {
        table.add_column("condition_number", "1");
        table.add_column("singular", "1");
    } else {
        if (!rows.empty()) {
            for (const auto& e : rows.front().estimates) {
                const std::string key = e.estimator + "_" + e.parameter;
                table.add_column("mse_" + key, squared_unit(quantity_unit(e.parameter)));
                table.add_column("mse_norm_" + key, "1");
                table.add_column("failures_" + key, "1");
            }
        }
        table.add_column("trials", "1");
    }

    for (const SweepRow& r : rows) {
        std::vector<Cell> cells;
        if (by_samples) {
            cells.emplace_back(static_cast<std::int64_t>(r.samples));
        } else {
            cells.emplace_back(r.swept);
            cells.emplace_back(static_cast<std::int64_t>(r.samples));
        }
        if (spec.kind == ExperimentKind::Peak) cells.emplace_back(static_cast<std::int64_t>(r.window));
        for (const auto& b : r.bounds) {
            cells.push_back(optional_cell(b.crlb, b.defined));
            cells.push_back(optional_cell(b.normalized, b.defined));
        }
        if (spec.kind == ExperimentKind::Crlb) {
            cells.emplace_back(r.condition_number);
            cells.emplace_back(static_cast<std::int64_t>(r.singular ? 1 : 0));
        } else {
            for (const auto& e : r.estimates) {
                cells.push_back(optional_cell(e.mse, false));
                cells.push_back(optional_cell(e.mse_normalized, false));
                cells.emplace_back(static_cast<std::int64_t>(e.failures));
            }
            cells.emplace_back(static_cast<std::int64_t>(r.trials));
        }
        table.add_row(std::move(cells));
    }
    return table;
}

ResultTable impulse_table(const SweepSpec& spec, const std::vector<ImpulseRow>& rows) {
    ResultTable table;
    add_common_metadata(spec, table);
    const bool by_param = !sweeps_samples(spec);
    if (by_param) {
        table.add_column(spec.sweep_variable, std::string(param_unit(*param_from_name(spec.sweep_variable))));
    }
    table.add_column("step", "1");
    table.add_column("time", "s");
    table.add_column("expected", "1");
    table.add_column("sim_mean", "1");
    table.add_column("sim_se", "1");
    table.add_column("rel_deviation", "1");
    table.add_column("survivor_fraction", "1");
    table.add_column("trials", "1");
    for (const ImpulseRow& r : rows) {
        std::vector<Cell> cells;
        if (by_param) cells.emplace_back(r.swept);
        cells.emplace_back(static_cast<std::int64_t>(r.step));
        cells.emplace_back(r.time);
        cells.emplace_back(r.expected);
        cells.emplace_back(r.sim_mean);
        cells.emplace_back(r.sim_se);
        cells.push_back(optional_cell(r.rel_deviation, false));
        cells.push_back(optional_cell(r.survivor_fraction, false));
        cells.emplace_back(static_cast<std::int64_t>(r.trials));
        table.add_row(std::move(cells));
    }
    return table;
}

ResultTable run_experiment(const SweepSpec& spec) {
    switch (spec.kind) {
    case ExperimentKind::Impulse: return impulse_table(spec, run_impulse_validation(spec));
    case ExperimentKind::Crlb: return sweep_table(spec, run_crlb_sweep(spec));
    case ExperimentKind::Estimate: return sweep_table(spec, run_estimator_sweep(spec));
    case ExperimentKind::Peak: return sweep_table(spec, run_peak_sweep(spec));
    }
    throw UsageError("unknown experiment kind");
}

} // namespace molcomm
