#include "molcomm/ml.hpp"

#include "molcomm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace molcomm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-likelihood without the ln(s!) terms; -inf for any sample at or before
// the release time.
double partial_log_likelihood(const ChannelParams& p, const ObservationSeries& obs) {
    double total = 0.0;
    for (const auto& s : obs) {
        if (!(s.time > p.release_time)) return kNegInf;
        const double log_mean = log_expected_observations(p, s.time);
        const double mean = std::exp(log_mean);
        if (s.count > 0.0) {
            if (log_mean == kNegInf) return kNegInf;
            total += s.count * log_mean;
        }
        total -= mean;
    }
    return total;
}

double log_factorial_sum(const ObservationSeries& obs) {
    double total = 0.0;
    for (const auto& s : obs) total += std::lgamma(s.count + 1.0);
    return total;
}

bool within(double x, const ParamBounds& b) { return x >= b.min && x <= b.max; }

} // namespace

ParamBounds default_bounds(ParamId id, double first_sample_time) {
    switch (id) {
    case ParamId::Distance: return {0.01e-6, 20e-6};
    case ParamId::ReleaseTime: return {-10e-3, first_sample_time};
    case ParamId::Diffusion: return {1e-10, 1e-7};
    case ParamId::Degradation: return {0.0, 500.0};
    case ParamId::FlowPar: return {-3e-3, 6e-3};
    case ParamId::FlowPerp: return {0.0, 10e-3};
    case ParamId::NumMolecules: return {1e3, 1e6};
    }
    throw UsageError("unknown parameter id");
}

bool searched_logarithmically(ParamId id) { return id == ParamId::Diffusion || id == ParamId::NumMolecules; }

EstimationProblem EstimationProblem::with_default_bounds(UnknownSet unknowns, const ChannelParams& known,
                                                         const ObservationSeries& obs) {
    std::vector<ParamBounds> bounds;
    for (const ParamId id : unknowns) bounds.push_back(default_bounds(id, obs.front().time));
    return {std::move(unknowns), known, std::move(bounds)};
}

void EstimationProblem::validate(const ObservationSeries& obs) const {
    if (bounds.size() != unknowns.size()) throw UsageError("one bound pair per unknown is required");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!(bounds[i].min < bounds[i].max)) {
            throw UsageError("bounds for " + std::string(param_name(unknowns[i])) + " must satisfy min < max");
        }
        if (searched_logarithmically(unknowns[i]) && !(bounds[i].min > 0.0)) {
            throw UsageError("bounds for " + std::string(param_name(unknowns[i])) + " must be positive");
        }
        if (unknowns[i] == ParamId::ReleaseTime && bounds[i].max > obs.front().time) {
            throw UsageError("release-time upper bound must not exceed the first sample time");
        }
    }
}

double EstimateReport::value(ParamId id) const {
    const auto i = unknowns.index_of(id);
    if (!i) throw UsageError("parameter was not estimated");
    return values[*i];
}

std::vector<ScalarEstimate> CandidateSet::as_estimates() const {
    std::vector<ScalarEstimate> out;
    for (const double v : values) out.push_back({v, valid});
    return out;
}

double log_likelihood(const ChannelParams& p, const ObservationSeries& obs) {
    for (const auto& s : obs) {
        if (!(s.time > p.release_time)) throw DomainError("observation before release");
    }
    const double partial = partial_log_likelihood(p, obs);
    if (partial == kNegInf) return kNegInf;
    return partial - log_factorial_sum(obs);
}

// ---------------------------------------------------------------------------
// Closed-form single-sample inversions

CandidateSet ml_single_sample(ParamId id, const ChannelParams& p, double t1, double s1, double zero_substitute) {
    if (id == ParamId::ReleaseTime || id == ParamId::Diffusion) {
        throw UsageError("no closed-form single-sample estimate for " + std::string(param_name(id)));
    }
    if (!(s1 >= 0.0)) throw UsageError("observation must be nonnegative");
    if (!(zero_substitute > 0.0 && zero_substitute < 1.0)) throw UsageError("zero substitute must lie in (0, 1)");
    const double te = t1 - p.release_time;
    if (!(te > 0.0)) throw DomainError("observation before release");
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");

    const double s = s1 > 0.0 ? s1 : zero_substitute;
    const double D = p.diffusion;
    const double spread = 4.0 * std::numbers::pi * D * te;
    const double spread_pow = spread * std::sqrt(spread);

    CandidateSet out;
    if (id == ParamId::NumMolecules) {
        out.values.push_back(s * spread_pow / p.rx_volume() *
                             std::exp(p.degradation * te + effective_distance_sq(p, te) / (4.0 * D * te)));
        return out;
    }

    if (!(p.molecules > 0.0)) {
        out.valid = false;
        out.note = "no molecules released";
        return out;
    }
    const double h = std::log(p.molecules * p.rx_volume() / (s * spread_pow));

    auto push_pair = [&](double center, double half, double scale) {
        out.values.push_back((center + half) / scale);
        if (half != 0.0) out.values.push_back((center - half) / scale);
    };
    auto infeasible = [&](double radicand) {
        out.valid = false;
        std::ostringstream msg;
        msg << "infeasible observation (negative radicand " << radicand << ")";
        out.note = msg.str();
    };

    switch (id) {
    case ParamId::Distance: {
        const double radicand =
            4.0 * D * te * h - te * te * (p.flow_perp * p.flow_perp + 4.0 * p.degradation * D);
        if (radicand < 0.0) {
            infeasible(radicand);
            break;
        }
        push_pair(p.flow_par * te, std::sqrt(radicand), 1.0);
        break;
    }
    case ParamId::Degradation:
        out.values.push_back(-effective_distance_sq(p, te) / (4.0 * D * te * te) + h / te);
        break;
    case ParamId::FlowPar: {
        const double radicand =
            4.0 * D * te * h - te * te * (p.flow_perp * p.flow_perp + 4.0 * p.degradation * D);
        if (radicand < 0.0) {
            infeasible(radicand);
            break;
        }
        push_pair(p.distance, std::sqrt(radicand), te);
        break;
    }
    case ParamId::FlowPerp: {
        const double along = p.distance - p.flow_par * te;
        const double radicand = 4.0 * D * te * h - 4.0 * p.degradation * D * te * te - along * along;
        if (radicand < 0.0) {
            infeasible(radicand);
            break;
        }
        push_pair(0.0, std::sqrt(radicand), te);
        break;
    }
    default:
        break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Newton-Raphson for {d}, {t0}, {d, t0}

namespace {

struct Derivatives {
    double score_d = 0.0, score_t = 0.0;
    double h_dd = 0.0, h_tt = 0.0, h_dt = 0.0;
    double scale_dd = 0.0, scale_tt = 0.0;
};

Derivatives derivatives(const ChannelParams& p, const ObservationSeries& obs) {
    Derivatives out;
    const double D = p.diffusion;
    const double d = p.distance;
    for (const auto& s : obs) {
        const double te = s.time - p.release_time;
        const double mean = expected_observations(p, s.time);
        const double resid = s.count - mean;
        const double gd = g_term(ParamId::Distance, p, s.time);
        const double gt = g_term(ParamId::ReleaseTime, p, s.time);

        out.score_d += gd * resid;
        out.score_t += gt * resid;

        const double dgd = 1.0 / (2.0 * D * te);                        // -dG_d/dd
        const double dgt = (3.0 - d * d / (D * te)) / (2.0 * te * te);  // dG_t0/dt0
        const double dgdt = d / (2.0 * D * te * te);                    // -dG_d/dt0

        out.h_dd -= resid * dgd + gd * gd * mean;
        out.h_tt += resid * dgt - gt * gt * mean;
        out.h_dt -= resid * dgdt + gd * gt * mean;

        out.scale_dd += (std::abs(resid) + mean) * dgd + gd * gd * mean;
        out.scale_tt += (std::abs(resid) + mean) * std::abs(dgt) + gt * gt * mean;
    }
    return out;
}

double typical_scale(ParamId id, double value, const ParamBounds& b) {
    const double floor = id == ParamId::ReleaseTime ? kReleaseTimeReference : 1e-3 * (b.max - b.min);
    return std::max(std::abs(value), floor);
}

} // namespace

EstimateReport newton_raphson(const EstimationProblem& problem, const ObservationSeries& obs,
                              std::span<const double> init, const NewtonOptions& options) {
    problem.validate(obs);
    for (const ParamId id : problem.unknowns) {
        if (id != ParamId::Distance && id != ParamId::ReleaseTime) {
            throw UsageError("Newton-Raphson supports only distance and release time");
        }
    }
    const std::size_t L = problem.unknowns.size();
    if (init.size() != L) throw UsageError("one initial value per unknown is required");
    for (std::size_t i = 0; i < L; ++i) {
        if (!within(init[i], problem.bounds[i])) throw UsageError("initial value outside bounds");
    }
    if (problem.unknowns.contains(ParamId::ReleaseTime) &&
        !(init[*problem.unknowns.index_of(ParamId::ReleaseTime)] < obs.front().time)) {
        throw UsageError("initial release time must precede the first sample");
    }

    const auto d_index = problem.unknowns.index_of(ParamId::Distance);
    const auto t_index = problem.unknowns.index_of(ParamId::ReleaseTime);

    EstimateReport report{problem.unknowns, std::vector<double>(init.begin(), init.end()),
                          EstimateMethod::NewtonRaphson};
    ChannelParams p = problem.known;
    for (std::size_t i = 0; i < L; ++i) p.set(problem.unknowns[i], init[i]);

    // Upper limit actually reachable by the release time.
    std::vector<ParamBounds> reachable = problem.bounds;
    if (t_index) {
        auto& b = reachable[*t_index];
        if (b.max >= obs.front().time) b.max = obs.front().time - 1e-6 * (obs.front().time - b.min);
    }

    auto fail = [&](const std::string& why) {
        report.converged = false;
        report.valid = false;
        report.notes = why;
        for (std::size_t i = 0; i < L; ++i) report.values[i] = p.get(problem.unknowns[i]);
        return report;
    };

    bool clamped_once = false;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        report.iterations = iter;
        const Derivatives der = derivatives(p, obs);
        std::vector<double> step(L, 0.0);

        if (L == 1) {
            const bool is_d = d_index.has_value();
            const double h = is_d ? der.h_dd : der.h_tt;
            const double scale = is_d ? der.scale_dd : der.scale_tt;
            if (!(std::abs(h) > options.pivot_tolerance * scale)) return fail("Hessian pivot below tolerance");
            step[0] = -(is_d ? der.score_d : der.score_t) / h;
        } else {
            if (!(std::abs(der.h_dd) > options.pivot_tolerance * der.scale_dd)) {
                return fail("Hessian pivot below tolerance");
            }
            const double schur = der.h_tt - der.h_dt * der.h_dt / der.h_dd;
            if (!(std::abs(schur) > options.pivot_tolerance * der.scale_tt)) {
                return fail("Hessian pivot below tolerance");
            }
            const double st = -(der.score_t - der.h_dt / der.h_dd * der.score_d) / schur;
            const double sd = -(der.score_d + der.h_dt * st) / der.h_dd;
            step[*d_index] = sd;
            step[*t_index] = st;
        }

        bool small = true;
        bool violated = false;
        std::vector<double> next(L);
        for (std::size_t i = 0; i < L; ++i) {
            const ParamId id = problem.unknowns[i];
            const double current = p.get(id);
            if (!std::isfinite(step[i])) return fail("non-finite Newton step");
            next[i] = current + step[i];
            if (std::abs(step[i]) > options.relative_step * typical_scale(id, current, problem.bounds[i])) {
                small = false;
            }
            if (!within(next[i], reachable[i])) {
                violated = true;
                next[i] = std::clamp(next[i], reachable[i].min, reachable[i].max);
            }
        }
        if (violated) {
            if (clamped_once) return fail("iterate left the search bounds twice");
            clamped_once = true;
        }
        for (std::size_t i = 0; i < L; ++i) p.set(problem.unknowns[i], next[i]);

        if (small && !violated) {
            for (std::size_t i = 0; i < L; ++i) report.values[i] = next[i];
            report.converged = true;
            report.valid = true;
            report.log_likelihood = log_likelihood(p, obs);
            return report;
        }
    }
    return fail("iteration limit reached");
}

// ---------------------------------------------------------------------------
// Grid search

GridSpec GridSpec::defaults(std::size_t unknown_count) {
    if (unknown_count == 0) throw UsageError("grid search requires at least one unknown");
    const int per_axis =
        std::min(200, static_cast<int>(std::floor(std::pow(1e6, 1.0 / static_cast<double>(unknown_count)) + 1e-9)));
    return {{per_axis}, 3};
}

int GridSpec::points_for(std::size_t axis) const {
    if (points.empty()) throw UsageError("grid spec has no point counts");
    return points.size() == 1 ? points.front() : points.at(axis);
}

namespace {

struct Axis {
    bool log = false;
    double lo = 0.0;      // in search coordinates (log-space when `log`)
    double hi = 0.0;
    double limit_lo = 0.0;
    double limit_hi = 0.0;
    int n = 2;

    double step() const { return (hi - lo) / (n - 1); }
    double coordinate(int i) const { return i == n - 1 ? hi : lo + step() * i; }
    double value(int i) const { return log ? std::exp(coordinate(i)) : coordinate(i); }
};

} // namespace

EstimateReport grid_search_ml(const EstimationProblem& problem, const ObservationSeries& obs, const GridSpec& grid) {
    problem.validate(obs);
    const std::size_t L = problem.unknowns.size();
    if (L > 4) throw UsageError("grid search supports at most four unknowns");
    if (grid.refinements < 0) throw UsageError("refinement rounds must be nonnegative");

    std::vector<Axis> axes(L);
    for (std::size_t i = 0; i < L; ++i) {
        const ParamId id = problem.unknowns[i];
        Axis& a = axes[i];
        a.n = grid.points_for(i);
        if (a.n < 2) throw UsageError("grid axes need at least two points");
        a.log = searched_logarithmically(id);
        a.lo = a.log ? std::log(problem.bounds[i].min) : problem.bounds[i].min;
        a.hi = a.log ? std::log(problem.bounds[i].max) : problem.bounds[i].max;
        if (id == ParamId::ReleaseTime && problem.bounds[i].max >= obs.front().time) {
            // Open upper limit: the top grid point sits one step below t1.
            a.hi -= (a.hi - a.lo) / a.n;
        }
        a.limit_lo = a.lo;
        a.limit_hi = a.hi;
    }

    ChannelParams p = problem.known;
    std::vector<double> best(L, 0.0);
    double best_ll = kNegInf;
    long evaluations = 0;
    std::vector<int> idx(L, 0);

    for (int round = 0; round <= grid.refinements; ++round) {
        std::fill(idx.begin(), idx.end(), 0);
        bool done = false;
        while (!done) {
            for (std::size_t i = 0; i < L; ++i) p.set(problem.unknowns[i], axes[i].value(idx[i]));
            const double ll = partial_log_likelihood(p, obs);
            ++evaluations;
            if (ll > best_ll) {
                best_ll = ll;
                for (std::size_t i = 0; i < L; ++i) best[i] = axes[i].value(idx[i]);
            }
            std::size_t k = 0;
            while (k < L && ++idx[k] == axes[k].n) idx[k++] = 0;
            done = k == L;
        }
        if (best_ll == kNegInf) break;
        for (std::size_t i = 0; i < L; ++i) {
            Axis& a = axes[i];
            const double center = a.log ? std::log(best[i]) : best[i];
            const double half = 1.5 * a.step();
            a.lo = std::max(a.limit_lo, center - half);
            a.hi = std::min(a.limit_hi, center + half);
        }
    }

    EstimateReport report{problem.unknowns, best, EstimateMethod::GridSearch};
    report.iterations = grid.refinements + 1;
    if (best_ll == kNegInf) {
        report.valid = false;
        report.converged = false;
        report.notes = "every grid point has zero likelihood";
        return report;
    }
    report.valid = true;
    report.converged = true;
    report.log_likelihood = best_ll - log_factorial_sum(obs);
    report.notes = std::to_string(evaluations) + " likelihood evaluations";
    return report;
}

// ---------------------------------------------------------------------------

ScalarEstimate select_candidate(std::span<const ScalarEstimate> candidates, Rng& rng) {
    if (candidates.empty()) throw UsageError("no candidates to choose from");
    std::vector<ScalarEstimate> valid;
    for (const auto& c : candidates) {
        if (c.valid) valid.push_back(c);
    }
    if (valid.empty()) return {std::numeric_limits<double>::quiet_NaN(), false};
    if (valid.size() == 1) return valid.front();
    std::uniform_int_distribution<std::size_t> coin(0, valid.size() - 1);
    return valid[coin(rng)];
}

ScalarEstimate select_candidate(const CandidateSet& candidates, Rng& rng) {
    if (candidates.values.empty()) return {std::numeric_limits<double>::quiet_NaN(), false};
    const auto est = candidates.as_estimates();
    return select_candidate(std::span<const ScalarEstimate>(est), rng);
}

} // namespace molcomm
