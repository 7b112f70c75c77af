#include "molcomm/peak.hpp"

#include "molcomm/errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

namespace molcomm {

std::vector<double> moving_extreme_filter(std::span<const double> series, int window, ExtremeMode mode) {
    if (window < 1 || window % 2 == 0) throw UsageError("filter window must be a positive odd integer");
    const auto n = static_cast<std::ptrdiff_t>(series.size());
    const std::ptrdiff_t half = (window - 1) / 2;
    std::vector<double> out(series.size());
    for (std::ptrdiff_t m = 0; m < n; ++m) {
        const auto first = series.begin() + std::max<std::ptrdiff_t>(0, m - half);
        const auto last = series.begin() + std::min(n, m + half + 1);
        out[static_cast<std::size_t>(m)] =
            mode == ExtremeMode::Min ? *std::min_element(first, last) : *std::max_element(first, last);
    }
    return out;
}

PeakObservation detect_peak(const ObservationSeries& obs, int window) {
    const auto counts = obs.counts();
    const auto lower = moving_extreme_filter(counts, window, ExtremeMode::Min);
    const auto upper = moving_extreme_filter(counts, window, ExtremeMode::Max);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < counts.size(); ++m) {
        const double mean = 0.5 * (lower[m] + upper[m]);
        if (mean > best_value) {
            best_value = mean;
            best = m;
        }
    }
    return {obs[best].time, best_value, window};
}

namespace {

CandidateSet invalid(std::string note) {
    CandidateSet out;
    out.valid = false;
    out.note = std::move(note);
    return out;
}

CandidateSet plus_minus_sqrt(double radicand, const char* what) {
    if (radicand < 0.0) return invalid(std::string("infeasible peak time (negative radicand for ") + what + ")");
    CandidateSet out;
    const double root = std::sqrt(radicand);
    out.values.push_back(root);
    if (root != 0.0) out.values.push_back(-root);
    return out;
}

} // namespace

CandidateSet peak_estimate_from_time(PeakTarget target, const ChannelParams& p, double t_max) {
    if (target == PeakTarget::NumMolecules) {
        throw UsageError("the peak time does not depend on the number of released molecules");
    }
    if (target == PeakTarget::ReleaseTime) return {{t_max - peak_time(p)}, true, {}};

    const double t = t_max - p.release_time;
    if (!(t > 0.0)) return invalid("peak observed before release");
    const double D = p.diffusion;
    const double k = p.degradation;
    const double d2 = p.distance * p.distance;
    const double v2 = p.flow_speed_sq();

    switch (target) {
    case PeakTarget::Distance: {
        const double radicand = D * t * (4.0 * k * t + 6.0) + t * t * v2;
        if (radicand < 0.0) return invalid("infeasible peak time (negative radicand for distance)");
        return {{std::sqrt(radicand)}, true, {}};
    }
    case PeakTarget::Diffusion: {
        const double denom = 4.0 * t * t * k + 6.0 * t;
        if (!(denom > 0.0)) return invalid("infeasible peak time (nonpositive denominator for diffusion)");
        const double value = (d2 - t * t * v2) / denom;
        if (!(value > 0.0)) return invalid("infeasible peak time (nonpositive diffusion estimate)");
        return {{value}, true, {}};
    }
    case PeakTarget::Degradation:
        return {{(d2 - 6.0 * D * t - t * t * v2) / (4.0 * D * t * t)}, true, {}};
    case PeakTarget::FlowMagnitude:
    case PeakTarget::FlowPar:
    case PeakTarget::FlowPerp: {
        const double speed_sq = (d2 - 4.0 * D * k * t * t - 6.0 * D * t) / (t * t);
        if (speed_sq < 0.0) return invalid("infeasible peak time (negative radicand for flow magnitude)");
        if (target == PeakTarget::FlowMagnitude) return {{std::sqrt(speed_sq)}, true, {}};
        const double known = target == PeakTarget::FlowPar ? p.flow_perp : p.flow_par;
        return plus_minus_sqrt(speed_sq - known * known, "flow component");
    }
    default:
        break;
    }
    throw UsageError("unsupported peak-time target");
}

namespace {

// Solves ln N_ob(x) = ln s over a bounded interval. Returns every bracketed
// root; when the count is never reached, the single-sample likelihood
// maximizer instead.
CandidateSet solve_count_equation(const std::function<double(double)>& log_mean, const ParamBounds& b,
                                  bool log_axis, double s) {
    constexpr int kScan = 400;
    const double lo = log_axis ? std::log(b.min) : b.min;
    const double hi = log_axis ? std::log(b.max) : b.max;
    const double target = std::log(s);
    auto to_value = [&](double u) { return log_axis ? std::exp(u) : u; };
    auto residual = [&](double u) {
        const double lm = log_mean(to_value(u));
        return std::isnan(lm) ? std::numeric_limits<double>::quiet_NaN() : lm - target;
    };

    std::vector<double> u(kScan), f(kScan);
    for (int i = 0; i < kScan; ++i) {
        u[i] = i == kScan - 1 ? hi : lo + (hi - lo) * i / (kScan - 1);
        f[i] = residual(u[i]);
    }

    CandidateSet out;
    for (int i = 0; i + 1 < kScan; ++i) {
        if (!std::isfinite(f[i]) || !std::isfinite(f[i + 1])) continue;
        if (f[i] == 0.0) {
            out.values.push_back(to_value(u[i]));
            continue;
        }
        if ((f[i] < 0.0) == (f[i + 1] < 0.0) || f[i + 1] == 0.0) continue;
        std::uintmax_t iterations = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            residual, u[i], u[i + 1], f[i], f[i + 1], boost::math::tools::eps_tolerance<double>(52), iterations);
        out.values.push_back(to_value(0.5 * (bracket.first + bracket.second)));
    }
    if (std::isfinite(f[kScan - 1]) && f[kScan - 1] == 0.0) out.values.push_back(to_value(u[kScan - 1]));
    if (!out.values.empty()) return out;

    // No exact solution in range: maximize s ln(mean) - mean.
    auto neg_ll = [&](double uu) {
        const double lm = log_mean(to_value(uu));
        if (!std::isfinite(lm)) return std::numeric_limits<double>::infinity();
        return std::exp(lm) - s * lm;
    };
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kScan; ++i) {
        const double v = neg_ll(u[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best < 0) return invalid("expected count undefined across the search range");
    const double left = u[std::max(0, best - 1)];
    const double right = u[std::min(kScan - 1, best + 1)];
    const auto found = boost::math::tools::brent_find_minima(neg_ll, left, right, 52);
    out.values.push_back(to_value(found.first));
    out.note = "count not attainable in range; likelihood maximizer";
    return out;
}

} // namespace

CandidateSet peak_estimate_from_value(ParamId id, const ChannelParams& p, const PeakObservation& peak, bool use_t_max,
                                      std::optional<ParamBounds> bounds, double zero_substitute) {
    if (!(peak.value >= 0.0)) throw UsageError("peak value must be nonnegative");
    const double s = peak.value > 0.0 ? peak.value : zero_substitute;

    if (use_t_max) {
        if (id != ParamId::ReleaseTime && id != ParamId::Diffusion) {
            return ml_single_sample(id, p, peak.time, s, zero_substitute);
        }
        const ParamBounds range = bounds.value_or(default_bounds(id, peak.time));
        if (id == ParamId::ReleaseTime) {
            // The count peaks at t0 + t_max over t0. A count at or above that
            // peak is maximized there, where the count equation only touches.
            const double tm = peak_time(p);
            const double top = log_expected_observations(p.with(ParamId::ReleaseTime, 0.0), tm);
            const double t0 = peak.time - tm;
            if (std::log(s) >= top - 1e-12 && t0 >= range.min && t0 < range.max) {
                return {{t0}, true, "count at or above the attainable peak"};
            }
        }
        auto log_mean = [&](double x) {
            const ChannelParams q = p.with(id, x);
            if (!(peak.time > q.release_time) || !(q.diffusion > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            return log_expected_observations(q, peak.time);
        };
        return solve_count_equation(log_mean, range, searched_logarithmically(id), s);
    }

    if (id == ParamId::ReleaseTime) {
        throw UsageError("the peak value does not depend on the release time; the peak time is required");
    }
    if (id == ParamId::NumMolecules) {
        return ml_single_sample(id, p, p.release_time + peak_time(p), s, zero_substitute);
    }
    const ParamBounds range = bounds.value_or(default_bounds(id, peak.time));
    auto log_mean = [&](double x) {
        const ChannelParams q = p.with(id, x);
        try {
            return log_expected_observations(q, q.release_time + peak_time(q));
        } catch (const DomainError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    return solve_count_equation(log_mean, range, searched_logarithmically(id), s);
}

} // namespace molcomm
