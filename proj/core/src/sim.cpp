#include "molcomm/sim.hpp"

#include "molcomm/errors.hpp"
#include "molcomm/parallel.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace molcomm {

void SimConfig::validate() const {
    if (!(time_step > 0.0)) throw ConfigError("simulation time step must be positive");
    if (steps < 1) throw ConfigError("simulation needs at least one step");
    if (!(params.diffusion >= 0.0)) throw ConfigError("diffusion coefficient must be nonnegative");
    if (!(params.rx_radius > 0.0)) throw ConfigError("receiver radius must be positive");
    if (!(params.molecules >= 0.0)) throw ConfigError("number of molecules must be nonnegative");
    if (params.degradation < 0.0) throw ConfigError("the particle simulator cannot model molecule generation (k < 0)");
    if (!(params.degradation * time_step < 1.0)) {
        throw ConfigError("degradation probability k*dt must be below 1");
    }
    for (std::size_t i = 0; i < sample_steps.size(); ++i) {
        if (sample_steps[i] < 1 || sample_steps[i] > steps) {
            throw ConfigError("sample step " + std::to_string(sample_steps[i]) + " outside [1, " +
                              std::to_string(steps) + "]");
        }
        if (i > 0 && sample_steps[i] <= sample_steps[i - 1]) {
            throw ConfigError("sample steps must be strictly increasing");
        }
    }
}

std::vector<double> SimConfig::sample_times() const {
    std::vector<double> out;
    for (const int s : sample_steps) out.push_back(params.release_time + s * time_step);
    return out;
}

std::int64_t released_count(const ChannelParams& p) { return std::llround(p.molecules); }

std::vector<Vec3> init_source(const SimConfig& cfg) {
    const std::int64_t n = released_count(cfg.params);
    const Vec3 origin{-cfg.params.distance, 0.0, 0.0};
    if (n <= 0) return {};
    if (cfg.source == SourceMode::Point) return std::vector<Vec3>(static_cast<std::size_t>(n), origin);

    // Grow a cube until the ball of nearest sites holds n of them.
    for (int radius = static_cast<int>(std::cbrt(3.0 * static_cast<double>(n) / (4.0 * M_PI))) + 2;; radius += 2) {
        std::vector<std::tuple<long, int, int, int>> sites;
        const long r2 = static_cast<long>(radius) * radius;
        for (int i = -radius; i <= radius; ++i) {
            for (int j = -radius; j <= radius; ++j) {
                for (int k = -radius; k <= radius; ++k) {
                    const long d2 = static_cast<long>(i) * i + static_cast<long>(j) * j + static_cast<long>(k) * k;
                    if (d2 <= r2) sites.emplace_back(d2, i, j, k);
                }
            }
        }
        if (static_cast<std::int64_t>(sites.size()) < n) continue;
        std::sort(sites.begin(), sites.end());
        std::vector<Vec3> out;
        out.reserve(static_cast<std::size_t>(n));
        for (std::int64_t s = 0; s < n; ++s) {
            const auto& [d2, i, j, k] = sites[static_cast<std::size_t>(s)];
            out.push_back({origin.x + i * kLatticePitch, origin.y + j * kLatticePitch, origin.z + k * kLatticePitch});
        }
        return out;
    }
}

void advance(std::span<Vec3> positions, const ChannelParams& p, double dt, int steps, Rng& stream) {
    const double sigma = std::sqrt(2.0 * p.diffusion * dt);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < steps; ++s) {
        for (Vec3& q : positions) {
            q.x += p.flow_par * dt + sigma * normal(stream);
            q.y += p.flow_perp * dt + sigma * normal(stream);
            q.z += sigma * normal(stream);
        }
    }
}

namespace {

std::int64_t count_inside(const std::vector<Vec3>& pos, std::size_t alive, double r2) {
    std::int64_t c = 0;
    for (std::size_t i = 0; i < alive; ++i) {
        const Vec3& q = pos[i];
        c += (q.x * q.x + q.y * q.y + q.z * q.z <= r2) ? 1 : 0;
    }
    return c;
}

// Molecules that survive `gap` further steps, without tracking positions.
std::int64_t survive(std::size_t alive, double death_prob, int gap, Rng& rng) {
    if (alive == 0 || gap <= 0 || death_prob == 0.0) return static_cast<std::int64_t>(alive);
    std::binomial_distribution<std::int64_t> keep(static_cast<std::int64_t>(alive), std::pow(1.0 - death_prob, gap));
    return keep(rng);
}

TrialResult run_from(const SimConfig& cfg, std::vector<Vec3> pos, Rng& rng) {
    const double dt = cfg.time_step;
    const double sigma = std::sqrt(2.0 * cfg.params.diffusion * dt);
    const double drift_x = cfg.params.flow_par * dt;
    const double drift_y = cfg.params.flow_perp * dt;
    const double death = cfg.params.degradation * dt;
    const double r2 = cfg.params.rx_radius * cfg.params.rx_radius;

    boost::random::normal_distribution<double> normal(0.0, 1.0);

    TrialResult result;
    result.counts.reserve(cfg.sample_steps.size());
    std::size_t alive = pos.size();
    int step = 0;

    if (cfg.propagation == Propagation::PerStep) {
        std::size_t next_sample = 0;
        const int last = cfg.sample_steps.empty() ? 0 : cfg.sample_steps.back();
        // The step of a molecule's first successful Bernoulli(k dt) draw is
        // geometric, so it can be drawn once up front.
        std::vector<int> death_step;
        if (death > 0.0) {
            std::geometric_distribution<long long> failures(death);
            death_step.resize(alive);
            for (auto& s : death_step) s = static_cast<int>(std::min<long long>(failures(rng), last)) + 1;
        }
        for (step = 1; step <= last; ++step) {
            // Backwards so a swapped-in molecule has already been processed.
            for (std::size_t i = alive; i-- > 0;) {
                Vec3& q = pos[i];
                q.x += drift_x + sigma * normal(rng);
                q.y += drift_y + sigma * normal(rng);
                q.z += sigma * normal(rng);
                if (!death_step.empty() && death_step[i] == step) {
                    --alive;
                    pos[i] = pos[alive];
                    death_step[i] = death_step[alive];
                }
            }
            if (step == cfg.sample_steps[next_sample]) {
                result.counts.push_back(count_inside(pos, alive, r2));
                ++next_sample;
            }
        }
        step = last;
    } else {
        for (const int target : cfg.sample_steps) {
            const int gap = target - step;
            const double keep_prob = std::pow(1.0 - death, gap);
            const double spread = sigma * std::sqrt(static_cast<double>(gap));
            std::bernoulli_distribution kept(keep_prob);
            for (std::size_t i = alive; i-- > 0;) {
                if (death > 0.0 && !kept(rng)) {
                    pos[i] = pos[--alive];
                    continue;
                }
                Vec3& q = pos[i];
                q.x += gap * drift_x + spread * normal(rng);
                q.y += gap * drift_y + spread * normal(rng);
                q.z += spread * normal(rng);
            }
            result.counts.push_back(count_inside(pos, alive, r2));
            step = target;
        }
    }
    result.survivors = survive(alive, death, cfg.steps - step, rng);
    return result;
}

} // namespace

TrialResult run_trial(const SimConfig& cfg, Rng& stream) {
    cfg.validate();
    return run_from(cfg, init_source(cfg), stream);
}

TrialResult run_trial(const SimConfig& cfg, std::span<const Vec3> start, Rng& stream) {
    cfg.validate();
    return run_from(cfg, std::vector<Vec3>(start.begin(), start.end()), stream);
}

std::vector<TrialResult> run_ensemble(const SimConfig& cfg, int n_trials, std::uint64_t master_seed, int threads) {
    cfg.validate();
    if (n_trials < 1) throw ConfigError("ensemble needs at least one trial");
    const std::vector<Vec3> start = init_source(cfg);
    std::vector<TrialResult> results(static_cast<std::size_t>(n_trials));
    parallel_for(results.size(), threads, [&](std::size_t i) {
        Rng rng = derive_stream(master_seed, i);
        results[i] = run_from(cfg, start, rng);
    });
    return results;
}

ObservationSeries poisson_sample(const ChannelParams& p, std::span<const double> times, Rng& stream) {
    std::vector<Sample> samples;
    samples.reserve(times.size());
    for (const double t : times) {
        const double mean = expected_observations(p, t);
        double count = 0.0;
        if (mean > 0.0) {
            std::poisson_distribution<std::int64_t> draw(mean);
            count = static_cast<double>(draw(stream));
        }
        samples.push_back({t, count});
    }
    return ObservationSeries(std::move(samples));
}

std::vector<int> snap_to_steps(std::span<const double> elapsed_times, double time_step) {
    if (!(time_step > 0.0)) throw ConfigError("simulation time step must be positive");
    std::vector<int> out;
    for (const double t : elapsed_times) {
        const double ratio = t / time_step;
        const long long n = std::llround(ratio);
        if (std::abs(t - static_cast<double>(n) * time_step) > 0.5e-6 * time_step || n < 1) {
            throw ConfigError("sample time " + std::to_string(t) + " s is not on the simulation step grid");
        }
        out.push_back(static_cast<int>(n));
    }
    return out;
}

} // namespace molcomm
