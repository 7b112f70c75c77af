#include "molcomm/channel.hpp"

#include "molcomm/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace molcomm {

namespace {

struct ParamInfo {
    ParamId id;
    std::string_view name;
    std::string_view unit;
};

constexpr std::array<ParamInfo, 7> kParamInfo{{
    {ParamId::Distance, "distance", "m"},
    {ParamId::ReleaseTime, "release_time", "s"},
    {ParamId::Diffusion, "diffusion", "m^2/s"},
    {ParamId::Degradation, "degradation", "1/s"},
    {ParamId::FlowPar, "flow_parallel", "m/s"},
    {ParamId::FlowPerp, "flow_perpendicular", "m/s"},
    {ParamId::NumMolecules, "molecules", "1"},
}};

void require_elapsed(double elapsed) {
    if (!(elapsed > 0.0)) {
        throw DomainError("observation before release (t - t0 = " + std::to_string(elapsed) + " s)");
    }
}

} // namespace

std::string_view param_name(ParamId id) { return kParamInfo[static_cast<int>(id)].name; }

std::string_view param_unit(ParamId id) { return kParamInfo[static_cast<int>(id)].unit; }

std::optional<ParamId> param_from_name(std::string_view name) {
    for (const auto& info : kParamInfo) {
        if (info.name == name) return info.id;
    }
    return std::nullopt;
}

double ChannelParams::rx_volume() const {
    return 4.0 / 3.0 * std::numbers::pi * rx_radius * rx_radius * rx_radius;
}

double ChannelParams::get(ParamId id) const {
    switch (id) {
    case ParamId::Distance: return distance;
    case ParamId::ReleaseTime: return release_time;
    case ParamId::Diffusion: return diffusion;
    case ParamId::Degradation: return degradation;
    case ParamId::FlowPar: return flow_par;
    case ParamId::FlowPerp: return flow_perp;
    case ParamId::NumMolecules: return molecules;
    }
    throw UsageError("unknown parameter id");
}

void ChannelParams::set(ParamId id, double value) {
    switch (id) {
    case ParamId::Distance: distance = value; return;
    case ParamId::ReleaseTime: release_time = value; return;
    case ParamId::Diffusion: diffusion = value; return;
    case ParamId::Degradation: degradation = value; return;
    case ParamId::FlowPar: flow_par = value; return;
    case ParamId::FlowPerp: flow_perp = value; return;
    case ParamId::NumMolecules: molecules = value; return;
    }
    throw UsageError("unknown parameter id");
}

void ChannelParams::validate() const {
    if (!(diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    if (!(rx_radius > 0.0)) throw DomainError("receiver radius must be positive");
    if (!(molecules >= 0.0)) throw DomainError("number of molecules must be nonnegative");
}

double effective_distance_sq(const ChannelParams& p, double elapsed) {
    require_elapsed(elapsed);
    const double along = p.distance - p.flow_par * elapsed;
    const double across = p.flow_perp * elapsed;
    return along * along + across * across;
}

double log_expected_observations(const ChannelParams& p, double t) {
    const double elapsed = t - p.release_time;
    require_elapsed(elapsed);
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    if (p.molecules <= 0.0) return -std::numeric_limits<double>::infinity();
    const double spread = 4.0 * std::numbers::pi * p.diffusion * elapsed;
    return std::log(p.molecules * p.rx_volume()) - 1.5 * std::log(spread) - p.degradation * elapsed -
           effective_distance_sq(p, elapsed) / (4.0 * p.diffusion * elapsed);
}

double expected_observations(const ChannelParams& p, double t) {
    const double elapsed = t - p.release_time;
    require_elapsed(elapsed);
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    const double spread = 4.0 * std::numbers::pi * p.diffusion * elapsed;
    return p.molecules * p.rx_volume() / (spread * std::sqrt(spread)) *
           std::exp(-p.degradation * elapsed - effective_distance_sq(p, elapsed) / (4.0 * p.diffusion * elapsed));
}

double eta(const ChannelParams& p) {
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    return p.flow_speed_sq() / p.diffusion + 4.0 * p.degradation;
}

double peak_time(const ChannelParams& p) {
    if (p.distance == 0.0) throw DomainError("peak time undefined for a transmitter at the receiver center");
    const double e = eta(p);
    const double scaled = p.distance * p.distance / p.diffusion; // d^2 / D
    const double radicand = 9.0 + scaled * e;
    if (radicand < 0.0) throw DomainError("no interior peak (9 + d^2 eta / D < 0)");
    // (-3 + sqrt(9 + x)) / eta rewritten to stay exact as eta -> 0.
    return scaled / (3.0 + std::sqrt(radicand));
}

double peclet_number(const ChannelParams& p) {
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    return std::abs(p.distance) * std::sqrt(p.flow_speed_sq()) / p.diffusion;
}

} // namespace molcomm
