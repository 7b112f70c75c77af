#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace molcomm {

/// Channel parameters that may be unknown. The enumerator order is the
/// row/column order of every Fisher matrix.
enum class ParamId : int {
    Distance,
    ReleaseTime,
    Diffusion,
    Degradation,
    FlowPar,
    FlowPerp,
    NumMolecules,
};

inline constexpr std::array<ParamId, 7> kAllParams{
    ParamId::Distance,    ParamId::ReleaseTime, ParamId::Diffusion,   ParamId::Degradation,
    ParamId::FlowPar,     ParamId::FlowPerp,    ParamId::NumMolecules,
};

std::string_view param_name(ParamId id);
std::optional<ParamId> param_from_name(std::string_view name);
/// SI unit string of the parameter ("m", "s", "m^2/s", ...).
std::string_view param_unit(ParamId id);

/// Physical description of the unbounded diffusive channel with uniform flow
/// and first-order degradation. All fields in SI base units.
///
/// The transmitter sits at (-distance, 0, 0) and the spherical receiver is
/// centered at the origin. `flow_par` points from transmitter to receiver,
/// `flow_perp` is orthogonal to it. The receiver volume is always derived from
/// `rx_radius`.
struct ChannelParams {
    double distance = 6e-6;      // m
    double release_time = 0.0;   // s
    double diffusion = 1e-9;     // m^2/s
    double degradation = 62.5;   // 1/s, negative means spontaneous generation
    double flow_par = 2e-3;      // m/s
    double flow_perp = 1e-3;     // m/s
    double molecules = 1e5;      // released count, real-valued for estimation
    double rx_radius = 0.5e-6;   // m

    /// Reference environment used throughout the tests and default configs.
    static ChannelParams reference() { return {}; }

    double rx_volume() const;
    double flow_speed_sq() const { return flow_par * flow_par + flow_perp * flow_perp; }

    double get(ParamId id) const;
    void set(ParamId id, double value);
    ChannelParams with(ParamId id, double value) const {
        ChannelParams copy = *this;
        copy.set(id, value);
        return copy;
    }

    /// Throws DomainError unless diffusion > 0, rx_radius > 0, molecules >= 0.
    void validate() const;
};

/// |r_ef|^2 = (d - v_par t_ef)^2 + (v_perp t_ef)^2. Requires elapsed > 0.
double effective_distance_sq(const ChannelParams& p, double elapsed);

/// Expected molecule count inside the receiver at absolute time t (> t0).
double expected_observations(const ChannelParams& p, double t);

/// ln of expected_observations, evaluated without forming the exponential.
/// Returns -infinity when no molecules are released.
double log_expected_observations(const ChannelParams& p, double t);

/// eta = |v|^2 / D + 4k, in 1/s.
double eta(const ChannelParams& p);

/// Elapsed time after release at which the expected count peaks.
/// Throws DomainError for distance == 0 or when no interior peak exists.
double peak_time(const ChannelParams& p);

/// d |v| / D.
double peclet_number(const ChannelParams& p);

} // namespace molcomm
