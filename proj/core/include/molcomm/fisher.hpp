#pragma once

#include "molcomm/channel.hpp"
#include "molcomm/observations.hpp"

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace molcomm {

/// Distinct unknown parameters, kept in ParamId order.
class UnknownSet {
public:
    UnknownSet(std::initializer_list<ParamId> ids);
    explicit UnknownSet(std::span<const ParamId> ids);

    std::size_t size() const { return ids_.size(); }
    ParamId operator[](std::size_t i) const { return ids_[i]; }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }
    bool contains(ParamId id) const { return index_of(id).has_value(); }
    std::optional<std::size_t> index_of(ParamId id) const;

    bool operator==(const UnknownSet&) const = default;

private:
    std::vector<ParamId> ids_;
};

struct FisherMatrix {
    UnknownSet unknowns;
    Eigen::MatrixXd entries;
    std::vector<double> sample_times;
};

/// Cramer-Rao bounds in squared parameter units. `std::nullopt` marks an
/// unbounded (nonexistent) bound.
struct CrlbReport {
    UnknownSet unknowns;
    std::vector<std::optional<double>> bounds;
    /// 2-norm condition number of the diagonally equilibrated FIM; infinity
    /// when singular.
    double condition_number = 0.0;
    /// Inversion failed; every bound is unbounded.
    bool singular = false;
    /// Inversion succeeded but condition_number > kNearSingularCondition.
    bool near_singular = false;

    std::optional<double> bound(ParamId id) const;
};

inline constexpr double kNearSingularCondition = 1e12;
inline constexpr double kRankTolerance = 1e-14;
/// Reference release time used to normalize bounds and errors, since the
/// nominal release time is zero.
inline constexpr double kReleaseTimeReference = 1e-4;

/// d ln(expected_observations) / d theta at sample time t.
double g_term(ParamId id, const ChannelParams& p, double t);

/// [I]_ij = sum_m G_i G_j N_ob(t_m).
FisherMatrix fim(const ChannelParams& p, const UnknownSet& unknowns, std::span<const double> times);

CrlbReport crlb(const FisherMatrix& f);

/// Divides each bound by ref^2. Throws DomainError for a zero reference.
std::vector<std::optional<double>> normalized_crlb(const CrlbReport& report, std::span<const double> refs);

/// Normalization reference for a parameter: its true value, except the
/// release time which uses kReleaseTimeReference.
double reference_value(ParamId id, const ChannelParams& truth);
std::vector<double> reference_values(const UnknownSet& unknowns, const ChannelParams& truth);

/// Score sum_m G(t_m) (s_m - N_ob(t_m)).
double score(const ChannelParams& p, ParamId id, const ObservationSeries& obs);

} // namespace molcomm
