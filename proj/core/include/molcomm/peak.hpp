#pragma once

#include "molcomm/channel.hpp"
#include "molcomm/ml.hpp"
#include "molcomm/observations.hpp"

#include <optional>
#include <span>
#include <vector>

namespace molcomm {

enum class ExtremeMode { Min, Max };

/// Sliding min/max over an odd window centered on each sample. Windows are
/// truncated at the series edges, so the output has the input's length.
std::vector<double> moving_extreme_filter(std::span<const double> series, int window, ExtremeMode mode);

struct PeakObservation {
    double time;  // absolute time of the envelope-mean maximum
    double value; // envelope mean at that time
    int window;
};

/// Envelope detector: mean of the moving-min and moving-max filtered counts,
/// maximized with ties going to the earliest sample.
PeakObservation detect_peak(const ObservationSeries& obs, int window);

/// Quantities recoverable from the observed peak time alone.
enum class PeakTarget {
    ReleaseTime,
    Distance,
    Diffusion,
    Degradation,
    FlowMagnitude,
    FlowPar,
    FlowPerp,
    NumMolecules,
};

/// Inverts the peak-time relation for one parameter. For every target except
/// ReleaseTime, `t_max` is taken relative to the known release time. Flow
/// components are derived from |v| and the other (known) component and come
/// back as a +/- pair. NumMolecules raises UsageError.
CandidateSet peak_estimate_from_time(PeakTarget target, const ChannelParams& p, double t_max);

/// Single-sample ML estimate from the peak value. With `use_t_max` the sample
/// is placed at peak.time; otherwise at t0 + peak_time(theta), which ties the
/// sample time to the unknown. Parameters without a closed form are solved
/// numerically within `bounds` (defaults to the reference grid limits).
CandidateSet peak_estimate_from_value(ParamId id, const ChannelParams& p, const PeakObservation& peak,
                                      bool use_t_max, std::optional<ParamBounds> bounds = std::nullopt,
                                      double zero_substitute = kZeroCountSubstitute);

} // namespace molcomm
