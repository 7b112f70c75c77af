#include "molcomm/observations.hpp"

#include "molcomm/errors.hpp"

#include <cmath>

namespace molcomm {

ObservationSeries::ObservationSeries(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw UsageError("observation series must contain at least one sample");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!std::isfinite(samples_[i].time)) throw UsageError("non-finite sample time");
        if (!(samples_[i].count >= 0.0)) throw UsageError("molecule counts must be nonnegative");
        if (i > 0 && !(samples_[i].time > samples_[i - 1].time)) {
            throw UsageError("sample times must be strictly increasing");
        }
    }
}

namespace {
std::vector<Sample> zip(std::span<const double> times, std::span<const double> counts) {
    if (times.size() != counts.size()) throw UsageError("times and counts differ in length");
    std::vector<Sample> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.push_back({times[i], counts[i]});
    return out;
}
} // namespace

ObservationSeries::ObservationSeries(std::span<const double> times, std::span<const double> counts)
    : ObservationSeries(zip(times, counts)) {}

std::vector<double> ObservationSeries::times() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.time);
    return out;
}

std::vector<double> ObservationSeries::counts() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.count);
    return out;
}

} // namespace molcomm
