#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace molcomm {

struct Sample {
    double time;  // s
    double count; // molecules; integral outside of test hooks
};

/// Receiver observations in strictly increasing time order. Never empty.
class ObservationSeries {
public:
    explicit ObservationSeries(std::vector<Sample> samples);
    ObservationSeries(std::span<const double> times, std::span<const double> counts);

    std::size_t size() const { return samples_.size(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const Sample& front() const { return samples_.front(); }
    auto begin() const { return samples_.begin(); }
    auto end() const { return samples_.end(); }

    std::vector<double> times() const;
    std::vector<double> counts() const;

private:
    std::vector<Sample> samples_;
};

} // namespace molcomm
