#pragma once

#include <molcomm/channel.hpp>

#include <cmath>
#include <vector>

namespace test {

inline molcomm::ChannelParams reference() { return molcomm::ChannelParams::reference(); }

inline bool rel_close(double a, double b, double tol) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) <= tol * scale;
}

/// Elapsed times 10/M, 20/M, ..., 10 ms.
inline std::vector<double> uniform_times(int m, double t0 = 0.0) {
    std::vector<double> out;
    for (int i = 1; i <= m; ++i) out.push_back(t0 + 10.0 * i / m / 1000.0);
    return out;
}

} // namespace test
