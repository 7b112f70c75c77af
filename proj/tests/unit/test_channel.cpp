#include <doctest.h>

#include "support.hpp"

#include <molcomm/channel.hpp>
#include <molcomm/errors.hpp>

#include <cmath>
#include <string>

using namespace molcomm;
using test::reference;
using test::rel_close;

TEST_CASE("expected count matches high-precision evaluation") {
    auto p = reference();
    CHECK(rel_close(expected_observations(p, 2e-3), 134.9141621519705496, 1e-12));

    p.distance = 2e-6;
    CHECK(rel_close(expected_observations(p, 0.5e-3), 1724.737738022006772, 1e-12));

    p.distance = 4e-6;
    CHECK(rel_close(expected_observations(p, 2e-3), 222.43584885864, 1e-11));
}

TEST_CASE("no molecules means no observations") {
    auto p = reference();
    p.molecules = 0.0;
    for (const double t : {1e-4, 2e-3, 9e-3}) CHECK(expected_observations(p, t) == 0.0);
    CHECK(std::isinf(log_expected_observations(p, 2e-3)));
}

TEST_CASE("observing before release is a domain error") {
    auto p = reference();
    p.release_time = 1e-3;
    CHECK_THROWS_AS(expected_observations(p, 1e-3), DomainError);
    CHECK_THROWS_AS(expected_observations(p, 0.5e-3), DomainError);
    try {
        expected_observations(p, 0.0);
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("observation before release") != std::string::npos);
    }
    CHECK_THROWS_AS(effective_distance_sq(p, 0.0), DomainError);
    CHECK_THROWS_AS(effective_distance_sq(p, -1e-3), DomainError);
}

TEST_CASE("effective distance") {
    const auto p = reference();
    CHECK(rel_close(effective_distance_sq(p, 2e-3), 8e-12, 1e-12));

    auto still = p;
    still.flow_par = still.flow_perp = 0.0;
    CHECK(effective_distance_sq(still, 3e-3) == still.distance * still.distance);

    auto carried = p;
    carried.flow_perp = 0.0;
    carried.distance = carried.flow_par * 2e-3;
    CHECK(effective_distance_sq(carried, 2e-3) == 0.0);
}

TEST_CASE("eta") {
    auto p = reference();
    CHECK(rel_close(eta(p), 5250.0, 1e-12));
    p.flow_par = p.flow_perp = 0.0;
    CHECK(rel_close(eta(p), 250.0, 1e-12));
    p.degradation = 0.0;
    CHECK(eta(p) == 0.0);
}

TEST_CASE("peak time") {
    auto p = reference();
    const double oracle[][2] = {
        {2e-6, 0.4718524904860308e-3},  {4e-6, 1.265457287808182e-3}, {6e-6, 2.1088090056133888e-3},
        {8e-6, 2.9665096420965166e-3}, {10e-6, 3.830179050777654e-3},
    };
    for (const auto& [d, t] : oracle) CHECK(rel_close(peak_time(p.with(ParamId::Distance, d)), t, 1e-12));

    auto still = p;
    still.flow_par = still.flow_perp = still.degradation = 0.0;
    CHECK(rel_close(peak_time(still), 6e-3, 1e-14));

    CHECK_THROWS_AS(peak_time(p.with(ParamId::Distance, 0.0)), DomainError);

    // Generation strong enough that the count grows without bound.
    auto growing = still;
    growing.degradation = -100.0;
    CHECK_THROWS_AS(peak_time(growing), DomainError);
}

TEST_CASE("peak time is continuous as eta vanishes") {
    auto p = reference();
    p.flow_par = p.flow_perp = 0.0;
    p.degradation = 0.25e-6; // eta = 1e-6 1/s
    const double e = eta(p);
    const double literal = (-3.0 + std::sqrt(9.0 + p.distance * p.distance * e / p.diffusion)) / e;
    const double limit = p.distance * p.distance / (6.0 * p.diffusion);
    CHECK(rel_close(peak_time(p), limit, 1e-4));
    CHECK(rel_close(literal, limit, 1e-4));
}

TEST_CASE("peak time maximizes the expected count on a dense grid") {
    for (const double d : {2e-6, 4e-6, 6e-6, 10e-6}) {
        const auto p = reference().with(ParamId::Distance, d);
        const double tp = peak_time(p);
        const double at_peak = expected_observations(p, tp);
        for (int i = 1; i <= 4000; ++i) {
            const double t = i * 5e-6;
            CHECK(expected_observations(p, t) <= at_peak * (1 + 1e-12));
        }
        CHECK(expected_observations(p, tp * 0.999) < at_peak);
        CHECK(expected_observations(p, tp * 1.001) < at_peak);
    }
}

TEST_CASE("expected count vanishes at both ends and is nonnegative") {
    const auto p = reference();
    CHECK(expected_observations(p, 1e-12) == doctest::Approx(0.0));
    CHECK(expected_observations(p, 1e3) == doctest::Approx(0.0));
    for (int i = 1; i < 1000; ++i) CHECK(expected_observations(p, i * 1e-5) >= 0.0);
}

TEST_CASE("linear in the number of molecules") {
    const auto p = reference();
    const auto q = p.with(ParamId::NumMolecules, 2.0 * p.molecules);
    for (const double t : {0.3e-3, 2e-3, 7e-3}) CHECK(expected_observations(q, t) == 2.0 * expected_observations(p, t));
}

TEST_CASE("mirror placement gives the same count at one instant") {
    const auto p = reference();
    for (const double t : {1e-3, 2e-3, 5e-3}) {
        const auto mirror = p.with(ParamId::Distance, 2.0 * p.flow_par * t - p.distance);
        CHECK(rel_close(expected_observations(mirror, t), expected_observations(p, t), 1e-12));
    }
}

TEST_CASE("log form agrees with the direct form") {
    const auto p = reference();
    for (const double t : {0.2e-3, 2e-3, 9e-3}) {
        CHECK(rel_close(std::exp(log_expected_observations(p, t)), expected_observations(p, t), 1e-12));
    }
}

TEST_CASE("Peclet number at 4 um") {
    const auto p = reference().with(ParamId::Distance, 4e-6);
    CHECK(std::abs(peclet_number(p) - 8.94) < 0.01);
}

TEST_CASE("peak counts without flow") {
    // Values the closed form gives at 4 um; they are recorded rather than the
    // much smaller figures sometimes quoted for this setting.
    auto p = reference().with(ParamId::Distance, 4e-6);
    p.flow_par = p.flow_perp = 0.0;
    p.degradation = 0.0;
    CHECK(rel_close(expected_observations(p, peak_time(p)), 60.2266913295973737, 1e-12));
    p.degradation = 62.5;
    CHECK(rel_close(peak_time(p), 2.42220510185595717e-3, 1e-12));
    CHECK(rel_close(expected_observations(p, peak_time(p)), 51.3963103503028019, 1e-12));
}

TEST_CASE("parameter names and accessors") {
    for (const ParamId id : kAllParams) {
        CHECK(param_from_name(param_name(id)) == id);
        auto p = reference();
        p.set(id, 0.125);
        CHECK(p.get(id) == 0.125);
    }
    CHECK_FALSE(param_from_name("velocity").has_value());
    CHECK(rel_close(reference().rx_volume(), 4.0 / 3.0 * M_PI * 0.125e-18, 1e-14));
}

TEST_CASE("validation") {
    CHECK_NOTHROW(reference().validate());
    CHECK_THROWS_AS(reference().with(ParamId::Diffusion, 0.0).validate(), DomainError);
    CHECK_THROWS_AS(reference().with(ParamId::NumMolecules, -1.0).validate(), DomainError);
    auto p = reference();
    p.rx_radius = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    // Negative distance and degradation are legal.
    CHECK_NOTHROW(reference().with(ParamId::Distance, -3e-6).validate());
    CHECK_NOTHROW(reference().with(ParamId::Degradation, -10.0).validate());
}
