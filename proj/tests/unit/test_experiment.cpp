#include <doctest.h>

#include "support.hpp"

#include <molcomm/config.hpp>
#include <molcomm/errors.hpp>
#include <molcomm/experiment.hpp>
#include <molcomm/quantity.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace molcomm;
using test::rel_close;

namespace {

SweepSpec crlb_spec(std::vector<ParamId> unknowns, std::vector<int> samples) {
    SweepSpec s;
    s.kind = ExperimentKind::Crlb;
    s.unknowns = std::move(unknowns);
    s.samples = std::move(samples);
    return s;
}

const BoundEntry& bound(const SweepRow& row, std::string_view name) {
    for (const auto& b : row.bounds) {
        if (b.parameter == name) return b;
    }
    FAIL("missing bound ", name);
    return row.bounds.front();
}

const EstimateEntry& estimate(const SweepRow& row, std::string_view est, std::string_view name) {
    for (const auto& e : row.estimates) {
        if (e.estimator == est && e.parameter == name) return e;
    }
    FAIL("missing estimate ", est, " ", name);
    return row.estimates.front();
}

std::size_t column(const ResultTable& t, std::string_view name) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    REQUIRE(it != t.columns.end());
    return static_cast<std::size_t>(it - t.columns.begin());
}

} // namespace

TEST_CASE("sampling schemes") {
    CHECK(build_scheme(1, SamplingVariant::Default).times == std::vector<double>{2e-3});
    CHECK(build_scheme(2, SamplingVariant::Default).times == std::vector<double>{5e-3, 10e-3});
    CHECK(build_scheme(2, SamplingVariant::Anchored).times == std::vector<double>{2e-3, 3e-3});
    CHECK(build_scheme(1, SamplingVariant::Anchored).times == std::vector<double>{2e-3});

    const auto m100 = build_scheme(100, SamplingVariant::Anchored).times;
    REQUIRE(m100.size() == 100);
    CHECK(m100[19] == 2e-3);
    CHECK(m100.front() == 1e-4);
    CHECK(m100.back() == 10e-3);
    CHECK(std::is_sorted(m100.begin(), m100.end()));
    CHECK(build_scheme(5, SamplingVariant::Anchored).times[0] == 2e-3);

    CHECK_THROWS_AS(build_scheme(0, SamplingVariant::Default), ConfigError);
    CHECK_THROWS_AS(build_scheme(3, SamplingVariant::Anchored), ConfigError);
    CHECK_NOTHROW(build_scheme(3, SamplingVariant::Default));
}

TEST_CASE("a single sample at the zero of the distance sensitivity is unbounded") {
    auto s = crlb_spec({ParamId::Distance}, {1});
    s.truth.distance = 4e-6;
    s.variant = SamplingVariant::Anchored;
    const auto rows = run_crlb_sweep(s);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].singular);
    CHECK_FALSE(bound(rows[0], "distance").crlb.has_value());
    const auto table = sweep_table(s, rows);
    CHECK(std::holds_alternative<Unbounded>(table.rows[0][column(table, "crlb_distance")]));
    CHECK(to_csv(table).find(",unbounded,") != std::string::npos);
}

TEST_CASE("bound on the molecule count alone") {
    auto s = crlb_spec({ParamId::NumMolecules}, {100});
    const auto rows = run_crlb_sweep(s);
    const auto& b = bound(rows[0], "molecules");
    REQUIRE(b.normalized.has_value());
    CHECK(rel_close(*b.normalized, 3.45055521890008e-4, 1e-9));
}

TEST_CASE("adding unknowns never tightens a bound") {
    const std::vector<ParamId> order{ParamId::Distance, ParamId::ReleaseTime, ParamId::FlowPar, ParamId::FlowPerp};
    for (const auto& first : {ParamId::Distance, ParamId::Degradation}) {
        std::vector<ParamId> unknowns{first};
        double previous = 0.0;
        for (const ParamId next : order) {
            if (next != first) unknowns.push_back(next);
            if (unknowns.size() > 4) break;
            const auto rows = run_crlb_sweep(crlb_spec(unknowns, {100}));
            const auto& b = bound(rows[0], param_name(first));
            REQUIRE(b.crlb.has_value());
            CHECK(*b.crlb >= previous);
            previous = *b.crlb;
        }
    }
}

TEST_CASE("more samples give tighter bounds") {
    auto s = crlb_spec({ParamId::Distance, ParamId::Diffusion}, {100});
    s.sweep_values = {10, 20, 40, 50, 80, 100, 200};
    const auto rows = run_crlb_sweep(s);
    REQUIRE(rows.size() == 7);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        for (const char* name : {"distance", "diffusion"}) {
            CHECK(*bound(rows[i], name).crlb < *bound(rows[i - 1], name).crlb);
        }
    }
}

TEST_CASE("parameter sweeps cross every sample count") {
    auto s = crlb_spec({ParamId::Distance}, {1, 10});
    s.sweep_variable = "distance";
    s.sweep_values = {2e-6, 6e-6};
    const auto rows = run_crlb_sweep(s);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].swept == 2e-6);
    CHECK(rows[1].samples == 10);
    CHECK(rows[3].swept == 6e-6);
    const auto table = sweep_table(s, rows);
    CHECK(table.columns[0] == "distance");
    CHECK(table.units[0] == "m");
    CHECK(table.units[column(table, "crlb_distance")] == "m^2");
}

TEST_CASE("an estimator without a single valid trial reports no error") {
    SweepSpec s;
    s.kind = ExperimentKind::Estimate;
    s.estimators = {EstimatorKind::MlNewton};
    s.newton.max_iterations = 0;
    s.trials = 20;
    const auto rows = run_estimator_sweep(s);
    const auto& e = estimate(rows[0], "ml_newton", "distance");
    CHECK_FALSE(e.mse.has_value());
    CHECK(e.failures == 20);
    const auto table = sweep_table(s, rows);
    CHECK(std::holds_alternative<Absent>(table.rows[0][column(table, "mse_ml_newton_distance")]));
}

TEST_CASE("grid-search distance error approaches the bound with many samples") {
    SweepSpec s;
    s.kind = ExperimentKind::Estimate;
    s.trials = 1000;
    s.seed = 11;
    const auto rows = run_estimator_sweep(s);
    const auto& e = estimate(rows[0], "ml_grid", "distance");
    const double ratio = *e.mse / *bound(rows[0], "distance").crlb;
    MESSAGE("MSE / CRLB = ", ratio);
    CHECK(ratio > 0.75);
    CHECK(ratio < 1.4);
    CHECK(e.failures == 0);
}

TEST_CASE("single-sample estimators report the same error family") {
    SweepSpec s;
    s.kind = ExperimentKind::Estimate;
    s.samples = {1};
    s.estimators = {EstimatorKind::MlGrid, EstimatorKind::MlAnalytic};
    s.trials = 500;
    s.truth.distance = 6e-6;
    const auto rows = run_estimator_sweep(s);
    const auto& grid = estimate(rows[0], "ml_grid", "distance");
    const auto& analytic = estimate(rows[0], "ml_analytic", "distance");
    REQUIRE(grid.mse.has_value());
    REQUIRE(analytic.mse.has_value());
    // Both pick a root of the same likelihood, so their errors are of one order.
    CHECK(*grid.mse < 10.0 * *analytic.mse);
    CHECK(*analytic.mse < 10.0 * *grid.mse);
}

TEST_CASE("distance from the peak time tracks the single-sample bound") {
    SweepSpec s;
    s.kind = ExperimentKind::Peak;
    s.trials = 2000;
    s.windows = {7};
    const auto rows = run_peak_sweep(s);
    REQUIRE(rows.size() == 1);
    const auto& e = estimate(rows[0], "peak_time", "distance");
    const auto& b = bound(rows[0], "distance");
    REQUIRE(e.mse.has_value());
    REQUIRE(b.crlb.has_value());
    const double ratio = *e.mse / *b.crlb;
    MESSAGE("peak-time distance MSE / single-sample CRLB = ", ratio);
    CHECK(ratio < 10.0);
    CHECK(ratio > 0.1);
}

TEST_CASE("peak sweeps skip unsupported combinations") {
    SweepSpec s;
    s.kind = ExperimentKind::Peak;
    s.trials = 10;
    s.windows = {1, 3};
    s.peak_targets = {PeakTarget::ReleaseTime, PeakTarget::FlowMagnitude, PeakTarget::NumMolecules};
    const auto rows = run_peak_sweep(s);
    REQUIRE(rows.size() == 2);
    std::vector<std::string> keys;
    for (const auto& e : rows[0].estimates) keys.push_back(e.estimator + "/" + e.parameter);
    CHECK(keys == std::vector<std::string>{"peak_time/release_time", "peak_time/flow_magnitude",
                                           "peak_value/molecules", "peak_time_value/release_time",
                                           "peak_time_value/molecules"});
    CHECK_FALSE(bound(rows[0], "flow_magnitude").defined);
    const auto table = sweep_table(s, rows);
    CHECK(std::holds_alternative<Absent>(table.rows[0][column(table, "crlb_flow_magnitude")]));
    CHECK(table.units[column(table, "mse_peak_time_flow_magnitude")] == "(m/s)^2");
}

TEST_CASE("impulse validation") {
    SweepSpec s;
    s.kind = ExperimentKind::Impulse;
    s.trials = 200;
    s.truth.molecules = 0.0;
    s.simulation.record_steps = {10, 20, 50};
    for (const auto& r : run_impulse_validation(s)) {
        CHECK(r.expected == 0.0);
        CHECK(r.sim_mean == 0.0);
        CHECK_FALSE(r.rel_deviation.has_value());
    }

    s.truth.molecules = 1e5;
    s.simulation.record_steps.clear();
    s.sweep_variable = "distance";
    s.sweep_values = {2e-6, 4e-6, 6e-6, 8e-6};
    const auto rows = run_impulse_validation(s);
    REQUIRE(rows.size() == 400);
    double last_peak = HUGE_VAL;
    for (int p = 0; p < 4; ++p) {
        double peak = 0.0;
        for (int m = 0; m < 100; ++m) {
            const auto& r = rows[p * 100 + m];
            CHECK(r.step == m + 1);
            peak = std::max(peak, r.expected);
            CHECK(std::abs(r.sim_mean - r.expected) < 5.0 * std::sqrt(r.expected / r.trials) + 1e-12);
        }
        CHECK(peak < last_peak);
        last_peak = peak;
    }
}

TEST_CASE("particle impulse run at a few steps") {
    SweepSpec s;
    s.kind = ExperimentKind::Impulse;
    s.generator = Generator::Particle;
    s.trials = 200;
    s.truth.molecules = 20000;
    s.simulation.propagation = Propagation::SampleSkip;
    s.simulation.record_steps = {20, 30, 40};
    const auto rows = run_impulse_validation(s);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        REQUIRE(r.survivor_fraction.has_value());
        CHECK(std::abs(*r.survivor_fraction - std::pow(1.0 - 62.5e-4, 100)) < 0.01);
        CHECK(std::abs(*r.rel_deviation) < 0.1);
    }
}

TEST_CASE("tables are deterministic and independent of the worker count") {
    SweepSpec s;
    s.kind = ExperimentKind::Estimate;
    s.samples = {10, 50};
    s.unknowns = {ParamId::Distance, ParamId::ReleaseTime};
    s.estimators = {EstimatorKind::MlNewton, EstimatorKind::MlGrid};
    s.grid.points = {20, 20};
    s.trials = 40;
    s.threads = 1;
    const auto one = to_csv(run_experiment(s));
    s.threads = 4;
    const auto four = to_csv(run_experiment(s));
    CHECK(one == four);
    CHECK(to_csv(run_experiment(s)) == four);
    s.seed = 2;
    CHECK(to_csv(run_experiment(s)) != four);
}

TEST_CASE("empty sweeps produce a header-only table") {
    auto s = crlb_spec({ParamId::Distance, ParamId::Degradation}, {100});
    const auto csv = to_csv(sweep_table(s, {}));
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i < csv.size(); ++i) {
        if (csv[i] == '\n') {
            lines.push_back(csv.substr(start, i - start));
            start = i + 1;
        }
    }
    while (!lines.empty() && lines.front().starts_with("#")) lines.erase(lines.begin());
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "samples,crlb_distance,crlb_norm_distance,crlb_degradation,crlb_norm_degradation,"
                      "condition_number,singular");
    CHECK(lines[1] == "1,m^2,1,(1/s)^2,1,1,1");
}

TEST_CASE("JSON tables round-trip") {
    ResultTable t;
    t.metadata = {{"tool", "molcomm"}, {"note", "a, \"quoted\" value"}};
    t.add_column("a", "m");
    t.add_column("b", "1");
    t.add_column("c", "1");
    t.add_column("d", "1");
    t.add_row({1.5e-6, std::int64_t{3}, Unbounded{}, std::string("x,y")});
    t.add_row({Absent{}, std::int64_t{-1}, HUGE_VAL, 2.0});
    const auto back = table_from_json(to_json(t));
    CHECK(back == t);
    CHECK(to_csv(back) == to_csv(t));
    CHECK_THROWS_AS(t.add_row({1.0}), UsageError);
    CHECK_THROWS_AS(table_from_json("{"), ConfigError);

    const auto real = run_experiment(crlb_spec({ParamId::Distance, ParamId::FlowPar}, {1, 5, 100}));
    CHECK(table_from_json(to_json(real)) == real);
}

TEST_CASE("CSV quoting and number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(6e-6) == "6e-06");
    CHECK(format_number(HUGE_VAL) == "inf");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    ResultTable t;
    t.add_column("name", "1");
    t.add_row({std::string("say \"hi\", ok")});
    CHECK(to_csv(t) == "name\n1\n\"say \"\"hi\"\", ok\"\n");
}

TEST_CASE("quantity strings") {
    CHECK(parse_quantity("6 um", Dimension::Length) == 6e-6);
    CHECK(parse_quantity("6um", Dimension::Length) == 6e-6);
    CHECK(parse_quantity("0.006 mm", Dimension::Length) == 6e-6);
    CHECK(parse_quantity("6e3 nm", Dimension::Length) == 6e-6);
    CHECK(parse_quantity("6 \xC2\xB5m", Dimension::Length) == 6e-6);
    CHECK(parse_quantity("2 ms", Dimension::Time) == 2e-3);
    CHECK(parse_quantity("-1 ms", Dimension::Time) == -1e-3);
    CHECK(parse_quantity("79.4 um^2/s", Dimension::Diffusivity) == 79.4e-12);
    CHECK(parse_quantity("62.5 1/s", Dimension::Rate) == 62.5);
    CHECK(parse_quantity("0.0625 1/ms", Dimension::Rate) == 62.5);
    CHECK(parse_quantity("1 mm/s", Dimension::Speed) == 1e-3);
    CHECK(parse_quantity("1e5", Dimension::Count) == 1e5);
    CHECK(parse_quantity("3", Dimension::Length) == 3.0);
    CHECK_THROWS_AS(parse_quantity("6 ms", Dimension::Length), ConfigError);
    CHECK_THROWS_AS(parse_quantity("6 parsecs", Dimension::Length), ConfigError);
    CHECK_THROWS_AS(parse_quantity("um", Dimension::Length), ConfigError);
    CHECK_THROWS_AS(parse_quantity("1e", Dimension::Length), ConfigError);
    CHECK_THROWS_AS(parse_quantity("1.2.3 m", Dimension::Length), ConfigError);
}

TEST_CASE("config parsing") {
    const auto s = parse_config(R"({
        "experiment": "crlb",
        "channel": {"distance": "4 um", "diffusion": "79.4 um^2/s", "molecules": 2e4},
        "sweep": {"variable": "distance", "range": {"start": "2 um", "stop": "10 um", "step": "0.2 um"}},
        "sampling": {"samples": [1, 100], "variant": "anchored"},
        "unknowns": ["distance", "release_time"],
        "seed": 7
    })",
                                ExperimentKind::Crlb);
    CHECK(s.truth.distance == 4e-6);
    CHECK(s.truth.diffusion == 79.4e-12);
    CHECK(s.truth.molecules == 2e4);
    CHECK(s.sweep_values.size() == 41);
    CHECK(s.sweep_values.front() == 2e-6);
    CHECK(rel_close(s.sweep_values.back(), 10e-6, 1e-12));
    CHECK(s.samples == std::vector<int>{1, 100});
    CHECK(s.variant == SamplingVariant::Anchored);
    CHECK(s.unknowns == std::vector<ParamId>{ParamId::Distance, ParamId::ReleaseTime});
    CHECK(s.seed == 7);

    const auto impulse = parse_config("{}", ExperimentKind::Impulse);
    CHECK(impulse.sweep_variable == "distance");
    CHECK(impulse.trial_count() == 1000);
    CHECK(parse_config("{}", ExperimentKind::Estimate).resolved_estimators() ==
          std::vector<EstimatorKind>{EstimatorKind::MlGrid});

    const char* bad[] = {
        "{",
        R"({"experiment": "peak"})",
        R"({"colour": 1})",
        R"({"channel": {"distance": "4 ms"}})",
        R"({"channel": {"speed": 1}})",
        R"({"channel": {"distance": -1}})",
        R"({"seed": -3})",
        R"({"trials": 0})",
        R"({"sampling": {"samples": 3, "variant": "anchored"}})",
        R"({"unknowns": ["distance", "distance"]})",
        R"({"estimators": ["peak_time"]})",
        R"({"sweep": {"variable": "colour", "values": [1]}})",
        R"({"sweep": {"variable": "distance", "values": [1], "range": {"start": 1, "stop": 2, "step": 1}}})",
        R"({"simulation": {"propagation": "teleport"}})",
    };
    for (const char* text : bad) {
        CHECK_THROWS_AS_MESSAGE(parse_config(text, ExperimentKind::Crlb), ConfigError, std::string(text));
    }
    CHECK_THROWS_AS(parse_config(R"({"estimators": ["ml_newton"], "unknowns": ["diffusion"]})",
                                 ExperimentKind::Estimate),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"estimators": ["ml_analytic"]})", ExperimentKind::Estimate), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"estimators": ["ml_grid"]})", ExperimentKind::Peak), ConfigError);
}

TEST_CASE("configs reach disk and back") {
    const auto dir = std::filesystem::temp_directory_path() / "molcomm_test_experiment";
    std::filesystem::create_directories(dir);
    const auto path = dir / "crlb.json";
    {
        std::ofstream out(path);
        out << R"({"unknowns": ["distance"], "sampling": {"samples": 100}})";
    }
    CHECK(load_config(path, ExperimentKind::Crlb).samples == std::vector<int>{100});
    CHECK_THROWS_AS(load_config(dir / "missing.json", ExperimentKind::Crlb), IoError);

    const auto table = run_experiment(load_config(path, ExperimentKind::Crlb));
    emit_results(table, OutputFormat::Json, dir / "out.json");
    CHECK(load_results_json(dir / "out.json") == table);
    CHECK_THROWS_AS(emit_results(table, OutputFormat::Csv, dir / "no" / "such" / "dir.csv"), IoError);
    CHECK_THROWS_AS(parse_format("xml"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("equivalent unit spellings give identical output") {
    const char* spellings[] = {
        R"({"channel": {"distance": "6 um", "diffusion": "79.4 um^2/s", "degradation": "62.5 1/s"}})",
        R"({"channel": {"distance": 6e-6, "diffusion": 7.94e-11, "degradation": 62.5}})",
        R"({"channel": {"distance": "0.006 mm", "diffusion": "7.94e-5 mm^2/s", "degradation": "0.0625 1/ms"}})",
    };
    std::vector<std::string> outputs;
    for (const char* text : spellings) {
        auto s = parse_config(text, ExperimentKind::Estimate);
        s.trials = 30;
        outputs.push_back(to_csv(run_experiment(s)));
    }
    CHECK(outputs[0] == outputs[1]);
    CHECK(outputs[1] == outputs[2]);
}
