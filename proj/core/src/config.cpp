#include "molcomm/config.hpp"

#include "molcomm/errors.hpp"
#include "molcomm/quantity.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace molcomm {

namespace {

using Json = nlohmann::json;

void allow_keys(const Json& obj, std::string_view section, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) throw ConfigError("'" + std::string(section) + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const auto k : keys) known = known || key == k;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + std::string(section));
    }
}

double quantity(const Json& j, Dimension dim, std::string_view where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        try {
            return parse_quantity(j.get<std::string>(), dim);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(where) + ": " + e.what());
        }
    }
    throw ConfigError(std::string(where) + " must be a number or a quantity string");
}

std::int64_t integer(const Json& j, std::string_view where) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    throw ConfigError(std::string(where) + " must be an integer");
}

std::string text(const Json& j, std::string_view where) {
    if (!j.is_string()) throw ConfigError(std::string(where) + " must be a string");
    return j.get<std::string>();
}

std::vector<int> int_list(const Json& j, std::string_view where) {
    std::vector<int> out;
    if (j.is_array()) {
        for (const auto& v : j) out.push_back(static_cast<int>(integer(v, where)));
    } else {
        out.push_back(static_cast<int>(integer(j, where)));
    }
    return out;
}

ParamId param(std::string_view name, std::string_view where) {
    const auto id = param_from_name(name);
    if (!id) throw ConfigError("unknown parameter '" + std::string(name) + "' in " + std::string(where));
    return *id;
}

void parse_channel(const Json& j, ChannelParams& p) {
    allow_keys(j, "channel",
               {"distance", "release_time", "diffusion", "degradation", "flow_parallel", "flow_perpendicular",
                "molecules", "rx_radius"});
    for (const auto& [key, value] : j.items()) {
        if (key == "rx_radius") {
            p.rx_radius = quantity(value, Dimension::Length, "channel.rx_radius");
            continue;
        }
        const ParamId id = param(key, "channel");
        p.set(id, quantity(value, dimension_of(id), "channel." + key));
    }
}

std::vector<double> sweep_values(const Json& j, Dimension dim) {
    std::vector<double> out;
    if (j.contains("values")) {
        if (!j.at("values").is_array()) throw ConfigError("sweep.values must be an array");
        for (const auto& v : j.at("values")) out.push_back(quantity(v, dim, "sweep.values"));
    }
    if (j.contains("range")) {
        if (!out.empty()) throw ConfigError("sweep takes either values or range, not both");
        const Json& r = j.at("range");
        allow_keys(r, "sweep.range", {"start", "stop", "step"});
        const double start = quantity(r.at("start"), dim, "sweep.range.start");
        const double stop = quantity(r.at("stop"), dim, "sweep.range.stop");
        const double step = quantity(r.at("step"), dim, "sweep.range.step");
        if (!(step > 0.0) || !(stop >= start)) throw ConfigError("sweep.range needs step > 0 and stop >= start");
        const double span = (stop - start) / step;
        if (span > 1e6) throw ConfigError("sweep.range has too many points");
        // Tolerate the rounding of a stop that lies on the grid.
        const auto count = static_cast<long>(std::floor(span + 1e-9)) + 1;
        for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    }
    return out;
}

void parse_sweep(const Json& j, SweepSpec& spec) {
    allow_keys(j, "sweep", {"variable", "values", "range"});
    if (j.contains("variable")) spec.sweep_variable = text(j.at("variable"), "sweep.variable");
    Dimension dim = Dimension::Count;
    if (spec.sweep_variable != kSamplesVariable) dim = dimension_of(param(spec.sweep_variable, "sweep.variable"));
    spec.sweep_values = sweep_values(j, dim);
}

void parse_sampling(const Json& j, SweepSpec& spec) {
    allow_keys(j, "sampling", {"samples", "variant"});
    if (j.contains("samples")) spec.samples = int_list(j.at("samples"), "sampling.samples");
    if (j.contains("variant")) spec.variant = parse_sampling_variant(text(j.at("variant"), "sampling.variant"));
}

void parse_bounds(const Json& j, SweepSpec& spec) {
    if (!j.is_object()) throw ConfigError("'bounds' must be an object");
    for (const auto& [key, value] : j.items()) {
        const ParamId id = param(key, "bounds");
        if (!value.is_array() || value.size() != 2) throw ConfigError("bounds." + key + " must be [min, max]");
        spec.bounds[id] = {quantity(value[0], dimension_of(id), "bounds." + key),
                           quantity(value[1], dimension_of(id), "bounds." + key)};
    }
}

void parse_references(const Json& j, SweepSpec& spec) {
    if (!j.is_object()) throw ConfigError("'references' must be an object");
    for (const auto& [key, value] : j.items()) {
        const ParamId id = param(key, "references");
        spec.references[id] = quantity(value, dimension_of(id), "references." + key);
    }
}

void parse_grid(const Json& j, SweepSpec& spec) {
    allow_keys(j, "grid", {"points", "refinements"});
    if (j.contains("points")) spec.grid.points = int_list(j.at("points"), "grid.points");
    if (j.contains("refinements")) spec.grid.refinements = static_cast<int>(integer(j.at("refinements"), "grid.refinements"));
}

void parse_newton(const Json& j, SweepSpec& spec) {
    allow_keys(j, "newton", {"max_iterations", "relative_step", "pivot_tolerance"});
    if (j.contains("max_iterations")) {
        spec.newton.max_iterations = static_cast<int>(integer(j.at("max_iterations"), "newton.max_iterations"));
    }
    if (j.contains("relative_step")) {
        spec.newton.relative_step = quantity(j.at("relative_step"), Dimension::Count, "newton.relative_step");
    }
    if (j.contains("pivot_tolerance")) {
        spec.newton.pivot_tolerance = quantity(j.at("pivot_tolerance"), Dimension::Count, "newton.pivot_tolerance");
    }
}

void parse_peak(const Json& j, SweepSpec& spec) {
    allow_keys(j, "peak", {"windows", "targets"});
    if (j.contains("windows")) spec.windows = int_list(j.at("windows"), "peak.windows");
    if (j.contains("targets")) {
        spec.peak_targets.clear();
        if (!j.at("targets").is_array()) throw ConfigError("peak.targets must be an array");
        for (const auto& t : j.at("targets")) spec.peak_targets.push_back(parse_peak_target(text(t, "peak.targets")));
    }
}

void parse_simulation(const Json& j, SweepSpec& spec) {
    allow_keys(j, "simulation", {"time_step", "steps", "source", "propagation", "record_steps"});
    auto& s = spec.simulation;
    if (j.contains("time_step")) s.time_step = quantity(j.at("time_step"), Dimension::Time, "simulation.time_step");
    if (j.contains("steps")) s.steps = static_cast<int>(integer(j.at("steps"), "simulation.steps"));
    if (j.contains("record_steps")) s.record_steps = int_list(j.at("record_steps"), "simulation.record_steps");
    if (j.contains("source")) {
        const auto name = text(j.at("source"), "simulation.source");
        if (name == "lattice") s.source = SourceMode::Lattice;
        else if (name == "point") s.source = SourceMode::Point;
        else throw ConfigError("simulation.source must be 'lattice' or 'point'");
    }
    if (j.contains("propagation")) {
        const auto name = text(j.at("propagation"), "simulation.propagation");
        if (name == "per_step") s.propagation = Propagation::PerStep;
        else if (name == "sample_skip") s.propagation = Propagation::SampleSkip;
        else throw ConfigError("simulation.propagation must be 'per_step' or 'sample_skip'");
    }
}

} // namespace

SweepSpec parse_config(std::string_view json_text, ExperimentKind kind) {
    Json doc;
    try {
        doc = Json::parse(json_text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    SweepSpec spec;
    spec.kind = kind;
    if (kind == ExperimentKind::Impulse) spec.sweep_variable = "distance";
    try {
        allow_keys(doc, "config",
                   {"experiment", "channel", "sweep", "sampling", "unknowns", "estimators", "bounds", "grid", "newton",
                    "peak", "simulation", "generator", "trials", "seed", "threads", "references"});
        if (doc.contains("experiment")) {
            const auto name = text(doc.at("experiment"), "experiment");
            if (name != experiment_name(kind)) {
                throw ConfigError("config is for the '" + name + "' experiment, not '" +
                                  std::string(experiment_name(kind)) + "'");
            }
        }
        if (doc.contains("channel")) parse_channel(doc.at("channel"), spec.truth);
        if (doc.contains("sweep")) parse_sweep(doc.at("sweep"), spec);
        if (doc.contains("sampling")) parse_sampling(doc.at("sampling"), spec);
        if (doc.contains("unknowns")) {
            spec.unknowns.clear();
            const Json& u = doc.at("unknowns");
            if (!u.is_array()) throw ConfigError("unknowns must be an array of parameter names");
            for (const auto& name : u) spec.unknowns.push_back(param(text(name, "unknowns"), "unknowns"));
        }
        if (doc.contains("estimators")) {
            const Json& e = doc.at("estimators");
            if (!e.is_array()) throw ConfigError("estimators must be an array");
            for (const auto& name : e) spec.estimators.push_back(parse_estimator(text(name, "estimators")));
        }
        if (doc.contains("bounds")) parse_bounds(doc.at("bounds"), spec);
        if (doc.contains("references")) parse_references(doc.at("references"), spec);
        if (doc.contains("grid")) parse_grid(doc.at("grid"), spec);
        if (doc.contains("newton")) parse_newton(doc.at("newton"), spec);
        if (doc.contains("peak")) parse_peak(doc.at("peak"), spec);
        if (doc.contains("simulation")) parse_simulation(doc.at("simulation"), spec);
        if (doc.contains("generator")) spec.generator = parse_generator(text(doc.at("generator"), "generator"));
        if (doc.contains("trials")) spec.trials = static_cast<int>(integer(doc.at("trials"), "trials"));
        if (doc.contains("seed")) {
            const Json& s = doc.at("seed");
            if (!s.is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
            spec.seed = s.get<std::uint64_t>();
        }
        if (doc.contains("threads")) spec.threads = static_cast<int>(integer(doc.at("threads"), "threads"));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config has the wrong shape: ") + e.what());
    }
    spec.validate();
    return spec;
}

SweepSpec load_config(const std::filesystem::path& path, ExperimentKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed to read config '" + path.string() + "'");
    try {
        return parse_config(buf.str(), kind);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace molcomm
