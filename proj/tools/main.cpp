#include <molcomm/config.hpp>
#include <molcomm/errors.hpp>
#include <molcomm/experiment.hpp>
#include <molcomm/results.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "-";
    std::string format = "csv";
    std::optional<std::string> generator;
    std::optional<int> trials;
    std::optional<int> threads;
};

void add_shared_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "JSON experiment config (defaults apply when omitted)");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--out", o.out, "Output path, '-' for stdout");
    cmd->add_option("--format", o.format, "Output format: csv or json");
    cmd->add_option("--generator", o.generator, "Observation generator: poisson or particle");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials per sweep point");
    cmd->add_option("--threads", o.threads, "Worker threads, 0 for all cores (results do not depend on it)");
}

int run(molcomm::ExperimentKind kind, const Options& o) {
    const molcomm::OutputFormat format = molcomm::parse_format(o.format);
    molcomm::SweepSpec spec =
        o.config.empty() ? molcomm::parse_config("{}", kind) : molcomm::load_config(o.config, kind);
    if (o.seed) spec.seed = *o.seed;
    if (o.generator) spec.generator = molcomm::parse_generator(*o.generator);
    if (o.trials) spec.trials = *o.trials;
    if (o.threads) spec.threads = *o.threads;
    spec.validate();
    const molcomm::ResultTable table = molcomm::run_experiment(spec);
    molcomm::emit_results(table, format, o.out);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Channel-parameter estimation experiments for diffusive molecular communication"};
    app.set_version_flag("--version", std::string(molcomm::library_version()));
    app.require_subcommand(1);

    Options options;
    std::optional<molcomm::ExperimentKind> kind;
    const std::pair<const char*, const char*> subcommands[] = {
        {"impulse", "Compare simulated counts with the expected impulse response"},
        {"crlb", "Cramer-Rao bounds over a sweep"},
        {"estimate", "Likelihood estimator errors against the bounds"},
        {"peak", "Peak-based estimator errors against the bounds"},
    };
    for (const auto& [name, help] : subcommands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_shared_options(cmd, options);
        const std::string text = name;
        cmd->callback([&kind, text] {
            if (text == "impulse") kind = molcomm::ExperimentKind::Impulse;
            else if (text == "crlb") kind = molcomm::ExperimentKind::Crlb;
            else if (text == "estimate") kind = molcomm::ExperimentKind::Estimate;
            else kind = molcomm::ExperimentKind::Peak;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        return run(*kind, options);
    } catch (const molcomm::IoError& e) {
        std::cerr << "molcomm: " << e.what() << '\n';
        return kExitIo;
    } catch (const molcomm::ConfigError& e) {
        std::cerr << "molcomm: " << e.what() << '\n';
        return kExitConfig;
    } catch (const molcomm::UsageError& e) {
        std::cerr << "molcomm: " << e.what() << '\n';
        return kExitConfig;
    } catch (const molcomm::DomainError& e) {
        std::cerr << "molcomm: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "molcomm: internal error: " << e.what() << '\n';
        return kExitFailure;
    }
}
