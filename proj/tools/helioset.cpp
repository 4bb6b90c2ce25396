// helioset: mesh, simulate, sample, summarize, reproduce

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "helioset/experiment.hpp"

namespace ex = helioset::experiment;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    double scale = 1.0;
    std::optional<int> chains;
    std::optional<std::string> out;
    std::string figure;
};

ex::ExperimentConfig resolve(const Options& o) {
    auto c = o.config_path.empty() ? ex::ExperimentConfig{} : ex::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.chains) c.chains = *o.chains;
    if (o.out) c.output_dir = *o.out;
    ex::validate(c);
    return c;
}

void report(const ex::json& result) {
    std::cout << "iou " << result["iou"] << "  acceptance " << result["acceptance_rate"] << "  final misfit "
              << result["final_misfit"] << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian level-set reconstruction of acoustic sources"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "RNG seed");
        sub->add_option("--chains", o.chains, "independent chains")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "output directory");
    };

    auto* mesh = app.add_subcommand("mesh", "write the inversion mesh");
    auto* simulate = app.add_subcommand("simulate", "simulate noisy data from the truth shape");
    auto* sample = app.add_subcommand("sample", "run pCN chains against data.csv");
    auto* summarize = app.add_subcommand("summarize", "recompute summaries from samples.bin");
    auto* reproduce = app.add_subcommand("reproduce", "run a bundled experiment");
    for (auto* s : {mesh, simulate, sample, summarize, reproduce}) add_common(s);
    reproduce->add_option("experiment", o.figure, "fig4, fig5 or fig6")
        ->required()
        ->check(CLI::IsMember({"fig4", "fig5", "fig6"}));
    reproduce->add_option("--scale", o.scale, "scales mesh resolution, steps and frequencies")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (reproduce->parsed()) {
            const fs::path out = o.out.value_or("out/" + o.figure);
            const auto result = ex::run_reproduce(o.figure, o.scale, o.seed.value_or(1), o.chains.value_or(1), out);
            report(result);
            return 0;
        }
        const auto c = resolve(o);
        const fs::path out = c.output_dir;
        if (mesh->parsed()) {
            ex::run_mesh(c, out);
        } else if (simulate->parsed()) {
            ex::run_simulate(c, c.seed, out);
        } else if (sample->parsed()) {
            report(ex::run_sample(c, c.seed, c.chains, out));
        } else if (summarize->parsed()) {
            report(ex::run_summarize(c, out));
        }
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
