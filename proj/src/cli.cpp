#include "oclb/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "oclb/errors.hpp"
#include "oclb/experiment.hpp"

namespace oclb {

namespace {

struct GlobalFlags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> orderings;
    std::optional<std::size_t> threads;
};

ExperimentConfig resolve_config(const GlobalFlags& f) {
    if (f.config.empty()) {
        throw ConfigError("--config is required");
    }
    const std::filesystem::path path = f.config;
    RawConfig raw = RawConfig::load(path);
    if (f.out) raw.set("output", *f.out);
    if (f.seed) raw.set("seed", std::to_string(*f.seed));
    if (f.orderings) raw.set("orderings", std::to_string(*f.orderings));
    if (f.threads) {
        raw.set("threads", std::to_string(*f.threads));
    } else if (const char* env = std::getenv("OCLBENCH_THREADS"); env && *env) {
        raw.set("threads", env);
    }
    return parse_experiment_config(raw, path.parent_path());
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Online continual learning benchmark with moment pooling"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config, "experiment config file");
    app.add_option("--out", flags.out, "output directory (overrides `output`)");
    app.add_option("--seed", flags.seed, "base seed (overrides `seed`)");
    app.add_option("--orderings", flags.orderings, "number of class orderings")->check(CLI::PositiveNumber);
    app.add_option("--threads", flags.threads, "evaluation threads; falls back to OCLBENCH_THREADS")
        ->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "stream every method and write metrics and reports");
    auto* grid = app.add_subcommand("grid", "train x test augmentation grid with Avg-OD and RARG");
    auto* bench = app.add_subcommand("bench", "training time and FPS against average pooling");
    auto* gen = app.add_subcommand("gen", "export the configured dataset as OCLT records and a manifest");

    auto* compare = app.add_subcommand("compare", "compare metrics.csv files across configs");
    std::vector<std::string> files;
    std::optional<std::string> method;
    std::optional<std::string> baseline;
    compare->add_option("files", files, "metrics.csv files; the parent directory names the config")->required();
    compare->add_option("--method", method, "method whose gain is reported (default: last seen)");
    compare->add_option("--baseline", baseline, "baseline method (default: first seen)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (compare->parsed()) {
            std::vector<std::filesystem::path> paths(files.begin(), files.end());
            const std::string md = cmd_compare(paths, method, baseline);
            if (flags.out) {
                std::filesystem::create_directories(*flags.out);
                write_text(std::filesystem::path(*flags.out) / "compare.md", md);
            }
            std::cout << md;
            return 0;
        }
        const ExperimentConfig config = resolve_config(flags);
        if (run->parsed()) {
            cmd_run(config);
            std::cout << "wrote " << (config.output / "report.md").string() << "\n";
        } else if (grid->parsed()) {
            cmd_grid(config);
            std::cout << "wrote " << (config.output / "grid.md").string() << "\n";
        } else if (bench->parsed()) {
            for (const auto& r : cmd_bench(config)) {
                std::cout << r.method << " " << r.pooling << " fps " << fmt4(r.fps) << " delta "
                          << fmt4(r.fps_delta_pct) << "%\n";
            }
        } else if (gen->parsed()) {
            std::cout << "wrote " << cmd_gen(config).string() << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace oclb
