#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"

#include "snwe/cli_io.hpp"

namespace {

double parse_exponent(const std::string& text)
{
    if (text == "inf" || text == "infinity") return snwe::kInf;
    return std::stod(text);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spectral-Galerkin simulator and verification harness for the 2-D stochastic wave equation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> threads;
    std::string out_dir;
    app.add_option("--seed", seed, "Master seed of every random stream");
    app.add_option("--paths", paths, "Monte Carlo path count (overrides the config)");
    app.add_option("--threads", threads, "Worker threads; never changes results");
    app.add_option("--out", out_dir, std::string("Output directory (default: $") + snwe::kOutputDirEnv + " or ./snwe_out)");

    std::string config_path;
    std::string p_text = "4";
    std::string q_text = "4";
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Solve the truncated mild equation path by path"},
        {"verify-cluster", "Spectral cluster growth exponents"},
        {"verify-strichartz", "Homogeneous and inhomogeneous Strichartz ratio sweeps"},
        {"verify-stochastic", "Monte Carlo moment constants with bootstrap intervals"},
        {"verify-stopped", "Stopped-convolution identity on threshold stopping times"},
        {"ledger", "Full constant-estimation campaign"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file or a run manifest to replay");
    }
    auto* adm = app.add_subcommand("admissible", "Derive r for (p, q) and check admissibility");
    adm->add_option("--p", p_text, "time exponent p (number or inf)")->required();
    adm->add_option("--q", q_text, "space exponent q (number or inf)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();

    try {
        snwe::RunConfig config;
        if (subcommand == "admissible") {
            config.subcommand = subcommand;
            config.p = parse_exponent(p_text);
            config.q = parse_exponent(q_text);
            return snwe::run(config, std::cout).exit_code;
        }
        if (!config_path.empty()) config = snwe::load_config(config_path);
        config.subcommand = subcommand;
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        if (paths) {
            config.paths = *paths;
            config.sweep["path_counts"] = {*paths};
        }
        if (!out_dir.empty()) config.output_dir = out_dir;
        return snwe::run(config, std::cout).exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
