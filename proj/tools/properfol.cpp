#include <charconv>
#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

#include <CLI11.hpp>

#include "properfol/app/commands.hpp"

namespace {

/// Unsigned integer from the environment; throws ConfigError on junk.
std::optional<std::uint64_t> env_uint(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    const std::string_view text(v);
    std::uint64_t x = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw properfol::ConfigError(std::string("environment: ") + name + ": not an unsigned integer");
    return x;
}

} // namespace

int main(int argc, char** argv) {
    using namespace properfol;
    CLI::App cli{"properfol: relativistic Bohmian trajectories on proper foliations"};
    cli.require_subcommand(1);
    std::string config, out_dir;
    for (const char* name : {"check", "foliation", "evolve", "ensemble"}) {
        auto* sub = cli.add_subcommand(name);
        sub->add_option("--config", config, "scenario YAML file")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
    }
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : app::kConfigError;
    }
    const std::string cmd = cli.get_subcommands().front()->get_name();

    try {
        ScenarioConfig cfg = load_scenario(config);
        if (auto t = env_uint("PROPERFOL_THREADS")) cfg.threads = std::max<std::uint64_t>(1, *t);
        if (auto s = env_uint("PROPERFOL_SEED")) cfg.seed = *s;
        if (cmd == "check") return app::cmd_check(cfg, out_dir, std::cout);
        if (cmd == "foliation") return app::cmd_foliation(cfg, out_dir, std::cout);
        if (cmd == "evolve") return app::cmd_evolve(cfg, out_dir, std::cout);
        return app::cmd_ensemble(cfg, out_dir, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return app::kConfigError;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return app::kIoError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return app::kPhysicsFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return app::kPhysicsFailure;
    }
}
