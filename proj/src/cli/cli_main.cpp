#include "flowguard/cli.hpp"

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "runners.hpp"

#include "flowguard/errors.hpp"

namespace flowguard {

namespace {

using Runner = void (*)(const cli::RunContext&);

const std::map<std::string, std::pair<Runner, const char*>>& subcommands() {
    static const std::map<std::string, std::pair<Runner, const char*>> table{
        {"gauss-attack",
         {cli::run_gauss_attack, "Fit a Gaussian by MLE and sweep exact likelihood attacks over eps"}},
        {"gauss-universal",
         {cli::run_gauss_universal, "Universal perturbation and the retraining no-op check"}},
        {"gauss-tradeoff",
         {cli::run_gauss_tradeoff, "Closed-form robustness/accuracy trade-off curve"}},
        {"gauss-certify",
         {cli::run_gauss_certify, "Adversarial-training step bound with Monte Carlo verification"}},
        {"flow-train", {cli::run_flow_train, "Train a flow (clean, adversarial or hybrid)"}},
        {"flow-attack", {cli::run_flow_attack, "FGSM/PGD/noise sweeps against trained flows"}},
        {"flow-cross-eval",
         {cli::run_flow_cross_eval, "Evaluate generator samples under another model"}},
    };
    return table;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"flowguard: exact likelihood attacks on linear models and "
                 "adversarially trainable normalizing flows"};
    app.require_subcommand(1);

    struct Args {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        bool seed_set = false;
        bool quiet = false;
    };
    std::map<std::string, Args> args;
    std::string chosen;

    for (const auto& [name, entry] : subcommands()) {
        CLI::App* sub = app.add_subcommand(name, entry.second);
        Args& a = args[name];
        sub->add_option("--config", a.config, "JSON run configuration")->required();
        sub->add_option("--out", a.out, "output directory")->required();
        sub->add_option("--seed", a.seed, "override the config seed")->each([&a](const std::string&) {
            a.seed_set = true;
        });
        sub->add_flag("--quiet", a.quiet, "suppress progress output");
        sub->callback([&chosen, name = name]() { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const Args& a = args[chosen];
    try {
        cli::RunContext ctx;
        ctx.config = cli::load_config_file(a.config);
        if (!ctx.config.is_object()) throw ConfigError("config root must be a JSON object");
        ctx.out_dir = a.out;
        ctx.seed = a.seed_set ? a.seed : ctx.config.value("seed", 0ULL);
        ctx.quiet = a.quiet;

        cli::OutputLock lock(a.out);
        subcommands().at(chosen).first(ctx);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace flowguard
