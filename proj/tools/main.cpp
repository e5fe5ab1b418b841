#include <CLI11.hpp>

#include <iostream>

#include "runner.hpp"

using namespace normflow::runner;

namespace {

struct Options {
    std::string config;
    Overrides overrides;
};

void add_common(CLI::App& cmd, Options& opt)
{
    cmd.add_option("--config", opt.config, "JSON configuration file; flags below override its values")
        ->check(CLI::ExistingFile);
    cmd.add_option("--seed", opt.overrides.seed, "root seed (default 1)");
    cmd.add_option("--out", opt.overrides.output_dir, "output directory (default out)");
    cmd.add_option("--t-end", opt.overrides.t_end, "flow horizon (default 1, one-neuron 100)");
    cmd.add_option("--step", opt.overrides.step, "integration step (default 0.001)");
    cmd.add_option("--integrator", opt.overrides.integrator, "euler or rk4 (default rk4)")
        ->check(CLI::IsMember({"euler", "rk4"}));
    cmd.add_flag("--no-reproject", opt.overrides.no_reproject, "skip the renormalization after each flow step");
    cmd.add_option("--gamma", opt.overrides.gamma,
                   "step-size factor: a number or 'rescaled' (default 1; gd default 0.001, numeric only)");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Normalized gradient flows and gradient descent for mean-centred ReLU networks"};
    app.footer("Configuration keys and defaults:\n" + default_config().dump(2));
    app.require_subcommand(1);

    Options opt;
    std::optional<Mode> mode;
    const std::pair<const char*, const char*> commands[] = {
        {"flow", "integrate the projected gradient flow of a network"},
        {"gd", "run normalized gradient descent on a network"},
        {"one-neuron", "one-neuron boundedness experiments with monitors"},
        {"verify", "run the property checks and write verify_report.json"},
    };
    for (const auto& [name, help] : commands) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(*cmd, opt);
        const std::string n = name;
        cmd->callback([&mode, n] { mode = parse_mode(n); });
    }
    CLI11_PARSE(app, argc, argv);

    try {
        const Json file = opt.config.empty() ? Json() : load_config(opt.config);
        const Json cfg = resolve_config(file, *mode, opt.overrides);
        const auto outcome = run(cfg, std::cout);
        return outcome.ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
