#include <string>

#include <CLI11.hpp>

#include "bulkq/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"bulkq: transient solver and verification toolkit for the batch-service queue"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario config file")->required();
        cmd->add_option("--out", out_dir, "output directory (default: $BULKQ_OUT or .)");
        cmd->add_option("--threads", threads, "worker threads for replications and sweeps")
            ->check(CLI::PositiveNumber);
    };

    add_common(app.add_subcommand("solve", "integrate the state equations and write the trajectory CSV"));
    add_common(app.add_subcommand("simulate", "run the Monte Carlo estimator and write its CSV"));
    add_common(app.add_subcommand("spectral", "eigenfunction residuals, Dirichlet report, indicator sweep"));
    add_common(app.add_subcommand("verify", "run the full cross-check suite and write the report"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bulkq::kExitConfigError;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    return bulkq::run(sub, config_path, out_dir, threads);
}
