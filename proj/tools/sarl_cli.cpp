// sarl: backtest, train and sweep driver.
//
//   sarl backtest --config run.cfg --out results/
//   sarl train    --config run.cfg --out ckpt/
//   sarl sweep    --config sweep.cfg --out sweep/ --jobs 4
//   sarl metrics  results/result_ew.json results/result_sarl.json --out metrics/
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "sarl/config.hpp"
#include "sarl/experiment.hpp"
#include "sarl/io.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<double> rfree;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "master seed (overrides `seed`)");
    cmd->add_option("--rfree", opts.rfree, "risk-free rate for Sharpe (overrides eval.rfree)");
    cmd->add_option("--set", opts.overrides, "override a config key: --set key=value");
}

sarl::ExperimentConfig build_config(const CommonOptions& opts) {
    sarl::Config cfg = opts.config_path.empty() ? sarl::Config{} : sarl::Config::parse_file(opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw sarl::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed) cfg.set("seed", std::to_string(*opts.seed));
    if (opts.rfree) cfg.set("eval.rfree", sarl::format_double(*opts.rfree));
    return sarl::resolve(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-augmented RL portfolio management: backtests, training and signal sweeps"};
    app.require_subcommand(1);

    CommonOptions backtest_opts, train_opts, sweep_opts, metrics_opts;
    std::size_t jobs = 1;
    std::vector<std::string> result_files;

    auto* backtest = app.add_subcommand("backtest", "run baselines and/or the agent on the test split");
    add_common(backtest, backtest_opts);
    auto* train = app.add_subcommand("train", "train the agent and write a checkpoint");
    add_common(train, train_opts);
    auto* sweep = app.add_subcommand("sweep", "accuracy x density sweep over oracle signals");
    add_common(sweep, sweep_opts);
    sweep->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    auto* metrics = app.add_subcommand("metrics", "PV and Sharpe table from saved backtest results");
    add_common(metrics, metrics_opts);
    metrics->add_option("results", result_files, "result_*.json files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*backtest) {
            sarl::cmd_backtest(build_config(backtest_opts), backtest_opts.out_dir);
        } else if (*train) {
            sarl::cmd_train(build_config(train_opts), train_opts.out_dir);
        } else if (*sweep) {
            sarl::cmd_sweep(build_config(sweep_opts), sweep_opts.out_dir, jobs);
        } else if (*metrics) {
            std::vector<std::filesystem::path> paths(result_files.begin(), result_files.end());
            sarl::cmd_metrics(paths, build_config(metrics_opts), metrics_opts.out_dir);
        }
    } catch (const sarl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
