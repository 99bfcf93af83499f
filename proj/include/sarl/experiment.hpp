#pragma once

#include "sarl/agent.hpp"
#include "sarl/baselines.hpp"
#include "sarl/config.hpp"
#include "sarl/evaluation.hpp"
#include "sarl/market_data.hpp"
#include "sarl/portfolio_engine.hpp"
#include "sarl/signal_encoder.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sarl {

enum class AgentSource { none, train, checkpoint };

// Fully resolved experiment settings; every field has a value after resolve().
struct ExperimentConfig {
    std::uint64_t seed = 0;

    std::string market_source = "synthetic";
    std::filesystem::path market_csv;
    bool forward_fill = false;
    MarketSpec market;
    SplitSpec split;

    std::size_t window = 30;
    CostModel cost;
    SignalMode signal_mode = SignalMode::none;
    SignalConfig signal;
    PredictorFitConfig predictor;
    std::vector<std::size_t> hidden{64};
    TrainConfig train;
    AgentSource agent_source = AgentSource::none;
    std::filesystem::path agent_checkpoint;
    std::filesystem::path agent_resume;

    std::vector<BaselineConfig> baselines;

    std::vector<double> sweep_accuracies;
    std::vector<double> sweep_densities;
    std::vector<std::uint64_t> sweep_seeds;

    double r_free = kDefaultRiskFree;
    Calendar calendar = Calendar::crypto;
    std::size_t steps_per_day = 1;
    std::vector<std::string> horizons;  // empty = every standard label that fits

    // Every key with its resolved value; written next to outputs.
    std::map<std::string, std::string> echo;
};

const std::set<std::string>& known_config_keys();

// Validates keys and values; throws ConfigError naming the offending key.
ExperimentConfig resolve(const Config& cfg);

std::string render_echo(const std::map<std::string, std::string>& echo);

// Market for the config (CSV or synthetic) split into (train, test).
std::pair<PriceSeries, PriceSeries> load_market(const ExperimentConfig& cfg);

// Signals aligned with `segment`, or nullopt in no-signal mode. `tag` separates
// the label streams of different segments.
std::optional<SignalSeries> make_signals(SignalMode mode, const SignalConfig& signal_cfg,
                                         const PriceSeries& segment, const PredictorParams* predictor,
                                         std::uint64_t tag);

struct TrainedAgent {
    PolicyParams params;
    std::vector<double> learning_curve;
    std::size_t epochs_completed = 0;
};

// Trains a fresh policy on `train_prices` with the given signals.
TrainedAgent train_agent(const PriceSeries& train_prices, const SignalSeries* signals,
                         const ExperimentConfig& cfg, std::uint64_t init_seed, std::uint64_t train_seed);

std::string result_to_json(const BacktestResult& result);
BacktestResult result_from_json(const std::string& text);

// Command entry points; each writes its files under out_dir.
void cmd_backtest(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void cmd_metrics(const std::vector<std::filesystem::path>& results, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir);

struct SweepRow {
    bool control = false;
    double accuracy = 0.0;
    double density = 0.0;
    std::uint64_t seed = 0;
    double final_pv = 1.0;
    double sharpe = 0.0;  // NaN when undefined
};

struct SweepFailure {
    std::string cell;
    std::string message;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // grid order (accuracy, density, seed), then one control per seed
    std::vector<SweepFailure> failures;
};

// Cells run on up to `jobs` threads; the result does not depend on `jobs`.
SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs = 1);
std::string sweep_csv(const SweepResult& result);
void cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::size_t jobs);

}  // namespace sarl
