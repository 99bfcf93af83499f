#pragma once

#include "sarl/market_data.hpp"
#include "sarl/portfolio_engine.hpp"
#include "sarl/signal_encoder.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarl {

struct NetworkShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden{64};
    std::size_t output_dim = 0;

    // input_dim = n_assets * window + signal_dim, output_dim = n_assets + 1.
    static NetworkShape for_market(std::size_t n_assets, std::size_t window, std::size_t signal_dim,
                                   std::vector<std::size_t> hidden = {64});

    std::size_t n_layers() const { return hidden.size() + 1; }
    std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden[l - 1]; }
    std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? output_dim : hidden[l]; }
    std::size_t parameter_count() const;

    friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

// Feed-forward tanh network with a softmax head. Parameters are stored flat,
// layer by layer: weights (out x in, row-major) followed by biases (out).
struct PolicyParams {
    NetworkShape shape;
    std::vector<double> values;

    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;
    void validate() const;

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Zero-mean uniform in [-scale/sqrt(fan_in), scale/sqrt(fan_in)]; biases start at 0.
PolicyParams init_params(const NetworkShape& shape, std::uint64_t seed, double init_scale = 1.0);
PolicyParams zero_params(const NetworkShape& shape);

// Network input for a state: log of the normalized price window (row-major) then the signal.
std::vector<double> state_features(const AugmentedState& s);

Action policy_forward(const PolicyParams& params, const AugmentedState& s);
Action forward_features(const PolicyParams& params, std::span<const double> x);

Policy make_policy(PolicyParams params);

// Contiguous run of decisions: one feature row and one relative-price row per step.
struct Episode {
    Matrix inputs;     // T x input_dim
    Matrix relatives;  // T x (n_assets + 1)
    Weights entry;     // drifted holdings before the first decision

    std::size_t length() const { return inputs.rows(); }
    Episode slice(std::size_t first, std::size_t count, Weights entry_weights) const;
};

// Decisions at t = W-1 .. n_steps-2, matching run_backtest; entry is all cash.
Episode build_episode(const PriceSeries& prices, const SignalSeries* signals, std::size_t window);

struct EpisodeTrace {
    std::vector<Action> actions;
    std::vector<double> betas;
    std::vector<double> rewards;
    double objective = 0.0;  // mean reward
};

EpisodeTrace evaluate_episode(const PolicyParams& params, const Episode& episode, const CostModel& cm);

// J_T = (1/T) sum ln(beta_t a_t . y_t)
double objective(const PolicyParams& params, const Episode& episode, const CostModel& cm);

// Same objective with beta_t held at the supplied values.
double objective_with_betas(const PolicyParams& params, const Episode& episode,
                            std::span<const double> betas);

// Reverse-mode derivative of J_T. In fixed_point mode beta_t is treated as a
// constant; in simple mode beta_t is differentiated through a_t and through the
// drifted holdings that depend on a_{t-1}.
std::vector<double> gradient(const PolicyParams& params, const Episode& episode, const CostModel& cm);

struct TrainConfig {
    double learning_rate = 1.0;
    std::size_t batch_window = 64;
    std::size_t batches_per_epoch = 8;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double init_scale = 1.0;

    void validate() const;
};

struct TrainResult {
    PolicyParams params;
    std::vector<double> learning_curve;  // J_T on the full training episode, one per epoch
    std::size_t epochs_completed = 0;
};

// Plain gradient ascent on sampled windows. Epoch e draws its windows from a
// generator seeded by (cfg.seed, e), so resuming at start_epoch reproduces an
// uninterrupted run exactly.
TrainResult train(PolicyParams params, const Episode& train_episode, const CostModel& cm,
                  const TrainConfig& cfg, std::size_t start_epoch = 0);

struct Checkpoint {
    PolicyParams params;
    std::size_t epochs_completed = 0;
    std::vector<double> learning_curve;
    std::map<std::string, std::string> config;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sarl
