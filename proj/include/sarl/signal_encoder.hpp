#pragma once

#include "sarl/market_data.hpp"
#include "sarl/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sarl {

enum class SignalMode { none, oracle, internal };

SignalMode parse_signal_mode(const std::string& name);
std::string to_string(SignalMode mode);

struct SignalConfig {
    double accuracy = 1.0;
    double density = 1.0;
    std::uint64_t seed = 0;
    // Number of most recent labels averaged into the state; 1 = current label only.
    std::size_t lookback = 1;

    void validate() const;
};

// Per-asset movement signal in time coordinates of the originating PriceSeries.
// Column t predicts the move from t to t + 1; 0 means "absent". The last column
// has no next price and is always 0.
struct SignalSeries {
    Matrix values;  // n_assets x n_steps (cash excluded)
    std::vector<std::int64_t> timestamps;
    std::vector<std::string> asset_names;  // risky assets only
    // (asset, t) entries where the price did not move; they are labelled +1.
    std::vector<std::pair<std::size_t, std::size_t>> ties;

    std::size_t n_assets() const { return values.rows(); }
    std::size_t n_steps() const { return values.cols(); }
    std::size_t usable_steps() const { return n_steps() == 0 ? 0 : n_steps() - 1; }
    std::vector<double> column(std::size_t t) const { return values.column(t); }
};

// Ground-truth direction of the next move per (asset, t).
SignalSeries true_movements(const PriceSeries& prices);

// Noisy, sparse copy of the truth: exactly round(density * usable_steps) labels
// kept per asset, each equal to the truth with probability `accuracy`.
SignalSeries oracle_labels(const SignalSeries& truth, const SignalConfig& cfg);

// Column t becomes the mean of the last `lookback` columns (absent labels count as 0).
SignalSeries apply_lookback(const SignalSeries& signals, std::size_t lookback);

void write_signal_csv(const SignalSeries& signals, const std::filesystem::path& path);

struct PredictorParams {
    std::size_t lags = 0;
    Matrix weights;             // n_assets x lags, applied to standardized log returns
    std::vector<double> bias;   // n_assets
    std::vector<double> scale;  // per-asset standard deviation of training log returns
    std::vector<double> train_accuracy;
    std::vector<bool> degenerate;  // single-class training targets
    bool warning = false;
};

struct PredictorFitConfig {
    std::size_t lags = 5;
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;
};

// Per-asset logistic regression of next-move direction on the last `lags`
// log relative prices, trained by full-batch gradient descent on cross-entropy.
PredictorParams fit_internal_predictor(const PriceSeries& train, const PredictorFitConfig& cfg);

// window: n_assets x L closing prices (cash excluded), L >= lags + 1.
// Returns a +1/-1 label per asset for the move after the last column.
std::vector<double> predict_internal(const PredictorParams& params, const Matrix& window);

// Runs the predictor over every step of `prices` with enough history;
// steps without history are absent (0).
SignalSeries predict_series(const PredictorParams& params, const PriceSeries& prices);

// s = (s*, delta).
struct AugmentedState {
    Matrix price_window;          // n_assets x W, each row divided by its last column
    std::vector<double> signal;   // signal_dim entries, zero when absent
    std::size_t t = 0;

    std::size_t dimension() const { return price_window.rows() * price_window.cols() + signal.size(); }
};

// raw_window: n_assets x W closing prices (cash excluded).
AugmentedState augment(const Matrix& raw_window, std::optional<std::span<const double>> signal,
                       std::size_t signal_dim, std::size_t t = 0);

}  // namespace sarl
