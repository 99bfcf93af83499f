#pragma once

#include "sarl/market_data.hpp"
#include "sarl/signal_encoder.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarl {

// Portfolio fractions over (cash, asset 1, ..., asset n). Both held weights and
// target actions live on the simplex, so they share a representation.
using Weights = std::vector<double>;
using Action = std::vector<double>;

constexpr double kSimplexTolerance = 1e-12;

bool on_simplex(std::span<const double> w, double tol = kSimplexTolerance);

enum class CostMode { fixed_point, simple };

CostMode parse_cost_mode(const std::string& name);
std::string to_string(CostMode mode);

struct CostModel {
    double c_buy = 0.0025;
    double c_sell = 0.0025;
    int max_iters = 100;
    double tol = 1e-10;
    CostMode mode = CostMode::fixed_point;

    void validate() const;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// w' = (y * a) / (y . a)
Weights drift_weights(std::span<const double> a, std::span<const double> y);

struct ShrinkSolution {
    double beta = 1.0;
    int iterations = 0;
};

// Wealth-shrink factor for rebalancing from already-drifted weights to `a`.
// fixed_point mode iterates
//   mu = [1 - c_b w'_0 - (c_s + c_b - c_s c_b) sum_{i>=1} max(w'_i - mu a_i, 0)] / (1 - c_b a_0)
// from mu = 1; simple mode returns 1 - c sum_{i>=1} |a_i - w'_i| with c the mean rate.
ShrinkSolution solve_shrink_factor(std::span<const double> drifted, std::span<const double> a,
                                   const CostModel& cm);

// beta for the step: w_prev drifts by y_prev, then is rebalanced to `a`.
double cost_factor(std::span<const double> w_prev, std::span<const double> a,
                   std::span<const double> y_prev, const CostModel& cm);

// ln(beta * (a . y))
double step_reward(std::span<const double> w_prev, std::span<const double> a,
                   std::span<const double> y, std::span<const double> y_prev, const CostModel& cm);

// p_t = p0 * exp(sum_{k<=t} r_k), one entry per reward.
std::vector<double> accumulate(std::span<const double> rewards, double p0 = 1.0);

struct BacktestResult {
    std::vector<double> rewards;          // ln(beta_t * a_t . y_t)
    std::vector<double> pv;               // accumulate(rewards)
    std::vector<double> betas;
    std::vector<std::vector<double>> actions;    // a_t
    std::vector<std::vector<double>> weights;    // drifted holdings after step t
    std::vector<std::vector<double>> relatives;  // y_t
    std::size_t first_time_index = 0;     // price column of the first decision
    double final_pv = 1.0;

    std::size_t steps() const { return rewards.size(); }
};

using Policy = std::function<Action(const AugmentedState&)>;

// Builds the augmented state for decision time t (window of W prices ending at t).
AugmentedState state_at(const PriceSeries& prices, const SignalSeries* signals, std::size_t window,
                        std::size_t t);

// Decisions are taken at t = W-1, ..., n_steps-2 starting from all-cash holdings.
BacktestResult run_backtest(const PriceSeries& prices, const Policy& policy,
                            const SignalSeries* signals, const CostModel& cm, std::size_t window);

}  // namespace sarl
