#pragma once

#include "sarl/portfolio_engine.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sarl {

// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> simplex_project(std::span<const double> v);

// Constant rebalanced portfolio: the same target every step.
Action crp_action(std::span<const double> target);

// Relative-price history, oldest first; every row has n_assets + 1 entries (cash first).
using RelativeHistory = std::vector<std::vector<double>>;

struct MeanReversionParams {
    double epsilon = 10.0;
    std::size_t window = 5;
};

// Moving-average reversion step.
//   x~ = (1/w) sum_{k=0}^{w-1} prod_{j=0}^{k} 1 / y_{t-j}
// If b . x~ >= eps, b is kept; otherwise b moves along (x~ - mean(x~)) by
// tau = (eps - b . x~) / ||x~ - mean(x~)||^2 and is projected back to the simplex.
Action olmar_action(std::span<const double> current, const RelativeHistory& history,
                    const MeanReversionParams& p);

// Same passive-aggressive step on the equal-weighted average y_bar of the last w
// relatives: if b . y_bar <= eps, b is kept; otherwise
//   b' = proj(b - tau (y_bar - mean(y_bar))),  tau = (b . y_bar - eps) / ||y_bar - mean(y_bar)||^2.
Action wmamr_action(std::span<const double> current, const RelativeHistory& history,
                    const MeanReversionParams& p);

enum class BaselineKind { cash, ew, crp, olmar, wmamr };

BaselineKind parse_baseline(const std::string& name);
std::string to_string(BaselineKind kind);

struct BaselineConfig {
    BaselineKind kind = BaselineKind::ew;
    double epsilon = 0.0;        // 0 = strategy default (OLMAR 10, WMAMR 1)
    std::size_t window = 5;
    std::vector<double> target;  // CRP target over n_assets + 1; empty = uniform
};

// Stateful strategy that reads relative prices out of the normalized price
// window of each state. The price window must hold at least window + 1 columns.
class Strategy {
public:
    Strategy(BaselineConfig cfg, std::size_t n_assets);

    Action act(const AugmentedState& s);
    const BaselineConfig& config() const { return cfg_; }

private:
    BaselineConfig cfg_;
    std::size_t n_assets_;
    Action current_;
};

// Wraps a fresh Strategy as a Policy; each call of make_baseline_policy gets its own state.
Policy make_baseline_policy(const BaselineConfig& cfg, std::size_t n_assets);

}  // namespace sarl
