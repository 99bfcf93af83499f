#include "sarl/portfolio_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sarl {

bool on_simplex(std::span<const double> w, double tol) {
    if (w.empty()) return false;
    double sum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol * static_cast<double>(w.size());
}

CostMode parse_cost_mode(const std::string& name) {
    if (name == "fixed_point") return CostMode::fixed_point;
    if (name == "simple") return CostMode::simple;
    throw std::invalid_argument("unknown cost mode '" + name + "'");
}

std::string to_string(CostMode mode) { return mode == CostMode::simple ? "simple" : "fixed_point"; }

void CostModel::validate() const {
    if (!(c_buy >= 0.0 && c_buy < 1.0)) throw std::invalid_argument("cost.buy must lie in [0, 1)");
    if (!(c_sell >= 0.0 && c_sell < 1.0)) throw std::invalid_argument("cost.sell must lie in [0, 1)");
    if (max_iters <= 0) throw std::invalid_argument("cost max_iters must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("cost tolerance must be positive");
}

Weights drift_weights(std::span<const double> a, std::span<const double> y) {
    if (a.size() != y.size()) throw std::invalid_argument("drift_weights: size mismatch");
    double value = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(y[i]) || !(y[i] > 0.0))
            throw std::invalid_argument("drift_weights: relative prices must be positive and finite");
        value += a[i] * y[i];
    }
    if (!(value > 0.0)) throw std::invalid_argument("drift_weights: portfolio value not positive");
    Weights w(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) w[i] = a[i] * y[i] / value;
    return w;
}

ShrinkSolution solve_shrink_factor(std::span<const double> drifted, std::span<const double> a,
                                   const CostModel& cm) {
    if (drifted.size() != a.size() || a.empty())
        throw std::invalid_argument("shrink factor: size mismatch");
    if (std::equal(drifted.begin(), drifted.end(), a.begin())) return {1.0, 0};
    if (cm.c_buy == 0.0 && cm.c_sell == 0.0) return {1.0, 0};

    if (cm.mode == CostMode::simple) {
        const double c = 0.5 * (cm.c_buy + cm.c_sell);
        double turnover = 0.0;
        for (std::size_t i = 1; i < a.size(); ++i) turnover += std::abs(a[i] - drifted[i]);
        return {1.0 - c * turnover, 1};
    }

    const double cb = cm.c_buy;
    const double cs = cm.c_sell;
    const double combined = cs + cb - cs * cb;
    const double denom = 1.0 - cb * a[0];
    double mu = 1.0;
    for (int it = 1; it <= cm.max_iters; ++it) {
        double sold = 0.0;
        for (std::size_t i = 1; i < a.size(); ++i) sold += std::max(drifted[i] - mu * a[i], 0.0);
        const double next = (1.0 - cb * drifted[0] - combined * sold) / denom;
        if (std::abs(next - mu) < cm.tol) return {next, it};
        mu = next;
    }
    throw ConvergenceError("transaction cost fixed point did not converge in " +
                           std::to_string(cm.max_iters) + " iterations");
}

double cost_factor(std::span<const double> w_prev, std::span<const double> a,
                   std::span<const double> y_prev, const CostModel& cm) {
    const Weights drifted = drift_weights(w_prev, y_prev);
    return solve_shrink_factor(drifted, a, cm).beta;
}

double step_reward(std::span<const double> w_prev, std::span<const double> a,
                   std::span<const double> y, std::span<const double> y_prev, const CostModel& cm) {
    if (a.size() != y.size()) throw std::invalid_argument("step_reward: size mismatch");
    const double beta = cost_factor(w_prev, a, y_prev, cm);
    const double growth = std::inner_product(a.begin(), a.end(), y.begin(), 0.0);
    const double r = std::log(beta * growth);
    if (!std::isfinite(r)) throw std::domain_error("step_reward: non-finite reward");
    return r;
}

std::vector<double> accumulate(std::span<const double> rewards, double p0) {
    std::vector<double> pv(rewards.size());
    double log_sum = 0.0;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        log_sum += rewards[t];
        pv[t] = p0 * std::exp(log_sum);
    }
    return pv;
}

AugmentedState state_at(const PriceSeries& prices, const SignalSeries* signals, std::size_t window,
                        std::size_t t) {
    if (window == 0 || t + 1 < window || t >= prices.n_steps)
        throw std::invalid_argument("state_at: window does not fit at t = " + std::to_string(t));
    Matrix raw(prices.n_assets, window);
    for (std::size_t i = 0; i < prices.n_assets; ++i)
        for (std::size_t c = 0; c < window; ++c) raw(i, c) = prices.close(i + 1, t + 1 - window + c);
    if (!signals) return augment(raw, std::nullopt, 0, t);
    if (signals->n_assets() != prices.n_assets || signals->n_steps() != prices.n_steps)
        throw std::invalid_argument("state_at: signal series shape does not match prices");
    const auto column = signals->column(t);
    return augment(raw, std::span<const double>(column), column.size(), t);
}

BacktestResult run_backtest(const PriceSeries& prices, const Policy& policy,
                            const SignalSeries* signals, const CostModel& cm, std::size_t window) {
    cm.validate();
    if (window == 0 || prices.n_steps <= window + 1)
        throw std::invalid_argument("run_backtest: price series must be longer than window + 1");
    const RelativePrices rel = relative_prices(prices);
    const std::size_t dim = prices.n_assets + 1;

    BacktestResult res;
    res.first_time_index = window - 1;
    Weights drifted(dim, 0.0);
    drifted[0] = 1.0;
    for (std::size_t t = window - 1; t + 1 < prices.n_steps; ++t) {
        const AugmentedState s = state_at(prices, signals, window, t);
        Action a = policy(s);
        if (a.size() != dim || !on_simplex(a, 1e-9))
            throw std::domain_error("run_backtest: policy returned an invalid action at t = " +
                                    std::to_string(t));
        const auto y = rel.at(t);
        const double beta = solve_shrink_factor(drifted, a, cm).beta;
        const double growth = std::inner_product(a.begin(), a.end(), y.begin(), 0.0);
        const double r = std::log(beta * growth);
        if (!std::isfinite(r)) throw std::domain_error("run_backtest: non-finite reward");
        drifted = drift_weights(a, y);

        res.rewards.push_back(r);
        res.betas.push_back(beta);
        res.actions.push_back(std::move(a));
        res.weights.push_back(drifted);
        res.relatives.push_back(y);
    }
    res.pv = accumulate(res.rewards);
    res.final_pv = res.pv.empty() ? 1.0 : res.pv.back();
    return res;
}

}  // namespace sarl
