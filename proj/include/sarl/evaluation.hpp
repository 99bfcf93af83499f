#pragma once

#include "sarl/portfolio_engine.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarl {

constexpr double kDefaultRiskFree = 0.02;

class UndefinedSharpe : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// p_0 * exp(sum r_t) with p_0 = 1.
double portfolio_value(const BacktestResult& result);
double portfolio_value(std::span<const double> rewards);

// Over the first `horizon` steps, with v_t = beta_t * (a_t . y_t) = exp(r_t):
//   R_p = sum v_t,  sigma_p = population std of v_t,  SR = (R_p - r_free) / sigma_p.
double sharpe_ratio(const BacktestResult& result, std::size_t horizon, double r_free = kDefaultRiskFree);
double sharpe_ratio(std::span<const double> rewards, std::size_t horizon, double r_free = kDefaultRiskFree);

// Conventional annualized Sharpe of log returns (reported as sr_log):
//   (mean(r) * P - r_free) / (std(r) * sqrt(P)),  P = periods per year.
double log_sharpe(std::span<const double> rewards, std::size_t horizon, double periods_per_year,
                  double r_free = kDefaultRiskFree);

enum class Calendar { crypto, equity };

Calendar parse_calendar(const std::string& name);

struct Horizon {
    std::string label;
    std::size_t steps = 0;
};

// Labels 1w, 2w, 1m, 2m, 3m, 6m. Crypto: 7-day weeks, 30-day months, every day
// trades. Equity: 5-day weeks, 21-day months.
Horizon horizon_from_label(const std::string& label, Calendar calendar, std::size_t steps_per_day);
double periods_per_year(Calendar calendar, std::size_t steps_per_day);

struct MetricsRow {
    double final_pv = 1.0;
    std::map<std::string, double> sharpe;  // horizon label -> SR; NaN when undefined
    double sr_log = 0.0;
};

struct MetricsReport {
    std::vector<Horizon> horizons;         // ascending by steps
    std::vector<std::string> strategies;   // row order
    std::map<std::string, MetricsRow> rows;
    double r_free = kDefaultRiskFree;
    std::size_t steps_per_day = 1;
};

// Strategy x horizon Sharpe table. Every result must cover the longest horizon.
MetricsReport horizon_table(const std::map<std::string, BacktestResult>& results,
                            std::vector<Horizon> horizons, std::size_t steps_per_day,
                            double r_free = kDefaultRiskFree,
                            Calendar calendar = Calendar::crypto);

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace sarl
