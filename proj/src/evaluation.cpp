#include "sarl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace sarl {

double portfolio_value(std::span<const double> rewards) {
    const double sum = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    return std::exp(sum);
}

double portfolio_value(const BacktestResult& result) { return portfolio_value(result.rewards); }

double sharpe_ratio(std::span<const double> rewards, std::size_t horizon, double r_free) {
    if (horizon < 2) throw std::invalid_argument("Sharpe horizon must be at least 2 steps");
    if (horizon > rewards.size())
        throw std::invalid_argument("Sharpe horizon " + std::to_string(horizon) + " exceeds " +
                                    std::to_string(rewards.size()) + " steps");
    std::vector<double> v(horizon);
    for (std::size_t t = 0; t < horizon; ++t) v[t] = std::exp(rewards[t]);
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double mean = total / static_cast<double>(horizon);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(horizon));
    // identical values can still leave rounding noise in sd
    if (sd <= 1e-14 * std::abs(mean)) throw UndefinedSharpe("undefined Sharpe: constant per-step returns");
    return (total - r_free) / sd;
}

double sharpe_ratio(const BacktestResult& result, std::size_t horizon, double r_free) {
    return sharpe_ratio(result.rewards, horizon, r_free);
}

double log_sharpe(std::span<const double> rewards, std::size_t horizon, double periods_per_year,
                  double r_free) {
    if (horizon < 2 || horizon > rewards.size())
        throw std::invalid_argument("log Sharpe horizon out of range");
    const auto r = rewards.first(horizon);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(horizon);
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(horizon));
    if (sd <= 1e-14 * std::abs(mean) || sd == 0.0)
        throw UndefinedSharpe("undefined Sharpe: constant per-step returns");
    return (mean * periods_per_year - r_free) / (sd * std::sqrt(periods_per_year));
}

Calendar parse_calendar(const std::string& name) {
    if (name == "crypto") return Calendar::crypto;
    if (name == "equity") return Calendar::equity;
    throw std::invalid_argument("unknown calendar '" + name + "'");
}

Horizon horizon_from_label(const std::string& label, Calendar calendar, std::size_t steps_per_day) {
    if (steps_per_day == 0) throw std::invalid_argument("steps_per_day must be >= 1");
    if (label.size() < 2) throw std::invalid_argument("bad horizon label '" + label + "'");
    const char unit = label.back();
    std::size_t count = 0;
    try {
        count = std::stoul(label.substr(0, label.size() - 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("bad horizon label '" + label + "'");
    }
    const std::size_t week = calendar == Calendar::crypto ? 7 : 5;
    const std::size_t month = calendar == Calendar::crypto ? 30 : 21;
    std::size_t days = 0;
    if (unit == 'd') days = count;
    else if (unit == 'w') days = count * week;
    else if (unit == 'm') days = count * month;
    else throw std::invalid_argument("bad horizon unit in '" + label + "'");
    if (days == 0) throw std::invalid_argument("empty horizon '" + label + "'");
    return {label, days * steps_per_day};
}

double periods_per_year(Calendar calendar, std::size_t steps_per_day) {
    return static_cast<double>(steps_per_day) * (calendar == Calendar::crypto ? 365.0 : 252.0);
}

MetricsReport horizon_table(const std::map<std::string, BacktestResult>& results,
                            std::vector<Horizon> horizons, std::size_t steps_per_day, double r_free,
                            Calendar calendar) {
    if (horizons.empty()) throw std::invalid_argument("horizon table needs at least one horizon");
    std::stable_sort(horizons.begin(), horizons.end(),
                     [](const Horizon& a, const Horizon& b) { return a.steps < b.steps; });
    MetricsReport rep;
    rep.horizons = horizons;
    rep.r_free = r_free;
    rep.steps_per_day = steps_per_day;
    const std::size_t longest = horizons.back().steps;
    const double ppy = periods_per_year(calendar, steps_per_day);
    for (const auto& [name, res] : results) {
        if (res.steps() < longest)
            throw std::invalid_argument("strategy '" + name + "' covers " + std::to_string(res.steps()) +
                                        " steps, shorter than horizon " + horizons.back().label);
        MetricsRow row;
        row.final_pv = portfolio_value(res);
        for (const auto& h : horizons) {
            try {
                row.sharpe[h.label] = sharpe_ratio(res, h.steps, r_free);
            } catch (const UndefinedSharpe&) {
                row.sharpe[h.label] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        try {
            row.sr_log = log_sharpe(res.rewards, res.steps(), ppy, r_free);
        } catch (const UndefinedSharpe&) {
            row.sr_log = std::numeric_limits<double>::quiet_NaN();
        }
        rep.strategies.push_back(name);
        rep.rows.emplace(name, std::move(row));
    }
    return rep;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::ordered_json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "strategy,final_pv";
    for (const auto& h : report.horizons) out << ",sr_" << h.label;
    out << ",sr_log\n";
    for (const auto& name : report.strategies) {
        const auto& row = report.rows.at(name);
        out << name << ',' << fmt(row.final_pv);
        for (const auto& h : report.horizons) out << ',' << fmt(row.sharpe.at(h.label));
        out << ',' << fmt(row.sr_log) << '\n';
    }
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["r_free"] = report.r_free;
    j["steps_per_day"] = report.steps_per_day;
    auto& hz = j["horizons"] = nlohmann::ordered_json::array();
    for (const auto& h : report.horizons) hz.push_back({{"label", h.label}, {"steps", h.steps}});
    auto& rows = j["strategies"] = nlohmann::ordered_json::object();
    for (const auto& name : report.strategies) {
        const auto& row = report.rows.at(name);
        nlohmann::ordered_json r;
        r["final_pv"] = row.final_pv;
        auto& sr = r["sharpe"] = nlohmann::ordered_json::object();
        for (const auto& h : report.horizons) sr[h.label] = number_or_null(row.sharpe.at(h.label));
        r["sr_log"] = number_or_null(row.sr_log);
        rows[name] = std::move(r);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace sarl
