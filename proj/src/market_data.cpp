#include "sarl/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace sarl {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_price(const std::string& text, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw DataError("line " + std::to_string(line_no) + ": invalid number '" + text + "'");
    if (v <= 0.0)
        throw DataError("line " + std::to_string(line_no) + ": non-positive price " + text);
    return v;
}

int parse_int_field(const std::string& s, std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || ptr != s.data() + pos + len)
        throw DataError("invalid timestamp '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void PriceSeries::validate() const {
    if (n_assets == 0) throw DataError("price series has no risky assets");
    if (close.rows() != n_assets + 1 || close.cols() != n_steps)
        throw DataError("close matrix shape does not match (n_assets + 1) x n_steps");
    if (timestamps.size() != n_steps) throw DataError("timestamp count does not match n_steps");
    if (asset_names.size() != n_assets + 1) throw DataError("asset name count mismatch");
    for (std::size_t t = 1; t < n_steps; ++t)
        if (timestamps[t] <= timestamps[t - 1]) throw DataError("timestamps not strictly increasing");
    for (std::size_t i = 0; i <= n_assets; ++i)
        for (std::size_t t = 0; t < n_steps; ++t) {
            const double v = close(i, t);
            if (!(v > 0.0) || !std::isfinite(v)) throw DataError("non-positive price");
        }
    for (std::size_t t = 0; t < n_steps; ++t)
        if (close(0, t) != close(0, 0)) throw DataError("cash row is not constant");
    if (high.has_value() != low.has_value()) throw DataError("high and low must be given together");
    if (high) {
        if (high->rows() != close.rows() || high->cols() != close.cols() ||
            low->rows() != close.rows() || low->cols() != close.cols())
            throw DataError("high/low shape mismatch");
        for (std::size_t i = 0; i <= n_assets; ++i)
            for (std::size_t t = 0; t < n_steps; ++t)
                if (!((*low)(i, t) <= close(i, t) && close(i, t) <= (*high)(i, t)))
                    throw DataError("close outside [low, high] for asset " + asset_names[i]);
    }
}

PriceSeries PriceSeries::slice(std::size_t first, std::size_t count) const {
    if (first + count > n_steps) throw DataError("slice out of range");
    PriceSeries out;
    out.n_assets = n_assets;
    out.n_steps = count;
    out.close = close.col_range(first, count);
    if (high) out.high = high->col_range(first, count);
    if (low) out.low = low->col_range(first, count);
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.asset_names = asset_names;
    return out;
}

std::int64_t parse_timestamp(const std::string& raw) {
    const std::string text = trim(raw);
    if (text.empty()) throw DataError("empty timestamp");
    const bool all_digits =
        std::all_of(text.begin() + (text[0] == '-' ? 1 : 0), text.end(),
                    [](unsigned char c) { return std::isdigit(c); });
    if (all_digits) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size())
            throw DataError("invalid timestamp '" + text + "'");
        return v;
    }
    // YYYY-MM-DD[(T| )HH:MM[:SS]][Z]
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        throw DataError("invalid timestamp '" + text + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{parse_int_field(text, 0, 4)},
                             month{static_cast<unsigned>(parse_int_field(text, 5, 2))},
                             day{static_cast<unsigned>(parse_int_field(text, 8, 2))}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + text + "'");
    std::int64_t seconds = duration_cast<std::chrono::seconds>(sys_days{ymd}.time_since_epoch()).count();
    std::string rest = text.substr(10);
    if (!rest.empty() && rest.back() == 'Z') rest.pop_back();
    if (!rest.empty()) {
        if ((rest[0] != 'T' && rest[0] != ' ') || rest.size() < 6 || rest[3] != ':')
            throw DataError("invalid timestamp '" + text + "'");
        const int hh = parse_int_field(rest, 1, 2);
        const int mm = parse_int_field(rest, 4, 2);
        int ss = 0;
        if (rest.size() > 6) {
            if (rest.size() != 9 || rest[6] != ':') throw DataError("invalid timestamp '" + text + "'");
            ss = parse_int_field(rest, 7, 2);
        }
        if (hh > 23 || mm > 59 || ss > 60) throw DataError("invalid time of day '" + text + "'");
        seconds += hh * 3600 + mm * 60 + ss;
    }
    return seconds;
}

PriceSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_fields(line);
    auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto ts_col = column_of(schema.timestamp_column);
    const auto asset_col = column_of(schema.asset_column);
    const auto close_col = column_of(schema.close_column);
    if (!ts_col || !asset_col || !close_col)
        throw DataError(path.string() + ": header must contain timestamp, asset and close columns");
    const auto high_col = column_of(schema.high_column);
    const auto low_col = column_of(schema.low_column);
    if (high_col.has_value() != low_col.has_value())
        throw DataError(path.string() + ": high and low columns must appear together");
    const bool has_hl = high_col.has_value();

    struct Bar {
        double close, high, low;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::map<std::int64_t, Bar>> rows;
    std::set<std::int64_t> all_ts;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields");
        const std::int64_t ts = parse_timestamp(f[*ts_col]);
        const std::string& asset = f[*asset_col];
        if (asset.empty()) throw DataError("line " + std::to_string(line_no) + ": empty asset id");
        Bar bar{parse_price(f[*close_col], line_no), 0.0, 0.0};
        if (has_hl) {
            bar.high = parse_price(f[*high_col], line_no);
            bar.low = parse_price(f[*low_col], line_no);
        }
        auto [it, fresh] = rows.try_emplace(asset);
        if (fresh) order.push_back(asset);
        if (!it->second.emplace(ts, bar).second)
            throw DataError("line " + std::to_string(line_no) + ": duplicate (asset, timestamp) for " +
                            asset);
        all_ts.insert(ts);
    }
    if (rows.empty()) throw DataError(path.string() + ": no data rows");

    if (!schema.asset_order.empty()) {
        for (const auto& a : schema.asset_order)
            if (!rows.count(a)) throw DataError("asset '" + a + "' listed in schema but absent from file");
        if (schema.asset_order.size() != rows.size())
            throw DataError("schema asset order does not cover every asset in the file");
        order = schema.asset_order;
    }

    PriceSeries p;
    p.n_assets = order.size();
    p.n_steps = all_ts.size();
    p.timestamps.assign(all_ts.begin(), all_ts.end());
    p.close = Matrix(p.n_assets + 1, p.n_steps, 1.0);
    if (has_hl) {
        p.high = Matrix(p.n_assets + 1, p.n_steps, 1.0);
        p.low = Matrix(p.n_assets + 1, p.n_steps, 1.0);
    }
    p.asset_names.push_back("cash");
    for (std::size_t a = 0; a < order.size(); ++a) {
        p.asset_names.push_back(order[a]);
        const auto& series = rows.at(order[a]);
        std::optional<Bar> last;
        for (std::size_t t = 0; t < p.n_steps; ++t) {
            auto it = series.find(p.timestamps[t]);
            Bar bar{};
            if (it != series.end()) {
                bar = it->second;
            } else if (schema.forward_fill && last) {
                bar = *last;
            } else {
                throw DataError("ragged series: asset '" + order[a] + "' missing timestamp " +
                                std::to_string(p.timestamps[t]));
            }
            last = bar;
            p.close(a + 1, t) = bar.close;
            if (has_hl) {
                (*p.high)(a + 1, t) = bar.high;
                (*p.low)(a + 1, t) = bar.low;
            }
        }
    }
    p.validate();
    return p;
}

void write_csv(const PriceSeries& prices, const std::filesystem::path& path) {
    prices.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const bool has_hl = prices.high.has_value();
    out << "timestamp,asset,close" << (has_hl ? ",high,low" : "") << '\n';
    for (std::size_t t = 0; t < prices.n_steps; ++t)
        for (std::size_t i = 1; i <= prices.n_assets; ++i) {
            out << prices.timestamps[t] << ',' << prices.asset_names[i] << ','
                << format_double(prices.close(i, t));
            if (has_hl)
                out << ',' << format_double((*prices.high)(i, t)) << ','
                    << format_double((*prices.low)(i, t));
            out << '\n';
        }
    if (!out) throw DataError("write failed for " + path.string());
}

RelativePrices relative_prices(const PriceSeries& prices) {
    if (prices.n_steps < 2) throw DataError("relative prices need at least 2 steps");
    RelativePrices rel{Matrix(prices.n_assets + 1, prices.n_steps - 1, 1.0)};
    for (std::size_t i = 1; i <= prices.n_assets; ++i)
        for (std::size_t t = 0; t + 1 < prices.n_steps; ++t)
            rel.y(i, t) = prices.close(i, t + 1) / prices.close(i, t);
    return rel;
}

std::pair<PriceSeries, PriceSeries> chronological_split(const PriceSeries& prices,
                                                        const SplitSpec& spec,
                                                        std::size_t min_segment_steps) {
    std::size_t boundary = 0;
    if (spec.boundary) {
        boundary = *spec.boundary;
    } else if (spec.train_fraction) {
        const double f = *spec.train_fraction;
        if (!(f > 0.0 && f < 1.0)) throw DataError("train fraction must lie in (0, 1)");
        boundary = static_cast<std::size_t>(std::llround(f * static_cast<double>(prices.n_steps)));
    } else {
        throw DataError("split needs a train fraction or a boundary index");
    }
    const std::size_t min_len = std::max<std::size_t>(min_segment_steps, 1);
    if (boundary < min_len || boundary > prices.n_steps ||
        prices.n_steps - boundary < min_len)
        throw DataError("segment too short: split at " + std::to_string(boundary) + " of " +
                        std::to_string(prices.n_steps) + " steps, need " +
                        std::to_string(min_len) + " per segment");
    return {prices.slice(0, boundary), prices.slice(boundary, prices.n_steps - boundary)};
}

PriceSeries generate_synthetic(const MarketSpec& spec) {
    if (spec.n_assets == 0) throw DataError("synthetic market needs at least one asset");
    if (spec.n_steps < 2) throw DataError("synthetic market needs at least 2 steps");
    if (!(spec.regime_switch_prob >= 0.0 && spec.regime_switch_prob <= 1.0))
        throw DataError("regime switch probability must lie in [0, 1]");
    auto broadcast = [&](const std::vector<double>& v, const char* what) {
        if (v.size() == 1) return std::vector<double>(spec.n_assets, v[0]);
        if (v.size() != spec.n_assets)
            throw DataError(std::string(what) + " must have 1 or n_assets entries");
        return v;
    };
    const auto drift = broadcast(spec.drift.empty() ? std::vector<double>{0.0} : spec.drift, "drift");
    const auto vol =
        broadcast(spec.volatility.empty() ? std::vector<double>{0.0} : spec.volatility, "volatility");
    for (std::size_t i = 0; i < spec.n_assets; ++i) {
        if (!std::isfinite(drift[i])) throw DataError("drift must be finite");
        if (!(vol[i] >= 0.0) || !std::isfinite(vol[i])) throw DataError("volatility must be >= 0");
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    PriceSeries p;
    p.n_assets = spec.n_assets;
    p.n_steps = spec.n_steps;
    p.close = Matrix(spec.n_assets + 1, spec.n_steps, 1.0);
    p.timestamps.resize(spec.n_steps);
    for (std::size_t t = 0; t < spec.n_steps; ++t) p.timestamps[t] = static_cast<std::int64_t>(t);
    p.asset_names.push_back("cash");
    for (std::size_t i = 1; i <= spec.n_assets; ++i) p.asset_names.push_back("A" + std::to_string(i));

    std::vector<double> log_price(spec.n_assets, 0.0);
    double regime = 1.0;
    for (std::size_t t = 1; t < spec.n_steps; ++t) {
        if (spec.regime_switch_prob > 0.0 && unif(rng) < spec.regime_switch_prob) regime = -regime;
        for (std::size_t i = 0; i < spec.n_assets; ++i) {
            const double z = normal(rng);
            log_price[i] += regime * drift[i] + vol[i] * z;
            p.close(i + 1, t) = std::exp(log_price[i]);
        }
    }
    p.validate();
    return p;
}

}  // namespace sarl
