#pragma once

#include "sarl/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sarl {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Closing prices for cash (row 0, constant) plus n_assets risky assets.
struct PriceSeries {
    std::size_t n_assets = 0;
    std::size_t n_steps = 0;
    Matrix close;                 // (n_assets + 1) x n_steps
    std::optional<Matrix> high;   // same shape as close when present
    std::optional<Matrix> low;
    std::vector<std::int64_t> timestamps;
    std::vector<std::string> asset_names;  // n_assets + 1, index 0 is "cash"

    // Throws DataError when any structural invariant is violated.
    void validate() const;

    // Columns [first, first + count) as a new series.
    PriceSeries slice(std::size_t first, std::size_t count) const;

    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

// y(i, t) = close(i, t + 1) / close(i, t); row 0 is exactly 1.
struct RelativePrices {
    Matrix y;  // (n_assets + 1) x (n_steps - 1)

    std::vector<double> at(std::size_t t) const { return y.column(t); }
    std::size_t n_periods() const { return y.cols(); }
};

struct SplitSpec {
    std::optional<double> train_fraction;
    std::optional<std::size_t> boundary;
};

struct CsvSchema {
    std::string timestamp_column = "timestamp";
    std::string asset_column = "asset";
    std::string close_column = "close";
    std::string high_column = "high";
    std::string low_column = "low";
    // Empty means order of first appearance.
    std::vector<std::string> asset_order;
    bool forward_fill = false;
};

struct MarketSpec {
    std::size_t n_assets = 3;
    std::size_t n_steps = 1000;
    std::vector<double> drift;       // per asset, or a single value broadcast
    std::vector<double> volatility;  // per asset, or a single value broadcast
    double regime_switch_prob = 0.0;
    std::uint64_t seed = 0;
};

PriceSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const PriceSeries& prices, const std::filesystem::path& path);

// Parses an integer or an ISO-8601 date/date-time ("2015-06-30", "2015-06-30T12:30:00Z")
// into seconds since the Unix epoch. Integers are taken verbatim.
std::int64_t parse_timestamp(const std::string& text);

RelativePrices relative_prices(const PriceSeries& prices);

// Chronological, non-overlapping split. Each segment must have at least
// min_segment_steps columns.
std::pair<PriceSeries, PriceSeries> chronological_split(const PriceSeries& prices,
                                                        const SplitSpec& spec,
                                                        std::size_t min_segment_steps = 2);

PriceSeries generate_synthetic(const MarketSpec& spec);

}  // namespace sarl
