#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sarl/market_data.hpp"

namespace sarl {
namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
    const auto dir = std::filesystem::temp_directory_path() / "sarl_market_tests";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << contents;
    return path;
}

std::string error_of(const std::filesystem::path& path, const CsvSchema& schema = {}) {
    try {
        load_csv(path, schema);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

TEST(LoadCsv, CompleteGridAddsCashRow) {
    const auto path = temp_file("grid.csv",
                                "timestamp,asset,close\n"
                                "1,BTC,10\n1,ETH,20\n"
                                "2,BTC,11\n2,ETH,18\n"
                                "3,BTC,12\n3,ETH,19\n");
    const PriceSeries p = load_csv(path);
    EXPECT_EQ(p.n_assets, 2u);
    EXPECT_EQ(p.n_steps, 3u);
    EXPECT_EQ(p.close.rows(), 3u);
    EXPECT_EQ(p.close.cols(), 3u);
    EXPECT_EQ(p.asset_names, (std::vector<std::string>{"cash", "BTC", "ETH"}));
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(p.close(0, t), 1.0);
    EXPECT_EQ(p.close(2, 1), 18.0);
}

TEST(LoadCsv, RejectsNonPositivePrice) {
    const auto path = temp_file("zero.csv", "timestamp,asset,close\n1,A,10\n2,A,0\n");
    EXPECT_NE(error_of(path).find("non-positive price"), std::string::npos);
}

TEST(LoadCsv, RejectsRaggedSeries) {
    const auto path = temp_file("ragged.csv",
                                "timestamp,asset,close\n"
                                "1,A,10\n1,B,5\n"
                                "2,A,11\n"
                                "3,A,12\n3,B,6\n");
    EXPECT_NE(error_of(path).find("ragged series"), std::string::npos);
}

TEST(LoadCsv, ForwardFillIsOptIn) {
    const auto path = temp_file("ffill.csv",
                                "timestamp,asset,close\n"
                                "1,A,10\n1,B,5\n"
                                "2,A,11\n"
                                "3,A,12\n3,B,6\n");
    CsvSchema schema;
    schema.forward_fill = true;
    const PriceSeries p = load_csv(path, schema);
    EXPECT_EQ(p.close(2, 1), 5.0);
}

TEST(LoadCsv, RejectsDuplicateAssetTimestamp) {
    const auto path = temp_file("dup.csv", "timestamp,asset,close\n1,A,10\n1,A,11\n2,A,12\n");
    EXPECT_NE(error_of(path).find("duplicate"), std::string::npos);
}

TEST(LoadCsv, ReadsIsoTimestampsAndHighLow) {
    const auto path = temp_file("iso.csv",
                                "timestamp,asset,close,high,low\n"
                                "2015-06-30T00:00:00Z,A,10,11,9\n"
                                "2015-06-30T00:30:00Z,A,10.5,10.6,10\n");
    const PriceSeries p = load_csv(path);
    ASSERT_TRUE(p.high.has_value());
    EXPECT_EQ(p.timestamps[1] - p.timestamps[0], 1800);
    EXPECT_EQ(parse_timestamp("1970-01-02"), 86400);
    EXPECT_EQ((*p.high)(1, 0), 11.0);
}

TEST(LoadCsv, RejectsCloseOutsideHighLow) {
    const auto path = temp_file("hl.csv", "timestamp,asset,close,high,low\n1,A,10,9,8\n2,A,10,11,9\n");
    EXPECT_FALSE(error_of(path).empty());
}

TEST(LoadCsv, WriteThenLoadIsIdentity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> price(0.01, 1000.0);
    for (int trial = 0; trial < 5; ++trial) {
        MarketSpec spec{3, 20, {0.001}, {0.05}, 0.1, static_cast<std::uint64_t>(trial)};
        PriceSeries p = generate_synthetic(spec);
        if (trial % 2 == 0) {
            p.high = p.close;
            p.low = p.close;
            for (std::size_t i = 1; i <= p.n_assets; ++i)
                for (std::size_t t = 0; t < p.n_steps; ++t) {
                    (*p.high)(i, t) = p.close(i, t) * (1.0 + price(rng) / 1e4);
                    (*p.low)(i, t) = p.close(i, t) * (1.0 - price(rng) / 1e4);
                }
        }
        const auto path = temp_file("roundtrip.csv", "");
        write_csv(p, path);
        EXPECT_EQ(load_csv(path), p) << "trial " << trial;
    }
}

TEST(RelativePrices, DividesConsecutiveCloses) {
    PriceSeries p;
    p.n_assets = 2;
    p.n_steps = 2;
    p.close = Matrix(3, 2);
    p.close(0, 0) = 1; p.close(1, 0) = 10; p.close(2, 0) = 20;
    p.close(0, 1) = 1; p.close(1, 1) = 11; p.close(2, 1) = 18;
    p.timestamps = {0, 1};
    p.asset_names = {"cash", "a", "b"};
    const auto y = relative_prices(p).at(0);
    EXPECT_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 1.1);
    EXPECT_DOUBLE_EQ(y[2], 0.9);
}

TEST(RelativePrices, ConstantPricesGiveOnes) {
    const auto p = generate_synthetic({2, 10, {0.0}, {0.0}, 0.0, 1});
    const auto rel = relative_prices(p);
    for (double v : rel.y.data()) EXPECT_EQ(v, 1.0);
}

TEST(RelativePrices, CashRowIsExactlyOne) {
    const auto p = generate_synthetic({4, 50, {0.01}, {0.1}, 0.2, 3});
    const auto rel = relative_prices(p);
    for (std::size_t t = 0; t < rel.n_periods(); ++t) EXPECT_EQ(rel.y(0, t), 1.0);
}

TEST(RelativePrices, NeedsTwoSteps) {
    auto p = generate_synthetic({1, 2, {0.0}, {0.1}, 0.0, 1}).slice(0, 1);
    EXPECT_THROW(relative_prices(p), DataError);
}

TEST(RelativePrices, CumulativeProductRecoversTotalReturn) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = generate_synthetic({3, 500, {0.0005}, {0.03}, 0.05, seed});
        const auto rel = relative_prices(p);
        for (std::size_t i = 0; i <= p.n_assets; ++i) {
            double prod = 1.0;
            for (std::size_t t = 0; t < rel.n_periods(); ++t) prod *= rel.y(i, t);
            const double expected = p.close(i, p.n_steps - 1) / p.close(i, 0);
            EXPECT_NEAR(prod / expected, 1.0, 1e-12);
        }
    }
}

TEST(ChronologicalSplit, FractionSplitsInOrder) {
    const auto p = generate_synthetic({2, 100, {0.0}, {0.01}, 0.0, 5});
    SplitSpec spec;
    spec.train_fraction = 0.9;
    const auto [train, test] = chronological_split(p, spec);
    EXPECT_EQ(train.n_steps, 90u);
    EXPECT_EQ(test.n_steps, 10u);
    EXPECT_LT(train.timestamps.back(), test.timestamps.front());
    for (std::size_t t = 0; t < 100; ++t) {
        const auto& part = t < 90 ? train : test;
        const std::size_t local = t < 90 ? t : t - 90;
        for (std::size_t i = 0; i <= 2; ++i) EXPECT_EQ(part.close(i, local), p.close(i, t));
    }
}

TEST(ChronologicalSplit, FullFractionIsRejected) {
    const auto p = generate_synthetic({2, 100, {0.0}, {0.01}, 0.0, 5});
    SplitSpec spec;
    spec.train_fraction = 1.0;
    EXPECT_THROW(chronological_split(p, spec), DataError);
}

TEST(ChronologicalSplit, BitcoinBoundary) {
    const auto p = generate_synthetic({1, 35089, {0.0}, {0.001}, 0.0, 9});
    SplitSpec spec;
    spec.boundary = 32313;
    const auto [train, test] = chronological_split(p, spec, 32);
    EXPECT_EQ(train.n_steps, 32313u);
    EXPECT_EQ(test.n_steps, 2776u);
}

TEST(ChronologicalSplit, ShortSegmentIsRejected) {
    const auto p = generate_synthetic({2, 40, {0.0}, {0.01}, 0.0, 5});
    SplitSpec spec;
    spec.boundary = 35;
    EXPECT_THROW(chronological_split(p, spec, 10), DataError);
}

TEST(GenerateSynthetic, ZeroVolZeroDriftIsConstant) {
    const auto p = generate_synthetic({3, 30, {0.0}, {0.0}, 0.0, 2});
    for (std::size_t i = 0; i <= 3; ++i)
        for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(p.close(i, t), 1.0);
}

TEST(GenerateSynthetic, SameSeedSameSeries) {
    const MarketSpec spec{3, 200, {0.001, 0.0, -0.001}, {0.02, 0.03, 0.04}, 0.05, 42};
    EXPECT_EQ(generate_synthetic(spec), generate_synthetic(spec));
    MarketSpec other = spec;
    other.seed = 43;
    EXPECT_NE(generate_synthetic(spec).close, generate_synthetic(other).close);
}

TEST(GenerateSynthetic, DeterministicDriftCompounds) {
    const auto p = generate_synthetic({2, 50, {std::log(1.01)}, {0.0}, 0.0, 1});
    const auto rel = relative_prices(p);
    for (std::size_t i = 1; i <= 2; ++i)
        for (std::size_t t = 0; t < rel.n_periods(); ++t) EXPECT_NEAR(rel.y(i, t), 1.01, 1e-12);
}

TEST(GenerateSynthetic, RegimeSwitchNegatesDrift) {
    const double d = 0.01;
    const auto p = generate_synthetic({1, 400, {d}, {0.0}, 0.1, 11});
    const auto rel = relative_prices(p);
    bool saw_down = false;
    for (std::size_t t = 0; t < rel.n_periods(); ++t) {
        const double lr = std::log(rel.y(1, t));
        EXPECT_NEAR(std::abs(lr), d, 1e-12);
        saw_down |= lr < 0;
    }
    EXPECT_TRUE(saw_down);
}

TEST(GenerateSynthetic, OutputAlwaysSatisfiesInvariants) {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<std::size_t> assets(1, 6), steps(2, 300);
    std::uniform_real_distribution<double> drift(-0.01, 0.01), vol(0.0, 0.1), prob(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        MarketSpec spec;
        spec.n_assets = assets(rng);
        spec.n_steps = steps(rng);
        for (std::size_t i = 0; i < spec.n_assets; ++i) {
            spec.drift.push_back(drift(rng));
            spec.volatility.push_back(vol(rng));
        }
        spec.regime_switch_prob = prob(rng);
        spec.seed = rng();
        EXPECT_NO_THROW(generate_synthetic(spec).validate());
    }
}

TEST(GenerateSynthetic, RejectsInvalidParameters) {
    EXPECT_THROW(generate_synthetic({2, 10, {0.0}, {-0.1}, 0.0, 1}), DataError);
    EXPECT_THROW(generate_synthetic({2, 1, {0.0}, {0.1}, 0.0, 1}), DataError);
    EXPECT_THROW(generate_synthetic({2, 10, {0.0}, {0.1}, 1.5, 1}), DataError);
    EXPECT_THROW(generate_synthetic({2, 10, {0.0, 0.1, 0.2}, {0.1}, 0.0, 1}), DataError);
}

}  // namespace
}  // namespace sarl
