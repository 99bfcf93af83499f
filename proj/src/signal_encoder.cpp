#include "sarl/signal_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sarl/rng.hpp"

namespace sarl {

SignalMode parse_signal_mode(const std::string& name) {
    if (name == "none") return SignalMode::none;
    if (name == "oracle") return SignalMode::oracle;
    if (name == "internal") return SignalMode::internal;
    throw std::invalid_argument("unknown signal mode '" + name + "'");
}

std::string to_string(SignalMode mode) {
    switch (mode) {
        case SignalMode::none: return "none";
        case SignalMode::oracle: return "oracle";
        case SignalMode::internal: return "internal";
    }
    return "none";
}

void SignalConfig::validate() const {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw std::invalid_argument("signal accuracy must lie in [0, 1]");
    if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("signal density must lie in [0, 1]");
    if (lookback == 0) throw std::invalid_argument("signal lookback must be >= 1");
}

SignalSeries true_movements(const PriceSeries& prices) {
    if (prices.n_steps < 2) throw DataError("movements need at least 2 steps");
    SignalSeries s;
    s.values = Matrix(prices.n_assets, prices.n_steps, 0.0);
    s.timestamps = prices.timestamps;
    s.asset_names.assign(prices.asset_names.begin() + 1, prices.asset_names.end());
    for (std::size_t i = 0; i < prices.n_assets; ++i)
        for (std::size_t t = 0; t + 1 < prices.n_steps; ++t) {
            const double now = prices.close(i + 1, t);
            const double next = prices.close(i + 1, t + 1);
            if (next < now) {
                s.values(i, t) = -1.0;
            } else {
                s.values(i, t) = 1.0;
                if (next == now) s.ties.emplace_back(i, t);
            }
        }
    return s;
}

SignalSeries oracle_labels(const SignalSeries& truth, const SignalConfig& cfg) {
    cfg.validate();
    SignalSeries out;
    out.values = Matrix(truth.n_assets(), truth.n_steps(), 0.0);
    out.timestamps = truth.timestamps;
    out.asset_names = truth.asset_names;
    const std::size_t usable = truth.usable_steps();
    const auto keep = static_cast<std::size_t>(std::llround(cfg.density * static_cast<double>(usable)));

    std::vector<std::size_t> order(usable);
    for (std::size_t i = 0; i < truth.n_assets(); ++i) {
        std::mt19937_64 rng(derive_seed({cfg.seed, 0x5167ULL, i}));
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Partial Fisher-Yates: the first `keep` slots form a uniform subset.
        for (std::size_t k = 0; k < keep; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, usable - 1);
            std::swap(order[k], order[pick(rng)]);
        }
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t k = 0; k < keep; ++k) {
            const std::size_t t = order[k];
            const double label = truth.values(i, t);
            out.values(i, t) = unif(rng) < cfg.accuracy ? label : -label;
        }
    }
    return out;
}

SignalSeries apply_lookback(const SignalSeries& signals, std::size_t lookback) {
    if (lookback == 0) throw std::invalid_argument("lookback must be >= 1");
    if (lookback == 1) return signals;
    SignalSeries out = signals;
    for (std::size_t i = 0; i < signals.n_assets(); ++i)
        for (std::size_t t = 0; t < signals.n_steps(); ++t) {
            double sum = 0.0;
            const std::size_t first = t + 1 >= lookback ? t + 1 - lookback : 0;
            for (std::size_t k = first; k <= t; ++k) sum += signals.values(i, k);
            out.values(i, t) = sum / static_cast<double>(lookback);
        }
    return out;
}

void write_signal_csv(const SignalSeries& signals, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "asset,timestamp,label\n";
    char buf[32];
    for (std::size_t i = 0; i < signals.n_assets(); ++i)
        for (std::size_t t = 0; t < signals.n_steps(); ++t) {
            std::snprintf(buf, sizeof buf, "%.17g", signals.values(i, t));
            out << signals.asset_names.at(i) << ',' << signals.timestamps.at(t) << ',' << buf << '\n';
        }
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Standardized lagged log returns ending at price column `last` (inclusive).
void lag_features(const Matrix& close_rows, std::size_t row, std::size_t last, std::size_t lags,
                  double scale, std::span<double> out) {
    for (std::size_t k = 0; k < lags; ++k) {
        const std::size_t hi = last - k;
        out[k] = std::log(close_rows(row, hi) / close_rows(row, hi - 1)) / scale;
    }
}

}  // namespace

PredictorParams fit_internal_predictor(const PriceSeries& train, const PredictorFitConfig& cfg) {
    if (cfg.lags == 0) throw std::invalid_argument("predictor needs at least one lag");
    if (train.n_steps < cfg.lags + 2) throw DataError("training series too short for predictor lags");
    const std::size_t n = train.n_assets;
    const std::size_t lags = cfg.lags;

    PredictorParams params;
    params.lags = lags;
    params.weights = Matrix(n, lags, 0.0);
    params.bias.assign(n, 0.0);
    params.scale.assign(n, 1.0);
    params.train_accuracy.assign(n, 0.0);
    params.degenerate.assign(n, false);

    // Sample k uses prices up to column lags + k and predicts the move to lags + k + 1.
    const std::size_t samples = train.n_steps - lags - 1;
    std::vector<double> x(samples * lags);
    std::vector<double> target(samples);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = i + 1;
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t t = 1; t < train.n_steps; ++t) {
            const double r = std::log(train.close(row, t) / train.close(row, t - 1));
            sum += r;
            sum_sq += r * r;
        }
        const double m = static_cast<double>(train.n_steps - 1);
        const double var = std::max(sum_sq / m - (sum / m) * (sum / m), 0.0);
        params.scale[i] = var > 1e-24 ? std::sqrt(var) : 1.0;

        std::size_t ups = 0;
        for (std::size_t k = 0; k < samples; ++k) {
            const std::size_t last = lags + k;
            lag_features(train.close, row, last, lags, params.scale[i],
                         std::span<double>(x.data() + k * lags, lags));
            target[k] = train.close(row, last + 1) >= train.close(row, last) ? 1.0 : 0.0;
            ups += target[k] > 0.5 ? 1 : 0;
        }

        if (ups == 0 || ups == samples) {
            params.degenerate[i] = true;
            params.warning = true;
            params.bias[i] = ups == samples ? 1.0 : -1.0;
            params.train_accuracy[i] = 1.0;
            continue;
        }

        for (std::size_t k = 0; k < lags; ++k) params.weights(i, k) = init(rng);
        std::vector<double> grad_w(lags);
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t k = 0; k < samples; ++k) {
                double z = params.bias[i];
                for (std::size_t j = 0; j < lags; ++j) z += params.weights(i, j) * x[k * lags + j];
                const double err = sigmoid(z) - target[k];
                for (std::size_t j = 0; j < lags; ++j) grad_w[j] += err * x[k * lags + j];
                grad_b += err;
            }
            const double step = cfg.learning_rate / static_cast<double>(samples);
            for (std::size_t j = 0; j < lags; ++j) params.weights(i, j) -= step * grad_w[j];
            params.bias[i] -= step * grad_b;
        }

        std::size_t correct = 0;
        for (std::size_t k = 0; k < samples; ++k) {
            double z = params.bias[i];
            for (std::size_t j = 0; j < lags; ++j) z += params.weights(i, j) * x[k * lags + j];
            const double pred = sigmoid(z) >= 0.5 ? 1.0 : 0.0;
            correct += pred == target[k] ? 1 : 0;
        }
        params.train_accuracy[i] = static_cast<double>(correct) / static_cast<double>(samples);
    }
    return params;
}

std::vector<double> predict_internal(const PredictorParams& params, const Matrix& window) {
    const std::size_t n = params.bias.size();
    if (window.rows() != n) throw std::invalid_argument("predictor window has wrong asset count");
    if (window.cols() < params.lags + 1)
        throw std::invalid_argument("predictor window too short: need lags + 1 prices");
    std::vector<double> out(n);
    std::vector<double> x(params.lags);
    const std::size_t last = window.cols() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        lag_features(window, i, last, params.lags, params.scale[i], x);
        double z = params.bias[i];
        for (std::size_t j = 0; j < params.lags; ++j) z += params.weights(i, j) * x[j];
        out[i] = sigmoid(z) >= 0.5 ? 1.0 : -1.0;
    }
    return out;
}

SignalSeries predict_series(const PredictorParams& params, const PriceSeries& prices) {
    SignalSeries s;
    s.values = Matrix(prices.n_assets, prices.n_steps, 0.0);
    s.timestamps = prices.timestamps;
    s.asset_names.assign(prices.asset_names.begin() + 1, prices.asset_names.end());
    const std::size_t need = params.lags + 1;
    if (prices.n_steps < need + 1) return s;
    Matrix window(prices.n_assets, need);
    for (std::size_t t = need - 1; t + 1 < prices.n_steps; ++t) {
        for (std::size_t i = 0; i < prices.n_assets; ++i)
            for (std::size_t c = 0; c < need; ++c) window(i, c) = prices.close(i + 1, t + 1 - need + c);
        const auto labels = predict_internal(params, window);
        for (std::size_t i = 0; i < prices.n_assets; ++i) s.values(i, t) = labels[i];
    }
    return s;
}

AugmentedState augment(const Matrix& raw_window, std::optional<std::span<const double>> signal,
                       std::size_t signal_dim, std::size_t t) {
    if (raw_window.rows() == 0 || raw_window.cols() == 0)
        throw std::invalid_argument("augment: empty price window");
    AugmentedState s;
    s.t = t;
    s.price_window = Matrix(raw_window.rows(), raw_window.cols());
    const std::size_t last = raw_window.cols() - 1;
    for (std::size_t i = 0; i < raw_window.rows(); ++i) {
        const double ref = raw_window(i, last);
        if (!(ref > 0.0)) throw std::invalid_argument("augment: non-positive price in window");
        for (std::size_t c = 0; c < raw_window.cols(); ++c) s.price_window(i, c) = raw_window(i, c) / ref;
    }
    s.signal.assign(signal_dim, 0.0);
    if (signal) {
        if (signal->size() != signal_dim)
            throw std::invalid_argument("augment: signal has " + std::to_string(signal->size()) +
                                        " entries, expected " + std::to_string(signal_dim));
        std::copy(signal->begin(), signal->end(), s.signal.begin());
    }
    return s;
}

}  // namespace sarl
