#include "sarl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace sarl {

std::vector<double> simplex_project(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("simplex_project: empty vector");
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("simplex_project: non-finite input");
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) theta = candidate;
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

Action crp_action(std::span<const double> target) {
    if (!on_simplex(target, 1e-9)) throw std::invalid_argument("CRP target must lie on the simplex");
    return Action(target.begin(), target.end());
}

namespace {

void check_history(std::span<const double> current, const RelativeHistory& history,
                   const MeanReversionParams& p) {
    if (p.window == 0) throw std::invalid_argument("mean reversion window must be >= 1");
    if (history.size() < p.window)
        throw std::invalid_argument("relative-price history shorter than the window");
    for (const auto& y : history)
        if (y.size() != current.size()) throw std::invalid_argument("history row has wrong dimension");
}

// Shared passive-aggressive move: b + step * (x - mean(x)) projected, or b when x is flat.
Action pa_update(std::span<const double> b, const std::vector<double>& x, double signed_loss) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double norm_sq = 0.0;
    for (double v : x) norm_sq += (v - mean) * (v - mean);
    if (norm_sq == 0.0) return Action(b.begin(), b.end());
    const double tau = signed_loss / norm_sq;
    std::vector<double> moved(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) moved[i] = b[i] + tau * (x[i] - mean);
    return simplex_project(moved);
}

}  // namespace

Action olmar_action(std::span<const double> current, const RelativeHistory& history,
                    const MeanReversionParams& p) {
    check_history(current, history, p);
    const std::size_t dim = current.size();
    std::vector<double> predicted(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        double prod = 1.0;
        for (std::size_t k = 0; k < p.window; ++k) {
            prod /= history[history.size() - 1 - k][i];
            predicted[i] += prod;
        }
        predicted[i] /= static_cast<double>(p.window);
    }
    const double score = std::inner_product(current.begin(), current.end(), predicted.begin(), 0.0);
    if (score >= p.epsilon) return Action(current.begin(), current.end());
    return pa_update(current, predicted, p.epsilon - score);
}

Action wmamr_action(std::span<const double> current, const RelativeHistory& history,
                    const MeanReversionParams& p) {
    check_history(current, history, p);
    const std::size_t dim = current.size();
    std::vector<double> avg(dim, 0.0);
    for (std::size_t k = 0; k < p.window; ++k) {
        const auto& y = history[history.size() - 1 - k];
        for (std::size_t i = 0; i < dim; ++i) avg[i] += y[i];
    }
    for (auto& v : avg) v /= static_cast<double>(p.window);
    const double score = std::inner_product(current.begin(), current.end(), avg.begin(), 0.0);
    if (score <= p.epsilon) return Action(current.begin(), current.end());
    return pa_update(current, avg, -(score - p.epsilon));
}

BaselineKind parse_baseline(const std::string& name) {
    if (name == "cash") return BaselineKind::cash;
    if (name == "ew") return BaselineKind::ew;
    if (name == "crp") return BaselineKind::crp;
    if (name == "olmar") return BaselineKind::olmar;
    if (name == "wmamr") return BaselineKind::wmamr;
    throw std::invalid_argument("unknown baseline '" + name + "'");
}

std::string to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::cash: return "cash";
        case BaselineKind::ew: return "ew";
        case BaselineKind::crp: return "crp";
        case BaselineKind::olmar: return "olmar";
        case BaselineKind::wmamr: return "wmamr";
    }
    return "ew";
}

Strategy::Strategy(BaselineConfig cfg, std::size_t n_assets) : cfg_(std::move(cfg)), n_assets_(n_assets) {
    const std::size_t dim = n_assets_ + 1;
    const Action uniform(dim, 1.0 / static_cast<double>(dim));
    switch (cfg_.kind) {
        case BaselineKind::cash:
            cfg_.target.assign(dim, 0.0);
            cfg_.target[0] = 1.0;
            break;
        case BaselineKind::ew:
            cfg_.target = uniform;
            break;
        case BaselineKind::crp:
            if (cfg_.target.empty()) cfg_.target = uniform;
            if (cfg_.target.size() != dim)
                throw std::invalid_argument("CRP target must have n_assets + 1 entries");
            crp_action(cfg_.target);
            break;
        case BaselineKind::olmar:
            if (cfg_.epsilon == 0.0) cfg_.epsilon = 10.0;
            break;
        case BaselineKind::wmamr:
            if (cfg_.epsilon == 0.0) cfg_.epsilon = 1.0;
            break;
    }
    if (cfg_.window == 0) throw std::invalid_argument("baseline window must be >= 1");
    current_ = uniform;
}

Action Strategy::act(const AugmentedState& s) {
    if (cfg_.kind == BaselineKind::cash || cfg_.kind == BaselineKind::ew || cfg_.kind == BaselineKind::crp)
        return crp_action(cfg_.target);

    const Matrix& pw = s.price_window;
    if (pw.rows() != n_assets_) throw std::invalid_argument("state has wrong asset count for baseline");
    if (pw.cols() < cfg_.window + 1)
        throw std::invalid_argument("price window too short for baseline window " +
                                    std::to_string(cfg_.window));
    // Relatives observed up to the decision time; cash relative is 1.
    RelativeHistory history;
    for (std::size_t c = pw.cols() - cfg_.window; c < pw.cols(); ++c) {
        std::vector<double> y(n_assets_ + 1, 1.0);
        for (std::size_t i = 0; i < n_assets_; ++i) y[i + 1] = pw(i, c) / pw(i, c - 1);
        history.push_back(std::move(y));
    }
    const MeanReversionParams p{cfg_.epsilon, cfg_.window};
    current_ = cfg_.kind == BaselineKind::olmar ? olmar_action(current_, history, p)
                                                : wmamr_action(current_, history, p);
    return current_;
}

Policy make_baseline_policy(const BaselineConfig& cfg, std::size_t n_assets) {
    auto strategy = std::make_shared<Strategy>(cfg, n_assets);
    return [strategy](const AugmentedState& s) { return strategy->act(s); };
}

}  // namespace sarl
