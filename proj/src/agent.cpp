#include "sarl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "sarl/rng.hpp"

namespace sarl {

NetworkShape NetworkShape::for_market(std::size_t n_assets, std::size_t window, std::size_t signal_dim,
                                      std::vector<std::size_t> hidden) {
    NetworkShape shape;
    shape.input_dim = n_assets * window + signal_dim;
    shape.hidden = std::move(hidden);
    shape.output_dim = n_assets + 1;
    return shape;
}

std::size_t NetworkShape::parameter_count() const {
    std::size_t count = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) count += layer_out(l) * (layer_in(l) + 1);
    return count;
}

std::size_t PolicyParams::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += shape.layer_out(l) * (shape.layer_in(l) + 1);
    return off;
}

std::size_t PolicyParams::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + shape.layer_out(layer) * shape.layer_in(layer);
}

void PolicyParams::validate() const {
    if (shape.input_dim == 0 || shape.output_dim < 2) throw std::invalid_argument("policy shape is empty");
    for (auto h : shape.hidden)
        if (h == 0) throw std::invalid_argument("hidden layer of size 0");
    if (values.size() != shape.parameter_count())
        throw std::invalid_argument("policy parameter count does not match shape");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("policy parameters must be finite");
}

PolicyParams init_params(const NetworkShape& shape, std::uint64_t seed, double init_scale) {
    PolicyParams p{shape, std::vector<double>(shape.parameter_count(), 0.0)};
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < shape.n_layers(); ++l) {
        const double bound = init_scale / std::sqrt(static_cast<double>(shape.layer_in(l)));
        std::uniform_real_distribution<double> unif(-bound, bound);
        const std::size_t off = p.weight_offset(l);
        const std::size_t count = shape.layer_out(l) * shape.layer_in(l);
        for (std::size_t k = 0; k < count; ++k) p.values[off + k] = unif(rng);
    }
    return p;
}

PolicyParams zero_params(const NetworkShape& shape) {
    return PolicyParams{shape, std::vector<double>(shape.parameter_count(), 0.0)};
}

std::vector<double> state_features(const AugmentedState& s) {
    std::vector<double> x;
    x.reserve(s.dimension());
    for (double v : s.price_window.data()) x.push_back(std::log(v));
    x.insert(x.end(), s.signal.begin(), s.signal.end());
    return x;
}

namespace {

// Activations of every hidden layer followed by the softmax output, for one step.
void forward_into(const PolicyParams& p, std::span<const double> x, std::span<double> acts) {
    const auto& shape = p.shape;
    std::span<const double> in = x;
    std::size_t act_off = 0;
    for (std::size_t l = 0; l < shape.n_layers(); ++l) {
        const std::size_t n_in = shape.layer_in(l);
        const std::size_t n_out = shape.layer_out(l);
        const double* w = p.values.data() + p.weight_offset(l);
        const double* b = p.values.data() + p.bias_offset(l);
        std::span<double> out = acts.subspan(act_off, n_out);
        for (std::size_t o = 0; o < n_out; ++o) {
            double z = b[o];
            const double* wr = w + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) z += wr[i] * in[i];
            out[o] = z;
        }
        if (l + 1 < shape.n_layers()) {
            for (auto& v : out) v = std::tanh(v);
        } else {
            const double zmax = *std::max_element(out.begin(), out.end());
            double sum = 0.0;
            for (auto& v : out) {
                v = std::exp(v - zmax);
                sum += v;
            }
            for (auto& v : out) v /= sum;
        }
        in = out;
        act_off += n_out;
    }
}

std::size_t activation_width(const NetworkShape& shape) {
    return std::accumulate(shape.hidden.begin(), shape.hidden.end(), shape.output_dim);
}

void check_episode(const PolicyParams& params, const Episode& ep) {
    if (ep.length() == 0) throw std::invalid_argument("episode is empty");
    if (ep.inputs.cols() != params.shape.input_dim)
        throw std::invalid_argument("episode feature width " + std::to_string(ep.inputs.cols()) +
                                    " does not match policy input " +
                                    std::to_string(params.shape.input_dim));
    if (ep.relatives.cols() != params.shape.output_dim || ep.entry.size() != params.shape.output_dim)
        throw std::invalid_argument("episode asset count does not match policy output");
}

struct Rollout {
    std::size_t width = 0;
    std::vector<double> acts;                // T x width
    std::vector<std::vector<double>> drifted;  // holdings before each decision
    std::vector<double> betas;
    std::vector<double> growth;              // a_t . y_t

    std::span<const double> action(std::size_t t, std::size_t dim) const {
        return {acts.data() + t * width + width - dim, dim};
    }
};

Rollout roll_out(const PolicyParams& params, const Episode& ep, const CostModel* cm) {
    check_episode(params, ep);
    const std::size_t T = ep.length();
    const std::size_t dim = params.shape.output_dim;
    Rollout ro;
    ro.width = activation_width(params.shape);
    ro.acts.resize(T * ro.width);
    ro.drifted.reserve(T);
    ro.betas.resize(T, 1.0);
    ro.growth.resize(T);
    Weights held = ep.entry;
    for (std::size_t t = 0; t < T; ++t) {
        forward_into(params, ep.inputs.row(t), std::span<double>(ro.acts.data() + t * ro.width, ro.width));
        const auto a = ro.action(t, dim);
        const auto y = ep.relatives.row(t);
        if (cm) ro.betas[t] = solve_shrink_factor(held, a, *cm).beta;
        ro.growth[t] = std::inner_product(a.begin(), a.end(), y.begin(), 0.0);
        ro.drifted.push_back(std::move(held));
        held = drift_weights(a, y);
    }
    return ro;
}

}  // namespace

Action forward_features(const PolicyParams& params, std::span<const double> x) {
    if (x.size() != params.shape.input_dim)
        throw std::invalid_argument("policy input has " + std::to_string(x.size()) + " features, expected " +
                                    std::to_string(params.shape.input_dim));
    std::vector<double> acts(activation_width(params.shape));
    forward_into(params, x, acts);
    Action a(acts.end() - static_cast<std::ptrdiff_t>(params.shape.output_dim), acts.end());
    for (double v : a)
        if (!std::isfinite(v)) throw std::domain_error("policy produced non-finite activations");
    return a;
}

Action policy_forward(const PolicyParams& params, const AugmentedState& s) {
    return forward_features(params, state_features(s));
}

Policy make_policy(PolicyParams params) {
    return [p = std::move(params)](const AugmentedState& s) { return policy_forward(p, s); };
}

Episode Episode::slice(std::size_t first, std::size_t count, Weights entry_weights) const {
    return Episode{inputs.row_range(first, count), relatives.row_range(first, count),
                   std::move(entry_weights)};
}

Episode build_episode(const PriceSeries& prices, const SignalSeries* signals, std::size_t window) {
    if (window == 0 || prices.n_steps <= window + 1)
        throw std::invalid_argument("build_episode: price series must be longer than window + 1");
    const RelativePrices rel = relative_prices(prices);
    const std::size_t T = prices.n_steps - window;
    const std::size_t signal_dim = signals ? prices.n_assets : 0;
    Episode ep;
    ep.inputs = Matrix(T, prices.n_assets * window + signal_dim);
    ep.relatives = Matrix(T, prices.n_assets + 1);
    ep.entry.assign(prices.n_assets + 1, 0.0);
    ep.entry[0] = 1.0;
    for (std::size_t k = 0; k < T; ++k) {
        const std::size_t t = window - 1 + k;
        const auto x = state_features(state_at(prices, signals, window, t));
        std::copy(x.begin(), x.end(), ep.inputs.row(k).begin());
        for (std::size_t i = 0; i <= prices.n_assets; ++i) ep.relatives(k, i) = rel.y(i, t);
    }
    return ep;
}

EpisodeTrace evaluate_episode(const PolicyParams& params, const Episode& episode, const CostModel& cm) {
    const Rollout ro = roll_out(params, episode, &cm);
    const std::size_t T = episode.length();
    const std::size_t dim = params.shape.output_dim;
    EpisodeTrace tr;
    tr.betas = ro.betas;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const auto a = ro.action(t, dim);
        tr.actions.emplace_back(a.begin(), a.end());
        const double r = std::log(ro.betas[t] * ro.growth[t]);
        tr.rewards.push_back(r);
        sum += r;
    }
    tr.objective = sum / static_cast<double>(T);
    return tr;
}

double objective(const PolicyParams& params, const Episode& episode, const CostModel& cm) {
    return evaluate_episode(params, episode, cm).objective;
}

double objective_with_betas(const PolicyParams& params, const Episode& episode,
                            std::span<const double> betas) {
    const Rollout ro = roll_out(params, episode, nullptr);
    if (betas.size() != episode.length()) throw std::invalid_argument("beta count does not match episode");
    double sum = 0.0;
    for (std::size_t t = 0; t < episode.length(); ++t) sum += std::log(betas[t] * ro.growth[t]);
    return sum / static_cast<double>(episode.length());
}

std::vector<double> gradient(const PolicyParams& params, const Episode& episode, const CostModel& cm) {
    cm.validate();
    const Rollout ro = roll_out(params, episode, &cm);
    const auto& shape = params.shape;
    const std::size_t T = episode.length();
    const std::size_t dim = shape.output_dim;
    const double inv_T = 1.0 / static_cast<double>(T);

    // dJ/da_t
    std::vector<double> g_action(T * dim, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const auto y = episode.relatives.row(t);
        for (std::size_t i = 0; i < dim; ++i) g_action[t * dim + i] += inv_T * y[i] / ro.growth[t];
    }
    if (cm.mode == CostMode::simple) {
        const double c = 0.5 * (cm.c_buy + cm.c_sell);
        std::vector<double> g_held(dim);
        for (std::size_t t = 0; t < T; ++t) {
            const auto a = ro.action(t, dim);
            const auto& held = ro.drifted[t];
            const double g_beta = inv_T / ro.betas[t];
            std::fill(g_held.begin(), g_held.end(), 0.0);
            for (std::size_t i = 1; i < dim; ++i) {
                const double diff = a[i] - held[i];
                const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                g_action[t * dim + i] -= g_beta * c * sgn;
                g_held[i] = g_beta * c * sgn;
            }
            if (t == 0) continue;
            // held_t = (y_{t-1} * a_{t-1}) / (y_{t-1} . a_{t-1})
            const auto a_prev = ro.action(t - 1, dim);
            const auto y_prev = episode.relatives.row(t - 1);
            const double s = ro.growth[t - 1];
            double proj = 0.0;
            for (std::size_t j = 0; j < dim; ++j) proj += g_held[j] * y_prev[j] * a_prev[j];
            for (std::size_t k = 0; k < dim; ++k)
                g_action[(t - 1) * dim + k] += g_held[k] * y_prev[k] / s - y_prev[k] * proj / (s * s);
        }
    }

    std::vector<double> grad(params.values.size(), 0.0);
    std::vector<double> delta, delta_prev;
    for (std::size_t t = 0; t < T; ++t) {
        const double* acts = ro.acts.data() + t * ro.width;
        const auto a = ro.action(t, dim);
        const double* ga = g_action.data() + t * dim;
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += a[i] * ga[i];
        delta.assign(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) delta[i] = a[i] * (ga[i] - dot);

        std::size_t out_off = ro.width - dim;
        for (std::size_t l = shape.n_layers(); l-- > 0;) {
            const std::size_t n_in = shape.layer_in(l);
            const std::size_t n_out = shape.layer_out(l);
            const std::size_t in_off = l == 0 ? 0 : out_off - n_in;
            const double* in = l == 0 ? episode.inputs.row(t).data() : acts + in_off;
            double* gw = grad.data() + params.weight_offset(l);
            double* gb = grad.data() + params.bias_offset(l);
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = delta[o];
                gb[o] += d;
                if (d == 0.0) continue;
                double* row = gw + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i) row[i] += d * in[i];
            }
            if (l == 0) break;
            const double* w = params.values.data() + params.weight_offset(l);
            delta_prev.assign(n_in, 0.0);
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = delta[o];
                const double* row = w + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i) delta_prev[i] += d * row[i];
            }
            for (std::size_t i = 0; i < n_in; ++i) delta_prev[i] *= 1.0 - in[i] * in[i];
            delta.swap(delta_prev);
            out_off = in_off;
        }
    }
    for (double g : grad)
        if (!std::isfinite(g)) throw TrainingError("non-finite gradient");
    return grad;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning rate must be finite and >= 0");
    if (batch_window < 2) throw std::invalid_argument("batch window must be >= 2");
    if (batches_per_epoch == 0) throw std::invalid_argument("batches per epoch must be >= 1");
}

TrainResult train(PolicyParams params, const Episode& train_episode, const CostModel& cm,
                  const TrainConfig& cfg, std::size_t start_epoch) {
    cfg.validate();
    cm.validate();
    params.validate();
    check_episode(params, train_episode);
    const std::size_t K = train_episode.length();
    if (K < cfg.batch_window)
        throw std::invalid_argument("training episode (" + std::to_string(K) +
                                    " steps) shorter than one batch window");

    TrainResult res;
    for (std::size_t e = start_epoch; e < start_epoch + cfg.epochs; ++e) {
        std::mt19937_64 rng(derive_seed({cfg.seed, 0x7472ULL, e}));
        std::uniform_int_distribution<std::size_t> pick(0, K - cfg.batch_window);
        for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
            const std::size_t first = pick(rng);
            Weights entry = train_episode.entry;
            if (first > 0) {
                const Action prev = forward_features(params, train_episode.inputs.row(first - 1));
                entry = drift_weights(prev, train_episode.relatives.row(first - 1));
            }
            const Episode batch = train_episode.slice(first, cfg.batch_window, std::move(entry));
            const auto g = gradient(params, batch, cm);
            for (std::size_t k = 0; k < g.size(); ++k) params.values[k] += cfg.learning_rate * g[k];
        }
        const double j = objective(params, train_episode, cm);
        if (!std::isfinite(j)) throw TrainingError("training diverged at epoch " + std::to_string(e));
        res.learning_curve.push_back(j);
    }
    res.params = std::move(params);
    res.epochs_completed = start_epoch + cfg.epochs;
    return res;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "sarl-policy-v1";
    j["shape"] = {{"input_dim", ckpt.params.shape.input_dim},
                  {"hidden", ckpt.params.shape.hidden},
                  {"output_dim", ckpt.params.shape.output_dim}};
    j["params"] = ckpt.params.values;
    j["epochs_completed"] = ckpt.epochs_completed;
    j["learning_curve"] = ckpt.learning_curve;
    j["config"] = nlohmann::ordered_json(ckpt.config);

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << j.dump(1) << '\n';
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "sarl-policy-v1")
        throw std::runtime_error(path.string() + " is not a policy checkpoint");
    Checkpoint c;
    c.params.shape.input_dim = j.at("shape").at("input_dim").get<std::size_t>();
    c.params.shape.hidden = j.at("shape").at("hidden").get<std::vector<std::size_t>>();
    c.params.shape.output_dim = j.at("shape").at("output_dim").get<std::size_t>();
    c.params.values = j.at("params").get<std::vector<double>>();
    c.params.validate();
    c.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    c.learning_curve = j.at("learning_curve").get<std::vector<double>>();
    c.config = j.at("config").get<std::map<std::string, std::string>>();
    return c;
}

}  // namespace sarl
