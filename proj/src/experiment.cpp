#include "sarl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sarl/io.hpp"
#include "sarl/rng.hpp"

namespace sarl {

namespace {

constexpr std::uint64_t kTagMarket = 0x6d6b74;
constexpr std::uint64_t kTagAgent = 0x61676e74;
constexpr std::uint64_t kTagSignal = 0x7369676e;
constexpr std::uint64_t kTagInit = 0x696e6974;
constexpr std::uint64_t kTagTrain = 0x7472616e;
constexpr std::uint64_t kTagTest = 0x74657374;
constexpr std::uint64_t kTagControl = 0x63746c;

const std::vector<std::string> kStandardHorizons = {"1w", "2w", "1m", "2m", "3m", "6m"};

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& items) {
    std::vector<std::string> parts;
    for (const auto& v : items) {
        if constexpr (std::is_floating_point_v<T>) parts.push_back(format_double(v));
        else parts.push_back(std::to_string(v));
    }
    return join(parts);
}

template <typename F>
auto checked(const std::string& key, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("invalid value for " + key + ": " + e.what());
    }
}

}  // namespace

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "seed",
        "market.source", "market.csv", "market.forward_fill", "market.n_assets", "market.n_steps",
        "market.drift", "market.vol", "market.regime_switch", "market.seed",
        "split.train_fraction", "split.boundary",
        "agent.window", "agent.hidden", "agent.learning_rate", "agent.epochs", "agent.batch_window",
        "agent.batches_per_epoch", "agent.seed", "agent.init_scale", "agent.source", "agent.checkpoint",
        "agent.resume",
        "cost.buy", "cost.sell", "cost.mode", "cost.max_iters", "cost.tol",
        "signal.mode", "signal.accuracy", "signal.density", "signal.seed", "signal.lookback",
        "signal.lags", "signal.predictor_epochs", "signal.predictor_lr",
        "baseline.name", "baseline.epsilon", "baseline.window", "baseline.target_weights",
        "sweep.accuracies", "sweep.densities", "sweep.seeds",
        "eval.rfree", "eval.calendar", "eval.steps_per_day", "eval.horizons",
    };
    return keys;
}

ExperimentConfig resolve(const Config& c) {
    c.require_known(known_config_keys());
    ExperimentConfig x;
    auto& echo = x.echo;

    x.seed = c.get_u64("seed", 0);
    echo["seed"] = std::to_string(x.seed);

    x.market_source = c.get_string("market.source", "synthetic");
    if (x.market_source != "synthetic" && x.market_source != "csv")
        throw ConfigError(c.where("market.source") + ": expected synthetic or csv");
    echo["market.source"] = x.market_source;
    if (x.market_source == "csv") {
        if (!c.has("market.csv")) throw ConfigError("market.csv is required when market.source = csv");
        x.market_csv = c.get_string("market.csv", "");
        if (!std::filesystem::exists(x.market_csv))
            throw ConfigError(c.where("market.csv") + ": file not found: " + x.market_csv.string());
        echo["market.csv"] = x.market_csv.string();
    }
    x.forward_fill = c.get_bool("market.forward_fill", false);
    echo["market.forward_fill"] = x.forward_fill ? "true" : "false";
    x.market.n_assets = c.get_size("market.n_assets", 3);
    x.market.n_steps = c.get_size("market.n_steps", 2400);
    x.market.drift = c.get_double_list("market.drift", {0.002});
    x.market.volatility = c.get_double_list("market.vol", {0.03});
    x.market.regime_switch_prob = c.get_double("market.regime_switch", 0.02);
    x.market.seed = c.get_u64("market.seed", derive_seed({x.seed, kTagMarket}));
    if (x.market.n_assets == 0) throw ConfigError(c.where("market.n_assets") + ": must be >= 1");
    if (x.market.regime_switch_prob < 0.0 || x.market.regime_switch_prob > 1.0)
        throw ConfigError(c.where("market.regime_switch") + ": must lie in [0, 1]");
    for (double v : x.market.volatility)
        if (v < 0.0) throw ConfigError(c.where("market.vol") + ": volatility must be >= 0");
    for (const auto* key : {"market.drift", "market.vol"}) {
        const auto n = c.get_double_list(key, {0.0}).size();
        if (n != 1 && n != x.market.n_assets)
            throw ConfigError(c.where(key) + ": needs 1 or market.n_assets entries");
    }
    if (x.market_source == "synthetic") {
        echo["market.n_assets"] = std::to_string(x.market.n_assets);
        echo["market.n_steps"] = std::to_string(x.market.n_steps);
        echo["market.drift"] = join_numbers(x.market.drift);
        echo["market.vol"] = join_numbers(x.market.volatility);
        echo["market.regime_switch"] = format_double(x.market.regime_switch_prob);
        echo["market.seed"] = std::to_string(x.market.seed);
    }

    if (c.has("split.boundary") && c.has("split.train_fraction"))
        throw ConfigError(c.where("split.train_fraction") + ": conflicts with " + c.where("split.boundary"));
    if (c.has("split.boundary")) {
        x.split.boundary = c.get_size("split.boundary", 0);
        echo["split.boundary"] = std::to_string(*x.split.boundary);
    } else {
        x.split.train_fraction = c.get_double("split.train_fraction", 0.8);
        if (!(*x.split.train_fraction > 0.0 && *x.split.train_fraction < 1.0))
            throw ConfigError(c.where("split.train_fraction") + ": must lie in (0, 1)");
        echo["split.train_fraction"] = format_double(*x.split.train_fraction);
    }

    x.window = c.get_size("agent.window", 30);
    if (x.window < 2) throw ConfigError(c.where("agent.window") + ": must be >= 2");
    echo["agent.window"] = std::to_string(x.window);
    x.hidden = c.get_size_list("agent.hidden", {64});
    for (auto h : x.hidden)
        if (h == 0) throw ConfigError(c.where("agent.hidden") + ": layer sizes must be >= 1");
    echo["agent.hidden"] = join_numbers(x.hidden);
    x.train.learning_rate = c.get_double("agent.learning_rate", 1.0);
    x.train.epochs = c.get_size("agent.epochs", 60);
    x.train.batch_window = c.get_size("agent.batch_window", 64);
    x.train.batches_per_epoch = c.get_size("agent.batches_per_epoch", 8);
    x.train.seed = c.get_u64("agent.seed", derive_seed({x.seed, kTagAgent}));
    x.train.init_scale = c.get_double("agent.init_scale", 1.0);
    checked("agent.learning_rate / agent.batch_window", [&] { x.train.validate(); });
    echo["agent.learning_rate"] = format_double(x.train.learning_rate);
    echo["agent.epochs"] = std::to_string(x.train.epochs);
    echo["agent.batch_window"] = std::to_string(x.train.batch_window);
    echo["agent.batches_per_epoch"] = std::to_string(x.train.batches_per_epoch);
    echo["agent.seed"] = std::to_string(x.train.seed);
    echo["agent.init_scale"] = format_double(x.train.init_scale);

    const std::string source = c.get_string("agent.source", "none");
    if (source == "none") x.agent_source = AgentSource::none;
    else if (source == "train") x.agent_source = AgentSource::train;
    else if (source == "checkpoint") x.agent_source = AgentSource::checkpoint;
    else throw ConfigError(c.where("agent.source") + ": expected none, train or checkpoint");
    echo["agent.source"] = source;
    if (x.agent_source == AgentSource::checkpoint) {
        if (!c.has("agent.checkpoint"))
            throw ConfigError("agent.checkpoint is required when agent.source = checkpoint");
        x.agent_checkpoint = c.get_string("agent.checkpoint", "");
        if (!std::filesystem::exists(x.agent_checkpoint))
            throw ConfigError(c.where("agent.checkpoint") + ": file not found");
        echo["agent.checkpoint"] = x.agent_checkpoint.string();
    }
    if (c.has("agent.resume")) {
        x.agent_resume = c.get_string("agent.resume", "");
        if (!std::filesystem::exists(x.agent_resume))
            throw ConfigError(c.where("agent.resume") + ": file not found");
    }

    x.cost.c_buy = c.get_double("cost.buy", 0.0025);
    x.cost.c_sell = c.get_double("cost.sell", 0.0025);
    x.cost.max_iters = static_cast<int>(c.get_size("cost.max_iters", 100));
    x.cost.tol = c.get_double("cost.tol", 1e-10);
    x.cost.mode = checked("cost.mode", [&] { return parse_cost_mode(c.get_string("cost.mode", "fixed_point")); });
    checked("cost.*", [&] { x.cost.validate(); });
    echo["cost.buy"] = format_double(x.cost.c_buy);
    echo["cost.sell"] = format_double(x.cost.c_sell);
    echo["cost.max_iters"] = std::to_string(x.cost.max_iters);
    echo["cost.tol"] = format_double(x.cost.tol);
    echo["cost.mode"] = to_string(x.cost.mode);

    x.signal_mode = checked("signal.mode", [&] { return parse_signal_mode(c.get_string("signal.mode", "none")); });
    x.signal.accuracy = c.get_double("signal.accuracy", 1.0);
    x.signal.density = c.get_double("signal.density", 1.0);
    x.signal.seed = c.get_u64("signal.seed", derive_seed({x.seed, kTagSignal}));
    x.signal.lookback = c.get_size("signal.lookback", 1);
    checked("signal.accuracy / signal.density / signal.lookback", [&] { x.signal.validate(); });
    x.predictor.lags = c.get_size("signal.lags", 5);
    x.predictor.epochs = c.get_size("signal.predictor_epochs", 200);
    x.predictor.learning_rate = c.get_double("signal.predictor_lr", 0.5);
    x.predictor.seed = derive_seed({x.signal.seed, kTagInit});
    if (x.predictor.lags == 0) throw ConfigError(c.where("signal.lags") + ": must be >= 1");
    echo["signal.mode"] = to_string(x.signal_mode);
    echo["signal.accuracy"] = format_double(x.signal.accuracy);
    echo["signal.density"] = format_double(x.signal.density);
    echo["signal.seed"] = std::to_string(x.signal.seed);
    echo["signal.lookback"] = std::to_string(x.signal.lookback);
    echo["signal.lags"] = std::to_string(x.predictor.lags);
    echo["signal.predictor_epochs"] = std::to_string(x.predictor.epochs);
    echo["signal.predictor_lr"] = format_double(x.predictor.learning_rate);

    const auto names = c.get_string_list("baseline.name", {});
    const double eps = c.get_double("baseline.epsilon", 0.0);
    const std::size_t bwin = c.get_size("baseline.window", 5);
    const auto target = c.get_double_list("baseline.target_weights", {});
    std::set<std::string> seen;
    for (const auto& name : names) {
        BaselineConfig b;
        b.kind = checked("baseline.name", [&] { return parse_baseline(name); });
        if (!seen.insert(name).second) throw ConfigError(c.where("baseline.name") + ": duplicate '" + name + "'");
        b.epsilon = eps;
        b.window = bwin;
        if (b.kind == BaselineKind::crp) b.target = target;
        if ((b.kind == BaselineKind::olmar || b.kind == BaselineKind::wmamr) && bwin + 1 > x.window)
            throw ConfigError(c.where("baseline.window") + ": must be smaller than agent.window");
        if (bwin == 0) throw ConfigError(c.where("baseline.window") + ": must be >= 1");
        x.baselines.push_back(std::move(b));
    }
    if (!target.empty() && target.size() != x.market.n_assets + 1 && x.market_source == "synthetic")
        throw ConfigError(c.where("baseline.target_weights") + ": needs market.n_assets + 1 entries");
    echo["baseline.name"] = join(names);
    echo["baseline.epsilon"] = format_double(eps);
    echo["baseline.window"] = std::to_string(bwin);
    echo["baseline.target_weights"] = join_numbers(target);

    x.sweep_accuracies = c.get_double_list("sweep.accuracies", {0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    x.sweep_densities = c.get_double_list("sweep.densities", {1.0});
    const auto seeds = c.get_size_list("sweep.seeds", {1, 2, 3, 4, 5});
    x.sweep_seeds.assign(seeds.begin(), seeds.end());
    if (x.sweep_accuracies.empty()) throw ConfigError(c.where("sweep.accuracies") + ": grid is empty");
    if (x.sweep_densities.empty()) throw ConfigError(c.where("sweep.densities") + ": grid is empty");
    if (x.sweep_seeds.empty()) throw ConfigError(c.where("sweep.seeds") + ": no seeds");
    for (double a : x.sweep_accuracies)
        if (a < 0.0 || a > 1.0) throw ConfigError(c.where("sweep.accuracies") + ": values must lie in [0, 1]");
    for (double d : x.sweep_densities)
        if (d < 0.0 || d > 1.0) throw ConfigError(c.where("sweep.densities") + ": values must lie in [0, 1]");
    if (std::set<std::uint64_t>(x.sweep_seeds.begin(), x.sweep_seeds.end()).size() != x.sweep_seeds.size())
        throw ConfigError(c.where("sweep.seeds") + ": seeds must be distinct");
    echo["sweep.accuracies"] = join_numbers(x.sweep_accuracies);
    echo["sweep.densities"] = join_numbers(x.sweep_densities);
    echo["sweep.seeds"] = join_numbers(x.sweep_seeds);

    x.r_free = c.get_double("eval.rfree", kDefaultRiskFree);
    x.calendar = checked("eval.calendar", [&] { return parse_calendar(c.get_string("eval.calendar", "crypto")); });
    x.steps_per_day = c.get_size("eval.steps_per_day", 1);
    if (x.steps_per_day == 0) throw ConfigError(c.where("eval.steps_per_day") + ": must be >= 1");
    x.horizons = c.get_string_list("eval.horizons", {});
    for (const auto& h : x.horizons)
        checked("eval.horizons", [&] { return horizon_from_label(h, x.calendar, x.steps_per_day); });
    echo["eval.rfree"] = format_double(x.r_free);
    echo["eval.calendar"] = x.calendar == Calendar::crypto ? "crypto" : "equity";
    echo["eval.steps_per_day"] = std::to_string(x.steps_per_day);
    echo["eval.horizons"] = join(x.horizons);
    return x;
}

std::string render_echo(const std::map<std::string, std::string>& echo) {
    std::ostringstream out;
    out << "# fully resolved configuration\n";
    for (const auto& [k, v] : echo) out << k << " = " << v << '\n';
    return out.str();
}

std::pair<PriceSeries, PriceSeries> load_market(const ExperimentConfig& cfg) {
    PriceSeries full;
    if (cfg.market_source == "csv") {
        CsvSchema schema;
        schema.forward_fill = cfg.forward_fill;
        full = load_csv(cfg.market_csv, schema);
    } else {
        full = generate_synthetic(cfg.market);
    }
    return chronological_split(full, cfg.split, cfg.window + 2);
}

std::optional<SignalSeries> make_signals(SignalMode mode, const SignalConfig& signal_cfg,
                                         const PriceSeries& segment, const PredictorParams* predictor,
                                         std::uint64_t tag) {
    std::optional<SignalSeries> out;
    switch (mode) {
        case SignalMode::none:
            return std::nullopt;
        case SignalMode::oracle: {
            SignalConfig seg_cfg = signal_cfg;
            seg_cfg.seed = derive_seed({signal_cfg.seed, tag});
            out = oracle_labels(true_movements(segment), seg_cfg);
            break;
        }
        case SignalMode::internal:
            if (!predictor) throw std::invalid_argument("internal signal mode needs a fitted predictor");
            out = predict_series(*predictor, segment);
            break;
    }
    return apply_lookback(*out, signal_cfg.lookback);
}

TrainedAgent train_agent(const PriceSeries& train_prices, const SignalSeries* signals,
                         const ExperimentConfig& cfg, std::uint64_t init_seed, std::uint64_t train_seed) {
    const std::size_t signal_dim = signals ? train_prices.n_assets : 0;
    const auto shape = NetworkShape::for_market(train_prices.n_assets, cfg.window, signal_dim, cfg.hidden);
    const Episode episode = build_episode(train_prices, signals, cfg.window);
    TrainConfig tc = cfg.train;
    tc.seed = train_seed;
    auto res = train(init_params(shape, init_seed, tc.init_scale), episode, cfg.cost, tc);
    return {std::move(res.params), std::move(res.learning_curve), res.epochs_completed};
}

std::string result_to_json(const BacktestResult& r) {
    nlohmann::ordered_json j;
    j["final_pv"] = r.final_pv;
    j["first_time_index"] = r.first_time_index;
    j["rewards"] = r.rewards;
    j["pv"] = r.pv;
    j["betas"] = r.betas;
    j["weights"] = r.weights;
    j["actions"] = r.actions;
    j["relatives"] = r.relatives;
    return j.dump() + "\n";
}

BacktestResult result_from_json(const std::string& text) {
    BacktestResult r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.final_pv = j.at("final_pv").get<double>();
        r.first_time_index = j.value("first_time_index", std::size_t{0});
        r.rewards = j.at("rewards").get<std::vector<double>>();
        r.pv = j.at("pv").get<std::vector<double>>();
        r.betas = j.value("betas", std::vector<double>{});
        r.weights = j.value("weights", std::vector<std::vector<double>>{});
        r.actions = j.value("actions", std::vector<std::vector<double>>{});
        r.relatives = j.value("relatives", std::vector<std::vector<double>>{});
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed backtest result: ") + e.what());
    }
    return r;
}

namespace {

std::vector<Horizon> resolve_horizons(const ExperimentConfig& cfg, std::size_t shortest) {
    std::vector<Horizon> out;
    if (!cfg.horizons.empty()) {
        for (const auto& label : cfg.horizons) out.push_back(horizon_from_label(label, cfg.calendar, cfg.steps_per_day));
        return out;
    }
    for (const auto& label : kStandardHorizons) {
        auto h = horizon_from_label(label, cfg.calendar, cfg.steps_per_day);
        if (h.steps >= 2 && h.steps <= shortest) out.push_back(h);
    }
    if (out.empty()) out.push_back({"all", shortest});
    return out;
}

std::string pv_csv(const BacktestResult& r, const PriceSeries& prices) {
    std::ostringstream out;
    out << "step,timestamp,pv\n";
    for (std::size_t k = 0; k < r.pv.size(); ++k)
        out << k + 1 << ',' << prices.timestamps.at(r.first_time_index + k + 1) << ',' << format_double(r.pv[k])
            << '\n';
    return out.str();
}

void write_report(const std::map<std::string, BacktestResult>& results, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir) {
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const auto& [name, r] : results) shortest = std::min(shortest, r.steps());
    const auto report = horizon_table(results, resolve_horizons(cfg, shortest), cfg.steps_per_day, cfg.r_free,
                                      cfg.calendar);
    write_metrics_csv(report, out_dir / "metrics.csv");
    write_metrics_json(report, out_dir / "metrics.json");
    std::cout << "strategy          final_pv";
    for (const auto& h : report.horizons) std::cout << "  sr_" << h.label;
    std::cout << '\n';
    for (const auto& name : report.strategies) {
        const auto& row = report.rows.at(name);
        std::cout << name << std::string(name.size() < 18 ? 18 - name.size() : 1, ' ') << row.final_pv;
        for (const auto& h : report.horizons) std::cout << "  " << row.sharpe.at(h.label);
        std::cout << '\n';
    }
}

std::string learning_curve_csv(const std::vector<double>& curve) {
    std::ostringstream out;
    out << "epoch,J_T\n";
    for (std::size_t e = 0; e < curve.size(); ++e) out << e + 1 << ',' << format_double(curve[e]) << '\n';
    return out.str();
}

std::map<std::string, std::string> model_echo(const ExperimentConfig& cfg) {
    auto echo = cfg.echo;
    echo.erase("agent.resume");
    return echo;
}

}  // namespace

void cmd_backtest(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.baselines.empty() && cfg.agent_source == AgentSource::none)
        throw ConfigError("nothing to backtest: set baseline.name and/or agent.source");
    std::filesystem::create_directories(out_dir);
    const auto [train_prices, test_prices] = load_market(cfg);

    std::map<std::string, BacktestResult> results;
    for (const auto& b : cfg.baselines)
        results[to_string(b.kind)] = run_backtest(test_prices, make_baseline_policy(b, test_prices.n_assets),
                                                  nullptr, cfg.cost, cfg.window);

    if (cfg.agent_source != AgentSource::none) {
        std::optional<PredictorParams> predictor;
        if (cfg.signal_mode == SignalMode::internal) predictor = fit_internal_predictor(train_prices, cfg.predictor);
        const PredictorParams* pred = predictor ? &*predictor : nullptr;
        const auto test_signals = make_signals(cfg.signal_mode, cfg.signal, test_prices, pred, kTagTest);
        PolicyParams params;
        if (cfg.agent_source == AgentSource::checkpoint) {
            params = load_checkpoint(cfg.agent_checkpoint).params;
        } else {
            const auto train_signals = make_signals(cfg.signal_mode, cfg.signal, train_prices, pred, kTagTrain);
            params = train_agent(train_prices, train_signals ? &*train_signals : nullptr, cfg,
                                 derive_seed({cfg.train.seed, kTagInit}), cfg.train.seed)
                         .params;
        }
        const auto expected = NetworkShape::for_market(test_prices.n_assets, cfg.window,
                                                       test_signals ? test_prices.n_assets : 0, cfg.hidden);
        if (!(params.shape == expected))
            throw std::runtime_error("agent shape does not match market, window and signal mode");
        const std::string name = cfg.signal_mode == SignalMode::none ? "no_signal_agent" : "sarl";
        results[name] = run_backtest(test_prices, make_policy(params), test_signals ? &*test_signals : nullptr,
                                     cfg.cost, cfg.window);
        if (test_signals) write_signal_csv(*test_signals, out_dir / "signals_test.csv");
    }

    for (const auto& [name, r] : results) {
        write_file_atomic(out_dir / ("result_" + name + ".json"), result_to_json(r));
        write_file_atomic(out_dir / ("pv_" + name + ".csv"), pv_csv(r, test_prices));
    }
    write_report(results, cfg, out_dir);
    write_file_atomic(out_dir / "config.resolved", render_echo(cfg.echo));
}

void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto [train_prices, test_prices] = load_market(cfg);
    std::optional<PredictorParams> predictor;
    if (cfg.signal_mode == SignalMode::internal) {
        predictor = fit_internal_predictor(train_prices, cfg.predictor);
        std::cout << "internal predictor train accuracy:";
        for (double a : predictor->train_accuracy) std::cout << ' ' << a;
        std::cout << (predictor->warning ? "  (warning: single-class asset, constant predictor)" : "") << '\n';
    }
    const auto signals = make_signals(cfg.signal_mode, cfg.signal, train_prices,
                                      predictor ? &*predictor : nullptr, kTagTrain);
    const SignalSeries* sig = signals ? &*signals : nullptr;
    const auto shape = NetworkShape::for_market(train_prices.n_assets, cfg.window, sig ? train_prices.n_assets : 0,
                                                cfg.hidden);

    Checkpoint ckpt;
    PolicyParams start = init_params(shape, derive_seed({cfg.train.seed, kTagInit}), cfg.train.init_scale);
    std::size_t start_epoch = 0;
    if (!cfg.agent_resume.empty()) {
        Checkpoint prev = load_checkpoint(cfg.agent_resume);
        if (!(prev.params.shape == shape))
            throw std::runtime_error("resume checkpoint shape does not match the configured agent");
        for (const auto* key : {"agent.window", "agent.hidden", "signal.mode", "agent.seed"})
            if (prev.config.count(key) && prev.config.at(key) != cfg.echo.at(key))
                throw ConfigError(std::string("resume checkpoint was trained with a different ") + key);
        start = std::move(prev.params);
        start_epoch = prev.epochs_completed;
        ckpt.learning_curve = std::move(prev.learning_curve);
    }
    const Episode episode = build_episode(train_prices, sig, cfg.window);
    auto res = train(std::move(start), episode, cfg.cost, cfg.train, start_epoch);
    ckpt.params = std::move(res.params);
    ckpt.epochs_completed = res.epochs_completed;
    ckpt.learning_curve.insert(ckpt.learning_curve.end(), res.learning_curve.begin(), res.learning_curve.end());
    ckpt.config = model_echo(cfg);

    save_checkpoint(ckpt, out_dir / "checkpoint.json");
    write_file_atomic(out_dir / "learning_curve.csv", learning_curve_csv(ckpt.learning_curve));
    write_file_atomic(out_dir / "config.resolved", render_echo(cfg.echo));
    if (!ckpt.learning_curve.empty())
        std::cout << "epochs " << ckpt.epochs_completed << "  final J_T " << ckpt.learning_curve.back() << '\n';
}

void cmd_metrics(const std::vector<std::filesystem::path>& paths, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir) {
    if (paths.empty()) throw ConfigError("metrics: no backtest result files given");
    std::map<std::string, BacktestResult> results;
    for (const auto& p : paths) {
        std::string name = p.stem().string();
        if (name.rfind("result_", 0) == 0) name = name.substr(7);
        results[name] = result_from_json(read_file(p));
    }
    std::filesystem::create_directories(out_dir);
    write_report(results, cfg, out_dir);
}

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs) {
    struct SeedMarket {
        PriceSeries train, test;
        SignalSeries truth_train, truth_test;
        std::string error;
    };
    std::vector<SeedMarket> markets(cfg.sweep_seeds.size());
    std::optional<PriceSeries> csv_market;
    for (std::size_t s = 0; s < cfg.sweep_seeds.size(); ++s) {
        try {
            ExperimentConfig seeded = cfg;
            seeded.market.seed = derive_seed({cfg.seed, kTagMarket, cfg.sweep_seeds[s]});
            auto [train_prices, test_prices] = load_market(seeded);
            markets[s].truth_train = true_movements(train_prices);
            markets[s].truth_test = true_movements(test_prices);
            markets[s].train = std::move(train_prices);
            markets[s].test = std::move(test_prices);
        } catch (const std::exception& e) {
            markets[s].error = e.what();
        }
    }

    struct Task {
        bool control;
        std::size_t acc_idx, dens_idx, seed_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t a = 0; a < cfg.sweep_accuracies.size(); ++a)
        for (std::size_t d = 0; d < cfg.sweep_densities.size(); ++d)
            for (std::size_t s = 0; s < cfg.sweep_seeds.size(); ++s) tasks.push_back({false, a, d, s});
    for (std::size_t s = 0; s < cfg.sweep_seeds.size(); ++s) tasks.push_back({true, 0, 0, s});

    std::vector<std::optional<SweepRow>> rows(tasks.size());
    std::vector<std::string> errors(tasks.size());

    auto run_task = [&](std::size_t k) {
        const Task& task = tasks[k];
        const SeedMarket& m = markets[task.seed_idx];
        const std::uint64_t seed_value = cfg.sweep_seeds[task.seed_idx];
        const std::uint64_t cell = task.control
                                       ? derive_seed({cfg.seed, kTagControl, seed_value})
                                       : derive_seed({cfg.seed, task.acc_idx, task.dens_idx, seed_value});
        SweepRow row;
        row.control = task.control;
        row.seed = seed_value;
        if (!task.control) {
            row.accuracy = cfg.sweep_accuracies[task.acc_idx];
            row.density = cfg.sweep_densities[task.dens_idx];
        }
        try {
            if (!m.error.empty()) throw std::runtime_error("market: " + m.error);
            std::optional<SignalSeries> train_sig, test_sig;
            if (!task.control) {
                SignalConfig sc = cfg.signal;
                sc.accuracy = row.accuracy;
                sc.density = row.density;
                sc.seed = derive_seed({cell, kTagSignal, kTagTrain});
                train_sig = apply_lookback(oracle_labels(m.truth_train, sc), sc.lookback);
                sc.seed = derive_seed({cell, kTagSignal, kTagTest});
                test_sig = apply_lookback(oracle_labels(m.truth_test, sc), sc.lookback);
            }
            const auto agent = train_agent(m.train, train_sig ? &*train_sig : nullptr, cfg,
                                           derive_seed({cell, kTagInit}), derive_seed({cell, kTagAgent}));
            const auto res = run_backtest(m.test, make_policy(agent.params), test_sig ? &*test_sig : nullptr,
                                          cfg.cost, cfg.window);
            row.final_pv = portfolio_value(res);
            try {
                row.sharpe = sharpe_ratio(res, res.steps(), cfg.r_free);
            } catch (const UndefinedSharpe&) {
                row.sharpe = std::numeric_limits<double>::quiet_NaN();
            }
            rows[k] = row;
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (workers == 1) {
        for (std::size_t k = 0; k < tasks.size(); ++k) run_task(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < tasks.size(); k = next++) run_task(k);
            });
        for (auto& t : pool) t.join();
    }

    SweepResult out;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (rows[k]) {
            out.rows.push_back(*rows[k]);
            continue;
        }
        const Task& task = tasks[k];
        std::ostringstream cell;
        if (task.control) cell << "control seed=" << cfg.sweep_seeds[task.seed_idx];
        else
            cell << "accuracy=" << format_double(cfg.sweep_accuracies[task.acc_idx])
                 << " density=" << format_double(cfg.sweep_densities[task.dens_idx])
                 << " seed=" << cfg.sweep_seeds[task.seed_idx];
        out.failures.push_back({cell.str(), errors[k]});
    }
    return out;
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "accuracy,density,seed,final_pv,sharpe\n";
    for (const auto& r : result.rows) {
        if (r.control) out << "none,none,";
        else out << format_double(r.accuracy) << ',' << format_double(r.density) << ',';
        out << r.seed << ',' << format_double(r.final_pv) << ',' << format_double(r.sharpe) << '\n';
    }
    return out.str();
}

void cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::size_t jobs) {
    std::filesystem::create_directories(out_dir);
    const auto result = run_sweep(cfg, jobs);
    write_file_atomic(out_dir / "sweep.csv", sweep_csv(result));
    std::ostringstream failures;
    failures << "cell,message\n";
    for (const auto& f : result.failures) failures << '"' << f.cell << "\",\"" << f.message << "\"\n";
    write_file_atomic(out_dir / "sweep_failures.csv", failures.str());
    write_file_atomic(out_dir / "config.resolved", render_echo(cfg.echo));
    std::cout << "sweep: " << result.rows.size() << " rows written, " << result.failures.size()
              << " failed cells\n";
    for (const auto& f : result.failures) std::cout << "  failed " << f.cell << ": " << f.message << '\n';
}

}  // namespace sarl
