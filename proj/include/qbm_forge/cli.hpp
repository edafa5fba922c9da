#ifndef QBM_FORGE_CLI_HPP
#define QBM_FORGE_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bqrbm.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "logging.hpp"
#include "metrics.hpp"
#include "rbm.hpp"
#include "report.hpp"
#include "sampler.hpp"
#include "schedule.hpp"

#ifndef QBM_FORGE_ASSET_DIR
#define QBM_FORGE_ASSET_DIR "assets"
#endif

namespace qbm_forge::cli {

using Json = nlohmann::json;

// Exit codes: 0 success, 2 validation, 3 capacity, 4 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitCapacity = 3;
inline constexpr int kExitIo = 4;

namespace detail {

inline Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw IoError("config file " + path + " is not valid JSON: " + e.what());
    }
}

inline void check_keys(const Json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ValidationError("unknown config key '" + item.key() + "' in " + where);
}

template <typename T>
inline T get_as(const Json& obj, const std::string& key) {
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError("config key '" + key + "' has the wrong type");
    }
}

template <typename T>
inline T jval(const Json& obj, const std::string& key, T def) {
    if (!obj.contains(key)) return def;
    return get_as<T>(obj, key);
}

template <typename T>
inline T jreq(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError("config key '" + key + "' is required in " + where);
    return get_as<T>(obj, key);
}

inline std::string join_out(const std::string& out_dir, const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path p = fs::path(out_dir) / name;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    return p.string();
}

// Grid config: either an explicit array or {"from": a, "to": b, "step": d}.
inline Eigen::VectorXd parse_grid(const Json& spec, const std::string& where) {
    std::vector<double> vals;
    if (spec.is_array()) {
        for (const auto& v : spec) {
            if (!v.is_number()) throw ValidationError(where + " entries must be numbers");
            vals.push_back(v.get<double>());
        }
    } else if (spec.is_object()) {
        check_keys(spec, {"from", "to", "step"}, where);
        const double from = jreq<double>(spec, "from", where);
        const double to = jreq<double>(spec, "to", where);
        const double step = jreq<double>(spec, "step", where);
        if (!(step > 0.0) || to < from) throw ValidationError("bad range in " + where);
        for (double x = from; x <= to + 1e-9 * step; x += step) vals.push_back(std::min(x, to));
    } else {
        throw ValidationError(where + " must be an array or a from/to/step object");
    }
    if (vals.empty()) throw ValidationError(where + " is empty");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

inline std::string model_type(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    qbm_forge::detail::expect_exact(in, "qbm_forge_model v1");
    return qbm_forge::detail::expect_keyword(in, "type");
}

// --- config blocks ----------------------------------------------------------

inline TrainConfig parse_rbm_train(const Json& obj, TrainConfig base = {}) {
    check_keys(obj,
               {"minibatch", "epochs", "eta0", "t_decay", "T_decay", "cd_steps", "seed",
                "kl_interval", "kl_samples", "kl_thermalization", "kl_spacing", "kl_bins",
                "kl_epsilon"},
               "train config");
    TrainConfig c = base;
    c.minibatch = jval(obj, "minibatch", c.minibatch);
    c.epochs = jval(obj, "epochs", c.epochs);
    c.eta0 = jval(obj, "eta0", c.eta0);
    c.t_decay = jval(obj, "t_decay", c.t_decay);
    c.T_decay = jval(obj, "T_decay", c.T_decay);
    c.cd_steps = jval(obj, "cd_steps", c.cd_steps);
    c.seed = jval<std::uint64_t>(obj, "seed", c.seed);
    c.kl_interval = jval(obj, "kl_interval", c.kl_interval);
    c.kl_samples = jval(obj, "kl_samples", c.kl_samples);
    c.kl_thermalization = jval(obj, "kl_thermalization", c.kl_thermalization);
    c.kl_spacing = jval(obj, "kl_spacing", c.kl_spacing);
    c.kl_bins = jval(obj, "kl_bins", c.kl_bins);
    c.kl_epsilon = jval(obj, "kl_epsilon", c.kl_epsilon);
    return c;
}

inline BqrbmTrainConfig parse_bqrbm_train(const Json& obj, BqrbmTrainConfig base = {}) {
    check_keys(obj,
               {"minibatch", "epochs", "eta0", "t_decay", "T_decay", "eta_beta0", "beta_t_decay",
                "beta_T_decay", "beta_hat_init", "per_minibatch_beta", "negative_samples", "seed",
                "kl_interval", "kl_samples", "kl_bins", "kl_epsilon", "kl_exact"},
               "train config");
    BqrbmTrainConfig c = base;
    c.minibatch = jval(obj, "minibatch", c.minibatch);
    c.epochs = jval(obj, "epochs", c.epochs);
    c.eta0 = jval(obj, "eta0", c.eta0);
    c.t_decay = jval(obj, "t_decay", c.t_decay);
    c.T_decay = jval(obj, "T_decay", c.T_decay);
    c.eta_beta0 = jval(obj, "eta_beta0", c.eta_beta0);
    c.beta_t_decay = jval(obj, "beta_t_decay", c.beta_t_decay);
    c.beta_T_decay = jval(obj, "beta_T_decay", c.beta_T_decay);
    c.beta_hat_init = jval(obj, "beta_hat_init", c.beta_hat_init);
    c.per_minibatch_beta = jval(obj, "per_minibatch_beta", c.per_minibatch_beta);
    c.negative_samples = jval(obj, "negative_samples", c.negative_samples);
    c.seed = jval<std::uint64_t>(obj, "seed", c.seed);
    c.kl_interval = jval(obj, "kl_interval", c.kl_interval);
    c.kl_samples = jval(obj, "kl_samples", c.kl_samples);
    c.kl_bins = jval(obj, "kl_bins", c.kl_bins);
    c.kl_epsilon = jval(obj, "kl_epsilon", c.kl_epsilon);
    c.kl_exact = jval(obj, "kl_exact", c.kl_exact);
    return c;
}

struct BackendConfig {
    std::string curve_path;
    ExactAnnealerBackend backend;
};

inline BackendConfig parse_backend(const Json& obj) {
    check_keys(obj,
               {"curve", "s_star", "effective_t_mk", "s_quench", "t_relative_us", "delta_pause_us",
                "alpha_quench_per_us", "gauges", "random_gauges", "noise_sigma_h", "noise_sigma_j"},
               "backend config");
    const std::string curve_path = jreq<std::string>(obj, "curve", "backend config");
    const ScheduleCurve curve = load_schedule_curve(curve_path);
    const double s_star = jval(obj, "s_star", 1.0);
    PauseQuenchSpec spec;
    spec.s_quench = jval(obj, "s_quench", s_star);
    spec.t_relative_us = jval(obj, "t_relative_us", spec.t_relative_us);
    spec.delta_pause_us = jval(obj, "delta_pause_us", spec.delta_pause_us);
    spec.alpha_quench_per_us = jval(obj, "alpha_quench_per_us", spec.alpha_quench_per_us);
    FacadeOptions opts;
    opts.random_gauges = jval(obj, "random_gauges", opts.random_gauges);
    opts.noise_sigma_h = jval(obj, "noise_sigma_h", opts.noise_sigma_h);
    opts.noise_sigma_j = jval(obj, "noise_sigma_j", opts.noise_sigma_j);
    const double t_mk = jreq<double>(obj, "effective_t_mk", "backend config");
    const int gauges = jval(obj, "gauges", 1);
    return {curve_path, ExactAnnealerBackend(curve, spec, t_mk, s_star, gauges, opts)};
}

// --- subcommands ------------------------------------------------------------

inline int cmd_preprocess(const Json& cfg, const std::string& out_dir) {
    check_keys(cfg,
               {"pairs", "holidays", "drop_zero_volume", "outlier_k", "transform", "n_bits",
                "indicators", "indicator_window", "dataset_out"},
               "preprocess config");
    if (!cfg.contains("pairs") || !cfg.at("pairs").is_array() || cfg.at("pairs").empty())
        throw ValidationError("preprocess config needs a non-empty 'pairs' array");
    std::vector<OhlcSeries> series;
    for (const auto& p : cfg.at("pairs")) {
        check_keys(p, {"label", "path"}, "pairs entry");
        series.push_back(load_ohlc_csv(jreq<std::string>(p, "path", "pairs entry"),
                                       jreq<std::string>(p, "label", "pairs entry")));
    }
    FilterRules rules;
    rules.drop_zero_volume = jval(cfg, "drop_zero_volume", true);
    rules.outlier_k = jval(cfg, "outlier_k", 10.0);
    if (cfg.contains("holidays"))
        rules.holidays = load_holiday_list(get_as<std::string>(cfg, "holidays"));
    const JoinedTable joined = join_on_dates(series);
    const JoinedTable filtered = filter_rows(joined, rules);
    const Eigen::MatrixXd returns = log_returns(filtered);

    Eigen::MatrixXd values = returns;
    std::vector<TransformStats> transform;
    if (cfg.contains("transform")) {
        const Json& tr = cfg.at("transform");
        check_keys(tr, {"alpha", "tau"}, "transform config");
        const double alpha = jreq<double>(tr, "alpha", "transform config");
        const double tau = jreq<double>(tr, "tau", "transform config");
        for (Eigen::Index c = 0; c < values.rows(); ++c) {
            TransformStats stats;
            values.row(c) = outlier_power_transform(returns.row(c).transpose(), alpha, tau, stats)
                                .transpose();
            transform.push_back(stats);
        }
    }
    const int n_bits = jreq<int>(cfg, "n_bits", "preprocess config");
    std::vector<std::string> labels;
    for (const auto& s : filtered.pairs) labels.push_back(s.label);
    const Discretized disc = discretize(values, n_bits, labels);
    BitDataset dataset;
    dataset.codec = disc.codec;
    dataset.transform = transform;
    Eigen::MatrixXi bits = encode_bits(disc.values, disc.codec);
    if (jval(cfg, "indicators", false)) {
        const int window = jval(cfg, "indicator_window", 63);
        Eigen::MatrixXi ind(returns.rows(), returns.cols());
        for (Eigen::Index c = 0; c < returns.rows(); ++c) {
            ind.row(c) = volatility_indicator(returns.row(c).transpose(), window).transpose();
            dataset.indicator_labels.push_back("vol_" + labels[c]);
        }
        bits.conservativeResize(bits.rows() + ind.rows(), Eigen::NoChange);
        bits.bottomRows(ind.rows()) = ind;
    }
    dataset.bits = bits;
    validate_dataset(dataset);
    const std::string path = join_out(out_dir, jval<std::string>(cfg, "dataset_out", "dataset.txt"));
    save_dataset(path, dataset);

    std::cout << "rows kept " << filtered.dates.size() << " of " << joined.dates.size() << "\n";
    std::cout << "channel        mean           sd             skew       ex_kurt\n";
    for (Eigen::Index c = 0; c < returns.rows(); ++c) {
        const ChannelSummary s = channel_summary(returns.row(c).transpose());
        std::printf("%-12s %14.8f %14.8f %9.4f %9.4f\n", labels[c].c_str(), s.mean, s.sd, s.skew,
                    s.excess_kurtosis);
    }
    std::cout << "dataset " << path << "\n";
    return kExitOk;
}

inline int cmd_train(const Json& cfg, const std::string& out_dir,
                     std::optional<std::uint64_t> seed_override) {
    check_keys(cfg,
               {"model", "dataset", "n_hidden", "resume", "config", "backend", "model_out",
                "history_out"},
               "train config");
    const std::string kind = jreq<std::string>(cfg, "model", "train config");
    const BitDataset dataset = load_dataset(jreq<std::string>(cfg, "dataset", "train config"));
    const Json sub = cfg.contains("config") ? cfg.at("config") : Json::object();
    const std::string model_out = join_out(out_dir, jval<std::string>(cfg, "model_out", "model.txt"));
    const std::string history_out =
        join_out(out_dir, jval<std::string>(cfg, "history_out", "history.csv"));

    if (kind == "rbm") {
        TrainedRbm model;
        if (cfg.contains("resume")) {
            model = load_rbm(get_as<std::string>(cfg, "resume"));
            model.config = parse_rbm_train(sub, model.config);
            if (seed_override) model.config.seed = *seed_override;
            continue_training(model, dataset, model.config.epochs);
        } else {
            TrainConfig tc = parse_rbm_train(sub);
            if (seed_override) tc.seed = *seed_override;
            model = train_rbm(dataset, jreq<int>(cfg, "n_hidden", "train config"), tc);
        }
        save_rbm(model_out, model);
        save_history(history_out, model.history);
        std::cout << "trained rbm to epoch " << model.epochs_trained << "\n";
    } else if (kind == "bqrbm") {
        if (!cfg.contains("backend"))
            throw ValidationError("bqrbm training needs a 'backend' config block");
        BackendConfig bk = parse_backend(cfg.at("backend"));
        TrainedBqrbm model;
        if (cfg.contains("resume")) {
            model = load_bqrbm(get_as<std::string>(cfg, "resume"));
            model.config = parse_bqrbm_train(sub, model.config);
            if (seed_override) model.config.seed = *seed_override;
            continue_training(model, dataset, bk.backend, model.config.epochs);
        } else {
            BqrbmTrainConfig tc = parse_bqrbm_train(sub);
            if (seed_override) tc.seed = *seed_override;
            model = train_bqrbm(dataset, bk.backend, jreq<int>(cfg, "n_hidden", "train config"), tc);
            model.curve_ref = bk.curve_path;
        }
        save_bqrbm(model_out, model);
        save_history(history_out, model.history);
        std::cout << "trained bqrbm to epoch " << model.epochs_trained << ", beta_hat "
                  << qbm_forge::detail::fmt(model.params.beta_hat) << " (T_hat "
                  << qbm_forge::detail::fmt(beta_to_temperature_mk(model.params.beta_hat))
                  << " mK)\n";
    } else {
        throw ValidationError("train config key 'model' must be 'rbm' or 'bqrbm'");
    }
    std::cout << "model " << model_out << "\nhistory " << history_out << "\n";
    return kExitOk;
}

inline int cmd_sample(const Json& cfg, const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override) {
    check_keys(cfg,
               {"model", "n_samples", "sets", "seed", "out_prefix", "format", "thermalization",
                "spacing", "clamp", "backend"},
               "sample config");
    const std::string model_path = jreq<std::string>(cfg, "model", "sample config");
    const int n_samples = jreq<int>(cfg, "n_samples", "sample config");
    const int n_sets = jval(cfg, "sets", 1);
    if (n_sets < 1) throw ValidationError("sets must be >= 1");
    const std::uint64_t seed = seed_override.value_or(jval<std::uint64_t>(cfg, "seed", 0));
    const std::string prefix = jval<std::string>(cfg, "out_prefix", "samples");
    const std::string format = jval<std::string>(cfg, "format", "bits");
    if (format != "bits" && format != "sets")
        throw ValidationError("sample format must be 'bits' or 'sets'");
    const std::string kind = model_type(model_path);
    std::vector<std::string> written;

    if (kind == "rbm") {
        if (format != "bits") throw ValidationError("rbm sampling only supports the bits format");
        const TrainedRbm model = load_rbm(model_path);
        std::optional<Clamp> clamp;
        if (cfg.contains("clamp")) {
            const Json& cl = cfg.at("clamp");
            check_keys(cl, {"indices", "bits"}, "clamp config");
            Clamp c;
            for (const auto& v : jreq<std::vector<int>>(cl, "indices", "clamp config"))
                c.indices.push_back(v);
            for (const auto& v : jreq<std::vector<int>>(cl, "bits", "clamp config"))
                c.bits.push_back(v);
            clamp = c;
        }
        const int thermalization = jval(cfg, "thermalization", 10000);
        const int spacing = jval(cfg, "spacing", 10000);
        for (int g = 0; g < n_sets; ++g) {
            Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(g));
            const Eigen::MatrixXi bits =
                sample_rbm(model.params, n_samples, thermalization, spacing, rng, clamp);
            const std::string path =
                join_out(out_dir, prefix + "_" + std::to_string(g) + ".txt");
            save_bit_matrix(path, bits);
            written.push_back(path);
        }
    } else if (kind == "bqrbm") {
        if (!cfg.contains("backend"))
            throw ValidationError("bqrbm sampling needs a 'backend' config block");
        BackendConfig bk = parse_backend(cfg.at("backend"));
        const TrainedBqrbm model = load_bqrbm(model_path);
        for (int g = 0; g < n_sets; ++g) {
            const std::uint64_t set_seed = Rng::stream(seed, static_cast<std::uint64_t>(g)).raw();
            if (format == "bits") {
                const Eigen::MatrixXi bits =
                    sample_bqrbm(model.params, bk.backend, n_samples, set_seed);
                const std::string path =
                    join_out(out_dir, prefix + "_" + std::to_string(g) + ".txt");
                save_bit_matrix(path, bits);
                written.push_back(path);
            } else {
                const IsingProblem problem =
                    qbm_to_ising(model.params, bk.backend.operating_point());
                const std::vector<SampleSet> sets = bk.backend.sample(problem, n_samples, set_seed);
                for (std::size_t i = 0; i < sets.size(); ++i) {
                    const std::string path = join_out(
                        out_dir,
                        prefix + "_" + std::to_string(g) + "_" + std::to_string(i) + ".txt");
                    save_sample_set(path, sets[i]);
                    written.push_back(path);
                }
            }
        }
    } else {
        throw ValidationError("unsupported model type: " + kind);
    }
    for (const auto& w : written) std::cout << w << "\n";
    return kExitOk;
}

inline int cmd_evaluate(const Json& cfg, const std::string& out_dir) {
    check_keys(cfg, {"dataset", "samples", "bins", "epsilon", "report_dir"}, "evaluate config");
    const BitDataset dataset = load_dataset(jreq<std::string>(cfg, "dataset", "evaluate config"));
    const auto paths = jreq<std::vector<std::string>>(cfg, "samples", "evaluate config");
    std::vector<Eigen::MatrixXi> ensemble;
    for (const auto& p : paths) ensemble.push_back(load_bit_matrix(p));
    ReportOptions opts;
    opts.bins = jval(cfg, "bins", opts.bins);
    opts.epsilon = jval(cfg, "epsilon", opts.epsilon);
    const MetricsReport rep = report(dataset, ensemble, opts);
    namespace fs = std::filesystem;
    const std::string dir = (fs::path(out_dir) / jval<std::string>(cfg, "report_dir", "report")).string();
    save_report(dir, rep);
    std::cout << "sets " << rep.n_sets << " mean_marginal_kl " << qbm_forge::detail::fmt(rep.mean_kl_mean)
              << " +- " << qbm_forge::detail::fmt(rep.mean_kl_sd) << "\n";
    std::cout << "report " << dir << "\n";
    return kExitOk;
}

inline int cmd_heatmap(const Json& cfg, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override) {
    check_keys(cfg,
               {"curve", "problem", "model", "samples", "generate", "s_grid", "t_grid", "bins",
                "epsilon", "grid_out", "ridge_out"},
               "heatmap config");
    const ScheduleCurve curve =
        load_schedule_curve(jreq<std::string>(cfg, "curve", "heatmap config"));
    IsingProblem problem;
    if (cfg.contains("problem") == cfg.contains("model"))
        throw ValidationError("heatmap config needs exactly one of 'problem' or 'model'");
    if (cfg.contains("problem")) {
        const Json& pr = cfg.at("problem");
        check_keys(pr, {"n", "h", "j"}, "problem config");
        problem.n = jreq<int>(pr, "n", "problem config");
        const auto h = jreq<std::vector<double>>(pr, "h", "problem config");
        problem.h = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
        if (pr.contains("j")) {
            for (const auto& row : pr.at("j")) {
                if (!row.is_array() || row.size() != 3)
                    throw ValidationError("problem j entries must be [i, j, value] triples");
                problem.j.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
            }
        }
        validate_problem(problem);
    } else {
        const TrainedBqrbm model = load_bqrbm(get_as<std::string>(cfg, "model"));
        problem = qbm_to_ising(model.params, curve);
    }

    std::vector<SampleSet> samples;
    if (cfg.contains("samples") == cfg.contains("generate"))
        throw ValidationError("heatmap config needs exactly one of 'samples' or 'generate'");
    if (cfg.contains("samples")) {
        for (const auto& p : jreq<std::vector<std::string>>(cfg, "samples", "heatmap config"))
            samples.push_back(load_sample_set(p));
    } else {
        const Json& gen = cfg.at("generate");
        check_keys(gen,
                   {"s", "t_mk", "sets", "n_samples", "seed", "t_relative_us", "delta_pause_us",
                    "alpha_quench_per_us", "random_gauges", "noise_sigma_h", "noise_sigma_j"},
                   "generate config");
        PauseQuenchSpec spec;
        spec.s_quench = jreq<double>(gen, "s", "generate config");
        spec.t_relative_us = jval(gen, "t_relative_us", spec.t_relative_us);
        spec.delta_pause_us = jval(gen, "delta_pause_us", spec.delta_pause_us);
        spec.alpha_quench_per_us = jval(gen, "alpha_quench_per_us", spec.alpha_quench_per_us);
        FacadeOptions opts;
        opts.random_gauges = jval(gen, "random_gauges", opts.random_gauges);
        opts.noise_sigma_h = jval(gen, "noise_sigma_h", opts.noise_sigma_h);
        opts.noise_sigma_j = jval(gen, "noise_sigma_j", opts.noise_sigma_j);
        const std::uint64_t seed = seed_override.value_or(jval<std::uint64_t>(gen, "seed", 0));
        samples = annealer_facade(problem, spec, curve, jreq<double>(gen, "t_mk", "generate config"),
                                  spec.s_quench, jreq<int>(gen, "n_samples", "generate config"),
                                  jval(gen, "sets", 1), seed, opts);
    }

    if (!cfg.contains("s_grid") || !cfg.contains("t_grid"))
        throw ValidationError("heatmap config needs 's_grid' and 't_grid'");
    const Eigen::VectorXd s_grid = parse_grid(cfg.at("s_grid"), "s_grid");
    const Eigen::VectorXd t_grid = parse_grid(cfg.at("t_grid"), "t_grid");
    const int bins = jval(cfg, "bins", 32);
    const double eps = jval(cfg, "epsilon", 1e-6);
    const KlGrid grid = kl_heatmap(problem, curve, samples, s_grid, t_grid, bins, eps);
    const std::string grid_out =
        join_out(out_dir, jval<std::string>(cfg, "grid_out", "heatmap.csv"));
    const std::string ridge_out =
        join_out(out_dir, jval<std::string>(cfg, "ridge_out", "ridge.csv"));
    save_kl_grid(grid_out, grid, ridge_out, &curve);

    Eigen::Index ti, si;
    grid.values.minCoeff(&ti, &si);
    std::cout << "argmin s " << qbm_forge::detail::fmt(grid.s_values[si]) << " T_mK "
              << qbm_forge::detail::fmt(grid.temperatures_mk[ti]) << " kl "
              << qbm_forge::detail::fmt(grid.values(ti, si)) << "\n";
    std::cout << "grid " << grid_out << "\nridge " << ridge_out << "\n";
    return kExitOk;
}

inline int cmd_schedule(const Json& cfg, const std::string& out_dir) {
    check_keys(cfg,
               {"s_quench", "t_relative_us", "delta_pause_us", "alpha_quench_per_us", "curve",
                "points_out", "curve_out", "t_step_us"},
               "schedule config");
    PauseQuenchSpec spec;
    spec.s_quench = jreq<double>(cfg, "s_quench", "schedule config");
    spec.t_relative_us = jval(cfg, "t_relative_us", spec.t_relative_us);
    spec.delta_pause_us = jval(cfg, "delta_pause_us", spec.delta_pause_us);
    spec.alpha_quench_per_us = jval(cfg, "alpha_quench_per_us", spec.alpha_quench_per_us);
    const std::vector<SchedulePoint> points = build_pause_quench(spec);
    const std::string points_out =
        join_out(out_dir, jval<std::string>(cfg, "points_out", "waypoints.csv"));
    {
        std::ofstream out(points_out);
        if (!out) throw IoError("cannot write " + points_out);
        out << "t_us,s\n";
        for (const auto& p : points)
            out << qbm_forge::detail::fmt(p.t_us) << "," << qbm_forge::detail::fmt(p.s) << "\n";
    }
    std::cout << describe_schedule(spec) << "\n";
    std::cout << "waypoints " << points_out << "\n";
    if (cfg.contains("curve")) {
        const ScheduleCurve curve = load_schedule_curve(get_as<std::string>(cfg, "curve"));
        const double step = jval(cfg, "t_step_us", 0.25);
        if (!(step > 0.0)) throw ValidationError("t_step_us must be positive");
        const std::string curve_out =
            join_out(out_dir, jval<std::string>(cfg, "curve_out", "schedule_at_t.csv"));
        std::ofstream out(curve_out);
        if (!out) throw IoError("cannot write " + curve_out);
        out << "t_us,s,A_GHz,B_GHz\n";
        const double t_end = points.back().t_us;
        const auto emit = [&](double tc) {
            // piecewise-linear s(t) along the waypoints
            double s = points.back().s;
            for (std::size_t k = 1; k < points.size(); ++k) {
                if (tc <= points[k].t_us) {
                    const double span = points[k].t_us - points[k - 1].t_us;
                    const double f = span == 0.0 ? 1.0 : (tc - points[k - 1].t_us) / span;
                    s = points[k - 1].s + f * (points[k].s - points[k - 1].s);
                    break;
                }
            }
            const CurvePoint pt = interpolate_curve(curve, s);
            out << qbm_forge::detail::fmt(tc) << "," << qbm_forge::detail::fmt(s) << ","
                << qbm_forge::detail::fmt(pt.a_ghz) << "," << qbm_forge::detail::fmt(pt.b_ghz)
                << "\n";
        };
        for (double t = 0.0; t < t_end - 1e-9; t += step) emit(t);
        emit(t_end);
        std::cout << "curve " << curve_out << "\n";
    }
    return kExitOk;
}

// 12-qubit reproduction preset: bimodal 1000/500 dataset, 8 visible + 4
// hidden, simulator fixed at beta = 0.5 /GHz, beta_hat starting at 1.0, 100
// epochs with exact per-epoch KL.
inline int cmd_demo12(const Json& cfg, const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override) {
    check_keys(cfg,
               {"curve", "epochs", "seed", "n_hidden", "true_beta", "negative_samples",
                "eval_samples", "gauges", "kl_exact"},
               "demo12 config");
    const std::string curve_path =
        jval<std::string>(cfg, "curve", std::string(QBM_FORGE_ASSET_DIR) + "/schedule_curve.csv");
    const ScheduleCurve curve = load_schedule_curve(curve_path);
    const std::uint64_t seed = seed_override.value_or(jval<std::uint64_t>(cfg, "seed", 7));
    const double true_beta = jval(cfg, "true_beta", 0.5);

    const BitDataset dataset = synthetic_bimodal(1000, -2.0, 500, 3.0, 1.0, 8, seed);
    const std::string dataset_out = join_out(out_dir, "dataset.txt");
    save_dataset(dataset_out, dataset);

    PauseQuenchSpec spec;
    spec.s_quench = 1.0;
    ExactAnnealerBackend backend(curve, spec, beta_to_temperature_mk(true_beta), 1.0,
                                 jval(cfg, "gauges", 1));

    BqrbmTrainConfig tc;
    tc.epochs = jval(cfg, "epochs", 100);
    tc.seed = seed;
    tc.negative_samples = jval(cfg, "negative_samples", 10000);
    tc.kl_interval = 1;
    tc.kl_exact = jval(cfg, "kl_exact", true);
    TrainedBqrbm model = train_bqrbm(dataset, backend, jval(cfg, "n_hidden", 4), tc);
    model.curve_ref = curve_path;

    const std::string model_out = join_out(out_dir, "model.txt");
    const std::string history_out = join_out(out_dir, "history.csv");
    save_bqrbm(model_out, model);
    save_history(history_out, model.history);

    const Eigen::MatrixXi bits = sample_bqrbm(model.params, backend, jval(cfg, "eval_samples", 10000),
                                              Rng::stream(seed ^ 0x64656d6fULL, 1).raw());
    const std::string samples_out = join_out(out_dir, "samples_0.txt");
    save_bit_matrix(samples_out, bits);

    const double kl_first = model.history.front().kl;
    const double kl_last = model.history.back().kl;
    const double t_hat = beta_to_temperature_mk(model.params.beta_hat);
    const double t_true = beta_to_temperature_mk(true_beta);
    std::cout << "epochs " << model.epochs_trained << "\n";
    std::cout << "kl epoch1 " << qbm_forge::detail::fmt(kl_first) << " final "
              << qbm_forge::detail::fmt(kl_last) << "\n";
    std::cout << "T_hat_mk " << qbm_forge::detail::fmt(t_hat) << " true "
              << qbm_forge::detail::fmt(t_true) << "\n";
    std::cout << "dataset " << dataset_out << "\nmodel " << model_out << "\nhistory " << history_out
              << "\nsamples " << samples_out << "\n";
    return kExitOk;
}

} // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"RBM and bound-based quantum RBM training on binarized time series, "
                 "with an exact-diagonalization annealer simulator"};
    app.fallthrough();
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_value = 0;
    app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
    app.add_option("--out", out_dir, "output directory (default .)");

    auto* preprocess = app.add_subcommand("preprocess", "OHLC CSVs to a bit dataset");
    auto* train = app.add_subcommand("train", "train an rbm or bqrbm model");
    auto* sample = app.add_subcommand("sample", "draw samples from a trained model");
    auto* evaluate = app.add_subcommand("evaluate", "metrics report for sample ensembles");
    auto* heatmap = app.add_subcommand("heatmap", "(s, T) KL divergence scan");
    auto* schedule = app.add_subcommand("schedule", "pause-and-quench waypoints");
    auto* demo12 = app.add_subcommand("demo12", "12-qubit bimodal reproduction run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const Json cfg = detail::load_config(config_path);
        const std::optional<std::uint64_t> seed =
            seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
        if (preprocess->parsed()) return detail::cmd_preprocess(cfg, out_dir);
        if (train->parsed()) return detail::cmd_train(cfg, out_dir, seed);
        if (sample->parsed()) return detail::cmd_sample(cfg, out_dir, seed);
        if (evaluate->parsed()) return detail::cmd_evaluate(cfg, out_dir);
        if (heatmap->parsed()) return detail::cmd_heatmap(cfg, out_dir, seed);
        if (schedule->parsed()) return detail::cmd_schedule(cfg, out_dir);
        if (demo12->parsed()) return detail::cmd_demo12(cfg, out_dir, seed);
        throw ValidationError("no subcommand selected");
    } catch (const ValidationError& e) {
        log_error(e.what());
        return kExitValidation;
    } catch (const CapacityError& e) {
        log_error(std::string(e.what()) + " (reduce the number of units or samples)");
        return kExitCapacity;
    } catch (const IoError& e) {
        log_error(e.what());
        return kExitIo;
    } catch (const Json::exception& e) {
        log_error(std::string("config error: ") + e.what());
        return kExitValidation;
    }
}

} // namespace qbm_forge::cli

#endif
