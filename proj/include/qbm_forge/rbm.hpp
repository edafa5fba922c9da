#ifndef QBM_FORGE_RBM_HPP
#define QBM_FORGE_RBM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "logging.hpp"
#include "metrics.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "text_io.hpp"

namespace qbm_forge {

// ============================================================================
// Classical RBM over binary units: energy, conditionals, Gibbs sampling,
// CD-n training with a geometric learning-rate decay, and single-chain free
// or clamped sampling.
// ============================================================================

struct TrainConfig {
    int minibatch = 10;
    int epochs = 100;
    double eta0 = 1e-3;
    int t_decay = 5000;   // epoch where decay starts
    int T_decay = 1000;   // epochs per halving
    int cd_steps = 1;
    std::uint64_t seed = 0;

    // In-training KL evaluation, every kl_interval epochs (0 disables).  The
    // evaluation consumes its own RNG stream so the training trajectory does
    // not depend on whether or how often it runs.
    int kl_interval = 0;
    int kl_samples = 10000;
    int kl_thermalization = 10000;
    int kl_spacing = 10000;
    int kl_bins = 32;
    double kl_epsilon = 1e-6;
};

inline void validate_config(const TrainConfig& c) {
    if (c.minibatch < 1) throw ValidationError("minibatch must be >= 1");
    if (c.epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(c.eta0 > 0.0)) throw ValidationError("eta0 must be positive");
    if (c.t_decay < 0 || c.T_decay < 1) throw ValidationError("bad decay schedule");
    if (c.cd_steps < 1) throw ValidationError("cd_steps must be >= 1");
    if (c.kl_interval < 0) throw ValidationError("kl_interval must be >= 0");
    if (c.kl_interval > 0 &&
        (c.kl_samples < 1 || c.kl_thermalization < 0 || c.kl_spacing < 1 || c.kl_bins < 1 ||
         !(c.kl_epsilon > 0.0)))
        throw ValidationError("bad KL evaluation settings");
}

// eta0 * min{1, 2^-((t - t_decay)/T_decay)}
inline double decayed_lr(double eta0, int t_decay, int T_decay, int t) {
    if (t < 0) throw ValidationError("epoch must be >= 0");
    const double factor = std::exp2(-static_cast<double>(t - t_decay) / T_decay);
    return eta0 * std::min(1.0, factor);
}

inline double lr_at(const TrainConfig& c, int t) {
    return decayed_lr(c.eta0, c.t_decay, c.T_decay, t);
}

namespace detail {

inline void check_bits(const Eigen::VectorXi& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] != 0 && v[i] != 1) throw ValidationError(std::string(what) + " must be 0/1 bits");
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Eigen::VectorXi sample_bits(const Eigen::VectorXd& p, Rng& rng) {
    Eigen::VectorXi out(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = rng.uniform() < p[i] ? 1 : 0;
    return out;
}

} // namespace detail

// E(v, h) = -a.v - b.h - v.W.h
inline double rbm_energy(const RbmParameters& p, const Eigen::VectorXi& v,
                         const Eigen::VectorXi& h) {
    validate_params(p);
    if (v.size() != p.a.size() || h.size() != p.b.size())
        throw ValidationError("layer sizes do not match the parameters");
    detail::check_bits(v, "visible state");
    detail::check_bits(h, "hidden state");
    const Eigen::VectorXd vd = v.cast<double>();
    const Eigen::VectorXd hd = h.cast<double>();
    return -p.a.dot(vd) - p.b.dot(hd) - vd.dot(p.w * hd);
}

// p(h_j = 1 | v) = sigma(b_j + (W^T v)_j)
inline Eigen::VectorXd hidden_conditional(const RbmParameters& p, const Eigen::VectorXi& v) {
    if (v.size() != p.a.size()) throw ValidationError("visible state size mismatch");
    detail::check_bits(v, "visible state");
    Eigen::VectorXd x = p.b + p.w.transpose() * v.cast<double>();
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = detail::sigmoid(x[j]);
    return x;
}

// p(v_i = 1 | h) = sigma(a_i + (W h)_i)
inline Eigen::VectorXd visible_conditional(const RbmParameters& p, const Eigen::VectorXi& h) {
    if (h.size() != p.b.size()) throw ValidationError("hidden state size mismatch");
    detail::check_bits(h, "hidden state");
    Eigen::VectorXd x = p.a + p.w * h.cast<double>();
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = detail::sigmoid(x[i]);
    return x;
}

// Alternates a hidden update then a visible update per step, each unit
// sampled by comparing a uniform draw against its conditional probability.
inline Eigen::VectorXi gibbs_chain(const RbmParameters& p, const Eigen::VectorXi& v0, int steps,
                                   Rng& rng) {
    if (steps < 1) throw ValidationError("steps must be >= 1");
    Eigen::VectorXi v = v0;
    for (int t = 0; t < steps; ++t) {
        const Eigen::VectorXi h = detail::sample_bits(hidden_conditional(p, v), rng);
        v = detail::sample_bits(visible_conditional(p, h), rng);
    }
    return v;
}

// One CD-n update over a mini-batch.  Positive hidden statistics use the
// conditional probabilities; the negative phase runs n sampled Gibbs steps
// from each data vector.  The learning rate is divided by the batch size.
inline void cd_update(RbmParameters& p, const Eigen::MatrixXi& batch, int n, double eta,
                      Rng& rng) {
    if (batch.cols() < 1) throw ValidationError("empty mini-batch");
    if (batch.rows() != p.a.size()) throw ValidationError("batch rows must equal n_visible");
    if (n < 1) throw ValidationError("cd steps must be >= 1");
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(p.w.rows(), p.w.cols());
    Eigen::VectorXd da = Eigen::VectorXd::Zero(p.a.size());
    Eigen::VectorXd db = Eigen::VectorXd::Zero(p.b.size());
    for (Eigen::Index c = 0; c < batch.cols(); ++c) {
        const Eigen::VectorXi v_pos = batch.col(c);
        const Eigen::VectorXd h_pos = hidden_conditional(p, v_pos);
        const Eigen::VectorXi v_neg = gibbs_chain(p, v_pos, n, rng);
        const Eigen::VectorXd h_neg = hidden_conditional(p, v_neg);
        const Eigen::VectorXd vp = v_pos.cast<double>();
        const Eigen::VectorXd vn = v_neg.cast<double>();
        dw += vp * h_pos.transpose() - vn * h_neg.transpose();
        da += vp - vn;
        db += h_pos - h_neg;
    }
    const double scale = eta / static_cast<double>(batch.cols());
    p.w += scale * dw;
    p.a += scale * da;
    p.b += scale * db;
}

// Single chain: thermalization steps first, then every spacing-th visible
// state is kept.  Clamped indices are forced back to their fixed bits after
// every visible update, so emitted samples always honor the clamp.
struct Clamp {
    std::vector<int> indices;
    std::vector<int> bits;
};

inline Eigen::MatrixXi sample_rbm(const RbmParameters& p, int n_samples, int thermalization,
                                  int spacing, Rng& rng, const std::optional<Clamp>& clamp = {}) {
    validate_params(p);
    if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
    if (thermalization < 0) throw ValidationError("thermalization must be >= 0");
    if (spacing < 1) throw ValidationError("spacing must be >= 1");
    const auto n_v = p.a.size();
    if (clamp) {
        if (clamp->indices.size() != clamp->bits.size())
            throw ValidationError("clamp indices and bits must align");
        for (std::size_t k = 0; k < clamp->indices.size(); ++k) {
            if (clamp->indices[k] < 0 || clamp->indices[k] >= n_v)
                throw ValidationError("clamp index out of range");
            if (clamp->bits[k] != 0 && clamp->bits[k] != 1)
                throw ValidationError("clamp bits must be 0/1");
        }
    }
    Eigen::VectorXi v = Eigen::VectorXi::Zero(n_v);
    const auto apply_clamp = [&](Eigen::VectorXi& state) {
        if (!clamp) return;
        for (std::size_t k = 0; k < clamp->indices.size(); ++k)
            state[clamp->indices[k]] = clamp->bits[k];
    };
    apply_clamp(v);
    const auto step = [&]() {
        const Eigen::VectorXi h = detail::sample_bits(hidden_conditional(p, v), rng);
        v = detail::sample_bits(visible_conditional(p, h), rng);
        apply_clamp(v);
    };
    for (int t = 0; t < thermalization; ++t) step();
    Eigen::MatrixXi out(n_v, n_samples);
    for (int s = 0; s < n_samples; ++s) {
        for (int t = 0; t < spacing; ++t) step();
        out.col(s) = v;
    }
    return out;
}

// --- training ---------------------------------------------------------------

struct RbmHistoryRow {
    int epoch = 0;
    double lr = 0.0;
    double kl = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
};

struct TrainedRbm {
    RbmParameters params;
    TrainConfig config;
    std::vector<RbmHistoryRow> history;
    int epochs_trained = 0;
};

namespace detail {

inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
}

inline void run_rbm_epochs(TrainedRbm& model, const BitDataset& dataset, int epochs) {
    const int n_samples = dataset.n_samples();
    const TrainConfig& cfg = model.config;
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(model.epochs_trained));
    std::vector<int> idx(n_samples);
    std::iota(idx.begin(), idx.end(), 0);
    for (int e = 0; e < epochs; ++e) {
        const int t = model.epochs_trained + 1;
        const double lr = lr_at(cfg, t);
        shuffle_indices(idx, rng);
        for (int start = 0; start < n_samples; start += cfg.minibatch) {
            const int count = std::min(cfg.minibatch, n_samples - start);
            Eigen::MatrixXi batch(dataset.bits.rows(), count);
            for (int c = 0; c < count; ++c) batch.col(c) = dataset.bits.col(idx[start + c]);
            cd_update(model.params, batch, cfg.cd_steps, lr, rng);
        }
        RbmHistoryRow row;
        row.epoch = t;
        row.lr = lr;
        if (cfg.kl_interval > 0 && t % cfg.kl_interval == 0) {
            Rng eval_rng = Rng::stream(cfg.seed ^ 0x6576616cULL, static_cast<std::uint64_t>(t));
            const Eigen::MatrixXi bits = sample_rbm(model.params, cfg.kl_samples,
                                                    cfg.kl_thermalization, cfg.kl_spacing, eval_rng);
            row.kl = dataset_kl(dataset, bits, cfg.kl_bins, cfg.kl_epsilon);
        }
        model.history.push_back(row);
        model.epochs_trained = t;
        log_debug("rbm epoch " + std::to_string(t) + " lr " + std::to_string(lr));
    }
}

} // namespace detail

// Every dataset row (channel bits and indicator rows alike) is a visible
// unit.  Weights start Gaussian with sd 0.01, biases zero.
inline TrainedRbm train_rbm(const BitDataset& dataset, int n_hidden, const TrainConfig& config) {
    validate_dataset(dataset);
    validate_config(config);
    if (n_hidden < 1) throw ValidationError("n_hidden must be >= 1");
    TrainedRbm model;
    model.config = config;
    const int n_v = dataset.n_rows();
    Rng init_rng(config.seed);
    model.params.a = Eigen::VectorXd::Zero(n_v);
    model.params.b = Eigen::VectorXd::Zero(n_hidden);
    model.params.w.resize(n_v, n_hidden);
    for (int i = 0; i < n_v; ++i)
        for (int j = 0; j < n_hidden; ++j) model.params.w(i, j) = init_rng.normal(0.0, 0.01);
    detail::run_rbm_epochs(model, dataset, config.epochs);
    return model;
}

// Picks up where a previous run stopped; epoch numbering continues, so the
// decay schedule keeps advancing.
inline void continue_training(TrainedRbm& model, const BitDataset& dataset, int extra_epochs) {
    validate_dataset(dataset);
    validate_config(model.config);
    if (extra_epochs < 0) throw ValidationError("extra_epochs must be >= 0");
    if (dataset.n_rows() != model.params.a.size())
        throw ValidationError("dataset layout does not match the model");
    detail::run_rbm_epochs(model, dataset, extra_epochs);
}

// --- persistence ------------------------------------------------------------

namespace detail {

inline std::string rbm_config_line(const TrainConfig& c) {
    std::ostringstream out;
    out << "config minibatch=" << c.minibatch << " epochs=" << c.epochs << " eta0=" << fmt(c.eta0)
        << " t_decay=" << c.t_decay << " T_decay=" << c.T_decay << " cd_steps=" << c.cd_steps
        << " seed=" << c.seed << " kl_interval=" << c.kl_interval << " kl_samples=" << c.kl_samples
        << " kl_thermalization=" << c.kl_thermalization << " kl_spacing=" << c.kl_spacing
        << " kl_bins=" << c.kl_bins << " kl_epsilon=" << fmt(c.kl_epsilon);
    return out.str();
}

inline std::map<std::string, std::string> parse_kv_line(const std::string& line,
                                                        const std::string& keyword) {
    std::istringstream in(line);
    std::string head;
    in >> head;
    if (head != keyword) throw IoError("expected '" + keyword + "' line, got: " + line);
    std::map<std::string, std::string> kv;
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw IoError("bad key=value token: " + token);
        kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return kv;
}

inline double kv_num(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("missing config key: " + key);
    try {
        std::size_t pos = 0;
        const double x = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw IoError("trailing characters in " + key);
        return x;
    } catch (const IoError&) {
        throw;
    } catch (const std::exception&) {
        throw IoError("cannot parse config value for " + key);
    }
}

inline TrainConfig parse_rbm_config(const std::map<std::string, std::string>& kv) {
    TrainConfig c;
    c.minibatch = static_cast<int>(kv_num(kv, "minibatch"));
    c.epochs = static_cast<int>(kv_num(kv, "epochs"));
    c.eta0 = kv_num(kv, "eta0");
    c.t_decay = static_cast<int>(kv_num(kv, "t_decay"));
    c.T_decay = static_cast<int>(kv_num(kv, "T_decay"));
    c.cd_steps = static_cast<int>(kv_num(kv, "cd_steps"));
    c.seed = static_cast<std::uint64_t>(kv_num(kv, "seed"));
    c.kl_interval = static_cast<int>(kv_num(kv, "kl_interval"));
    c.kl_samples = static_cast<int>(kv_num(kv, "kl_samples"));
    c.kl_thermalization = static_cast<int>(kv_num(kv, "kl_thermalization"));
    c.kl_spacing = static_cast<int>(kv_num(kv, "kl_spacing"));
    c.kl_bins = static_cast<int>(kv_num(kv, "kl_bins"));
    c.kl_epsilon = kv_num(kv, "kl_epsilon");
    return c;
}

} // namespace detail

inline void save_rbm(const std::string& path, const TrainedRbm& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << "qbm_forge_model v1\n";
    out << "type rbm\n";
    out << "visible " << model.params.a.size() << "\n";
    out << "hidden " << model.params.b.size() << "\n";
    out << "epochs_trained " << model.epochs_trained << "\n";
    out << detail::rbm_config_line(model.config) << "\n";
    out << "a " << detail::fmt_vector(model.params.a) << "\n";
    out << "b " << detail::fmt_vector(model.params.b) << "\n";
    out << "W\n";
    for (Eigen::Index i = 0; i < model.params.w.rows(); ++i)
        out << detail::fmt_vector(model.params.w.row(i).transpose()) << "\n";
    out << "end\n";
}

inline TrainedRbm load_rbm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    detail::expect_exact(in, "qbm_forge_model v1");
    detail::expect_exact(in, "type rbm");
    TrainedRbm model;
    const int n_v = static_cast<int>(detail::parse_int(detail::expect_keyword(in, "visible"), "visible"));
    const int n_h = static_cast<int>(detail::parse_int(detail::expect_keyword(in, "hidden"), "hidden"));
    if (n_v < 1 || n_h < 1) throw IoError("bad dimensions in " + path);
    model.epochs_trained = static_cast<int>(
        detail::parse_int(detail::expect_keyword(in, "epochs_trained"), "epochs_trained"));
    model.config =
        detail::parse_rbm_config(detail::parse_kv_line(detail::expect_line(in, "config"), "config"));
    model.params.a = detail::parse_vector(detail::expect_keyword(in, "a"), n_v, "a");
    model.params.b = detail::parse_vector(detail::expect_keyword(in, "b"), n_h, "b");
    detail::expect_exact(in, "W");
    model.params.w.resize(n_v, n_h);
    for (int i = 0; i < n_v; ++i)
        model.params.w.row(i) =
            detail::parse_vector(detail::expect_line(in, "W row"), n_h, "W row").transpose();
    detail::expect_exact(in, "end");
    validate_params(model.params);
    return model;
}

inline void save_history(const std::string& path, const std::vector<RbmHistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history file: " + path);
    out << "epoch,lr,kl\n";
    for (const auto& row : history) {
        out << row.epoch << "," << detail::fmt(row.lr) << ",";
        if (!std::isnan(row.kl)) out << detail::fmt(row.kl);
        out << "\n";
    }
}

} // namespace qbm_forge

#endif
