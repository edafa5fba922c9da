#ifndef QBM_FORGE_BQRBM_HPP
#define QBM_FORGE_BQRBM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "exactspin.hpp"
#include "logging.hpp"
#include "metrics.hpp"
#include "params.hpp"
#include "rbm.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "schedule.hpp"
#include "text_io.hpp"

namespace qbm_forge {

// ============================================================================
// Bound-based quantum RBM training: closed-form clamped positive phase,
// sampler-backed negative phase, gradient ascent on the lower bound, and a
// learned effective inverse temperature.
// ============================================================================

inline constexpr double kBetaHatFloor = 1e-6;

// Source of negative-phase samples.  The trainer converts model parameters
// to an Ising problem scaled for the backend's operating point and asks it
// for sample sets.
class SamplerBackend {
public:
    virtual ~SamplerBackend() = default;
    virtual std::vector<SampleSet> sample(const IsingProblem& problem, int n_samples,
                                          std::uint64_t seed) = 0;
    // A(s*), B(s*) at the anneal fraction the model's parameters assume.
    virtual CurvePoint operating_point() const = 0;
    virtual double s_star() const = 0;
    virtual bool supports_exact_marginal() const { return false; }
    // Probability of each visible configuration under the true sampling
    // distribution.  Index bit q of entry k is (k >> (n_visible-1-q)) & 1 and
    // bit value 1 means spin +1, matching the dataset bit encoding.
    virtual Eigen::VectorXd exact_visible_marginal(const IsingProblem& problem, int n_visible) {
        (void)problem;
        (void)n_visible;
        throw ValidationError("this sampler backend cannot compute exact marginals");
    }
};

// Simulated annealer: exact density at the quench point, pause-and-quench
// schedule metadata, gauge ensembling, optional coefficient noise.  The
// density is computed at spec.s_quench (the physical freeze point) while
// operating_point() reports the curve at the model's s*; the two coincide in
// the self-consistent setup used for training.
class ExactAnnealerBackend final : public SamplerBackend {
public:
    ExactAnnealerBackend(ScheduleCurve curve, PauseQuenchSpec spec, double effective_t_mk,
                         double model_s_star, int gauges = 1, FacadeOptions options = {})
        : curve_(std::move(curve)),
          spec_(spec),
          effective_t_mk_(effective_t_mk),
          s_star_(model_s_star),
          gauges_(gauges),
          options_(options) {
        validate_curve(curve_);
        build_pause_quench(spec_);
        if (!(effective_t_mk_ > 0.0)) throw ValidationError("effective temperature must be positive");
        if (s_star_ < 0.0 || s_star_ > 1.0) throw ValidationError("s_star must lie in [0, 1]");
        if (gauges_ < 1) throw ValidationError("gauges must be >= 1");
    }

    std::vector<SampleSet> sample(const IsingProblem& problem, int n_samples,
                                  std::uint64_t seed) override {
        return annealer_facade(problem, spec_, curve_, effective_t_mk_, spec_.s_quench, n_samples,
                               gauges_, seed, options_);
    }

    CurvePoint operating_point() const override { return interpolate_curve(curve_, s_star_); }
    double s_star() const override { return s_star_; }
    bool supports_exact_marginal() const override { return true; }

    Eigen::VectorXd exact_visible_marginal(const IsingProblem& problem, int n_visible) override {
        validate_problem(problem);
        if (n_visible < 1 || n_visible > problem.n)
            throw ValidationError("n_visible out of range");
        const SpinSystem sys = system_from_problem(problem);
        const CurvePoint pt = interpolate_curve(curve_, spec_.s_quench);
        const double beta = temperature_mk_to_beta(effective_t_mk_);
        DensityDiagonal density;
        if ((pt.a_ghz * sys.gamma.array() == 0.0).all())
            density = boltzmann_diagonal(pt.b_ghz * classical_energies(sys, 1.0), beta);
        else
            density = density_diagonal(diagonalize(sys, pt.a_ghz, pt.b_ghz), beta);
        const Eigen::VectorXd m = marginal_visible(density, sys.n_qubits, n_visible);
        // marginal_visible indexes states with bit 1 meaning spin -1; the
        // dataset convention is the complement, so mirror the index.
        Eigen::VectorXd out(m.size());
        const Eigen::Index mask = m.size() - 1;
        for (Eigen::Index v = 0; v < m.size(); ++v) out[v] = m[mask - v];
        return out;
    }

    const ScheduleCurve& curve() const { return curve_; }
    const PauseQuenchSpec& spec() const { return spec_; }
    double effective_t_mk() const { return effective_t_mk_; }

private:
    ScheduleCurve curve_;
    PauseQuenchSpec spec_;
    double effective_t_mk_;
    double s_star_;
    int gauges_;
    FacadeOptions options_;
};

// --- closed-form clamped statistics ----------------------------------------

namespace detail {

inline void check_spins(const Eigen::MatrixXd& spins) {
    for (Eigen::Index i = 0; i < spins.rows(); ++i)
        for (Eigen::Index c = 0; c < spins.cols(); ++c)
            if (spins(i, c) != 1.0 && spins(i, c) != -1.0)
                throw ValidationError("spin entries must be exactly +-1");
}

} // namespace detail

// Per-sample hidden expectations (b'_j / D_j) tanh(D_j) with
// b'_j = bias_j + sum_i w_ij s_i and D_j = sqrt(gamma_j^2 + b'_j^2); the
// D = 0 limit is 0.  Result is n_hidden x batch.
inline Eigen::MatrixXd hidden_expectations(const Eigen::MatrixXd& spins,
                                           const BqrbmParameters& p) {
    validate_params(p);
    if (spins.rows() != p.n_visible())
        throw ValidationError("spin batch rows must equal n_visible");
    if (spins.cols() < 1) throw ValidationError("empty spin batch");
    detail::check_spins(spins);
    const int n_v = p.n_visible();
    const int n_h = p.n_hidden();
    Eigen::MatrixXd b_eff = p.w.transpose() * spins;  // n_h x B
    b_eff.colwise() += p.bias.tail(n_h);
    Eigen::MatrixXd m(n_h, spins.cols());
    for (int j = 0; j < n_h; ++j) {
        const double g = p.gamma[n_v + j];
        for (Eigen::Index c = 0; c < spins.cols(); ++c) {
            const double b = b_eff(j, c);
            const double d = std::sqrt(g * g + b * b);
            m(j, c) = d == 0.0 ? 0.0 : b / d * std::tanh(d);
        }
    }
    return m;
}

struct PositivePhase {
    Eigen::VectorXd first;      // length n: batch-mean spins then hidden expectations
    Eigen::MatrixXd second_vh;  // n_visible x n_hidden batch-mean products
};

inline PositivePhase positive_phase(const Eigen::MatrixXd& spins, const BqrbmParameters& p) {
    const Eigen::MatrixXd m = hidden_expectations(spins, p);
    const double batch = static_cast<double>(spins.cols());
    PositivePhase pp;
    pp.first.resize(p.n_qubits());
    pp.first.head(p.n_visible()) = spins.rowwise().mean();
    pp.first.tail(p.n_hidden()) = m.rowwise().mean();
    pp.second_vh = spins * m.transpose() / batch;
    return pp;
}

// Delta beta_hat = eta * (<E>_data - <E>_model).  beta_hat is an inverse
// energy (1/GHz), so the energies passed in must carry the B(s*) scale in
// GHz; the caller applies the result and enforces the kBetaHatFloor.
inline double beta_update(double mean_energy_data, double mean_energy_model, double eta_beta) {
    if (!std::isfinite(mean_energy_data) || !std::isfinite(mean_energy_model))
        throw ValidationError("non-finite energy in beta update");
    return eta_beta * (mean_energy_data - mean_energy_model);
}

// --- training ---------------------------------------------------------------

struct BqrbmTrainConfig {
    int minibatch = 10;
    int epochs = 100;
    double eta0 = 0.1;
    int t_decay = 50;
    int T_decay = 10;
    double eta_beta0 = 0.1;
    int beta_t_decay = 50;
    int beta_T_decay = 20;  // slower decay leaves beta_hat mobile late in training
    double beta_hat_init = 1.0;
    bool per_minibatch_beta = false;  // default: one beta_hat step per epoch
    int negative_samples = 10000;
    std::uint64_t seed = 0;

    int kl_interval = 0;  // epochs between KL evaluations (0 disables)
    int kl_samples = 10000;
    int kl_bins = 32;
    double kl_epsilon = 1e-6;
    bool kl_exact = false;  // use the backend's exact marginal when it has one
};

inline void validate_config(const BqrbmTrainConfig& c) {
    if (c.minibatch < 1) throw ValidationError("minibatch must be >= 1");
    if (c.epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(c.eta0 >= 0.0)) throw ValidationError("eta0 must be >= 0");
    if (!(c.eta_beta0 >= 0.0)) throw ValidationError("eta_beta0 must be >= 0");
    if (c.t_decay < 0 || c.T_decay < 1 || c.beta_t_decay < 0 || c.beta_T_decay < 1)
        throw ValidationError("bad decay schedule");
    if (!(c.beta_hat_init > 0.0)) throw ValidationError("beta_hat_init must be positive");
    if (c.negative_samples < 1) throw ValidationError("negative_samples must be >= 1");
    if (c.kl_interval < 0) throw ValidationError("kl_interval must be >= 0");
    if (c.kl_interval > 0 && (c.kl_samples < 1 || c.kl_bins < 1 || !(c.kl_epsilon > 0.0)))
        throw ValidationError("bad KL evaluation settings");
}

struct BqrbmHistoryRow {
    int epoch = 0;
    double lr = 0.0;
    double lr_beta = 0.0;
    double beta_hat = 0.0;
    double t_hat_mk = 0.0;
    bool classical_limit = false;  // A(s*)/B(s*) <= 1e-3 at the operating point
    bool hw_in_range = true;       // every mini-batch problem inside device ranges
    double kl = std::numeric_limits<double>::quiet_NaN();
};

struct TrainedBqrbm {
    BqrbmParameters params;
    BqrbmTrainConfig config;
    std::vector<BqrbmHistoryRow> history;
    int epochs_trained = 0;
    std::string curve_ref;  // provenance note persisted with the model
};

// Mean per-channel KL between the dataset and an exact visible distribution
// (probability per visible configuration, marginal_visible index order).
inline double marginal_dataset_kl(const BitDataset& dataset, const Eigen::VectorXd& p_visible,
                                  int bins = 32, double eps = 1e-6) {
    validate_dataset(dataset);
    const int n_v = dataset.n_rows();
    if (n_v > 30 || p_visible.size() != (1LL << n_v))
        throw ValidationError("visible distribution length must be 2^n_rows");
    const Eigen::Index dim = p_visible.size();
    Eigen::MatrixXi all_states(n_v, dim);
    for (Eigen::Index k = 0; k < dim; ++k)
        for (int q = 0; q < n_v; ++q)
            all_states(q, k) = static_cast<int>((static_cast<std::uint64_t>(k) >> (n_v - 1 - q)) & 1u);
    const Eigen::MatrixXd data_values = decode_values(dataset);
    const Eigen::MatrixXd state_values = decode_values(dataset, all_states);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < data_values.rows(); ++c) {
        double lo = std::min(data_values.row(c).minCoeff(), state_values.row(c).minCoeff());
        double hi = std::max(data_values.row(c).maxCoeff(), state_values.row(c).maxCoeff());
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const auto range = std::make_optional(std::make_pair(lo, hi));
        const Histogram p = histogram(data_values.row(c).transpose(), bins, range);
        const Histogram q =
            weighted_histogram(state_values.row(c).transpose(), p_visible, bins, range);
        acc += kl_divergence(p.probabilities, q.probabilities, KlSmoothing::kPlain, eps);
    }
    return acc / static_cast<double>(data_values.rows());
}

// Visible-layer samples from the backend at the model's current parameters,
// expanded to one column per draw (sets in order, states in canonical order,
// spins mapped to bits).
inline Eigen::MatrixXi sample_bqrbm(const BqrbmParameters& params, SamplerBackend& backend,
                                    int n_samples, std::uint64_t seed) {
    validate_params(params);
    const IsingProblem problem = qbm_to_ising(params, backend.operating_point());
    const std::vector<SampleSet> sets = backend.sample(problem, n_samples, seed);
    const int n_v = params.n_visible();
    int total = 0;
    for (const auto& set : sets) total += set.total_occurrences();
    Eigen::MatrixXi bits(n_v, total);
    int col = 0;
    for (const auto& set : sets)
        for (int row = 0; row < set.spins.rows(); ++row)
            for (int rep = 0; rep < set.occurrences[row]; ++rep, ++col)
                for (int q = 0; q < n_v; ++q) bits(q, col) = (set.spins(row, q) + 1) / 2;
    return bits;
}

namespace detail {

// Occurrence-weighted visible/hidden moments pooled across sample sets.
struct NegativePhase {
    Eigen::VectorXd first;
    Eigen::MatrixXd second_vh;
    double mean_energy = 0.0;
    double weight = 0.0;  // total occurrences pooled
};

inline NegativePhase negative_phase(const std::vector<SampleSet>& sets, int n_v, int n_h) {
    if (sets.empty()) throw ValidationError("sampler returned no sets");
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n_v) * n_h);
    for (int i = 0; i < n_v; ++i)
        for (int j = 0; j < n_h; ++j) pairs.push_back({i, n_v + j});
    NegativePhase neg;
    neg.first = Eigen::VectorXd::Zero(n_v + n_h);
    neg.second_vh = Eigen::MatrixXd::Zero(n_v, n_h);
    double energy_sum = 0.0;
    for (const auto& set : sets) {
        if (set.n != n_v + n_h) throw ValidationError("sample set size mismatch");
        const SampleMoments m = moments_from_samples(set, pairs);
        const double w = static_cast<double>(set.total_occurrences());
        neg.first += w * m.first;
        for (int i = 0; i < n_v; ++i)
            for (int j = 0; j < n_h; ++j) neg.second_vh(i, j) += w * m.second[i * n_h + j];
        energy_sum += w * mean_energy(set);
        neg.weight += w;
    }
    neg.first /= neg.weight;
    neg.second_vh /= neg.weight;
    neg.mean_energy = energy_sum / neg.weight;
    return neg;
}

// Data-side mean Ising energy for the beta_hat update: visible spins from
// the batch, hidden spins replaced by their clamped expectations, evaluated
// under the problem the sampler was given.
inline double data_mean_energy(const Eigen::MatrixXd& spins, const Eigen::MatrixXd& m,
                               const IsingProblem& problem, int n_v, int n_h) {
    const Eigen::VectorXd h_v = problem.h.head(n_v);
    const Eigen::VectorXd h_h = problem.h.tail(n_h);
    Eigen::MatrixXd jmat = Eigen::MatrixXd::Zero(n_v, n_h);
    for (const auto& c : problem.j) jmat(c.i, c.j - n_v) = c.value;
    double acc = 0.0;
    for (Eigen::Index c = 0; c < spins.cols(); ++c)
        acc += h_v.dot(spins.col(c)) + h_h.dot(m.col(c)) + spins.col(c).dot(jmat * m.col(c));
    return acc / static_cast<double>(spins.cols());
}

inline void refresh_gamma(BqrbmParameters& params, const CurvePoint& pt) {
    params.gamma = Eigen::VectorXd::Constant(params.n_qubits(), params.beta_hat * pt.a_ghz);
}

inline void run_bqrbm_epochs(TrainedBqrbm& model, const BitDataset& dataset,
                             SamplerBackend& backend, int epochs) {
    const BqrbmTrainConfig& cfg = model.config;
    const int n_v = model.params.n_visible();
    const int n_h = model.params.n_hidden();
    const int n_samples = dataset.n_samples();
    const Eigen::MatrixXd spins = (2 * dataset.bits.array() - 1).cast<double>();
    const CurvePoint pt = backend.operating_point();
    const bool classical_limit = pt.b_ghz != 0.0 && std::abs(pt.a_ghz / pt.b_ghz) <= 1e-3;

    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(model.epochs_trained));
    Rng neg_seed_rng =
        Rng::stream(cfg.seed ^ 0x6e656761746976ULL, static_cast<std::uint64_t>(model.epochs_trained));
    std::vector<int> idx(n_samples);
    std::iota(idx.begin(), idx.end(), 0);

    for (int e = 0; e < epochs; ++e) {
        const int t = model.epochs_trained + 1;
        const double lr = decayed_lr(cfg.eta0, cfg.t_decay, cfg.T_decay, t);
        const double lr_beta = decayed_lr(cfg.eta_beta0, cfg.beta_t_decay, cfg.beta_T_decay, t);
        shuffle_indices(idx, rng);
        double e_data_sum = 0.0;
        int e_data_count = 0;
        double e_model_num = 0.0;
        double e_model_den = 0.0;
        bool hw_ok = true;
        for (int start = 0; start < n_samples; start += cfg.minibatch) {
            const int count = std::min(cfg.minibatch, n_samples - start);
            Eigen::MatrixXd batch(n_v, count);
            for (int c = 0; c < count; ++c) batch.col(c) = spins.col(idx[start + c]);

            const Eigen::MatrixXd m = hidden_expectations(batch, model.params);
            PositivePhase pp;
            pp.first.resize(n_v + n_h);
            pp.first.head(n_v) = batch.rowwise().mean();
            pp.first.tail(n_h) = m.rowwise().mean();
            pp.second_vh = batch * m.transpose() / static_cast<double>(count);

            const IsingProblem problem = qbm_to_ising(model.params, pt);
            hw_ok = hw_ok && problem_in_range(problem);
            const double e_data = data_mean_energy(batch, m, problem, n_v, n_h);

            const std::vector<SampleSet> sets =
                backend.sample(problem, cfg.negative_samples, neg_seed_rng.raw());
            const NegativePhase neg = negative_phase(sets, n_v, n_h);

            // lr is divided by the minibatch size, mirroring the CD-style
            // minibatch-averaged step; moments are already batch means.
            const double step = lr / static_cast<double>(count);
            model.params.bias += step * (pp.first - neg.first);
            model.params.w += step * (pp.second_vh - neg.second_vh);

            e_data_sum += e_data * count;
            e_data_count += count;
            e_model_num += neg.mean_energy * neg.weight;
            e_model_den += neg.weight;
            if (cfg.per_minibatch_beta) {
                model.params.beta_hat = std::max(
                    kBetaHatFloor,
                    model.params.beta_hat + beta_update(pt.b_ghz * e_data,
                                                        pt.b_ghz * neg.mean_energy, lr_beta));
                refresh_gamma(model.params, pt);
            }
        }
        if (!cfg.per_minibatch_beta) {
            model.params.beta_hat = std::max(
                kBetaHatFloor,
                model.params.beta_hat +
                    beta_update(pt.b_ghz * e_data_sum / e_data_count,
                                pt.b_ghz * e_model_num / e_model_den, lr_beta));
            refresh_gamma(model.params, pt);
        }

        BqrbmHistoryRow row;
        row.epoch = t;
        row.lr = lr;
        row.lr_beta = lr_beta;
        row.beta_hat = model.params.beta_hat;
        row.t_hat_mk = beta_to_temperature_mk(model.params.beta_hat);
        row.classical_limit = classical_limit;
        row.hw_in_range = hw_ok;
        if (cfg.kl_interval > 0 && t % cfg.kl_interval == 0) {
            if (cfg.kl_exact && backend.supports_exact_marginal()) {
                const IsingProblem problem = qbm_to_ising(model.params, pt);
                row.kl = marginal_dataset_kl(dataset,
                                             backend.exact_visible_marginal(problem, n_v),
                                             cfg.kl_bins, cfg.kl_epsilon);
            } else {
                Rng eval_rng = Rng::stream(cfg.seed ^ 0x6576616cULL, static_cast<std::uint64_t>(t));
                const Eigen::MatrixXi bits =
                    sample_bqrbm(model.params, backend, cfg.kl_samples, eval_rng.raw());
                row.kl = dataset_kl(dataset, bits, cfg.kl_bins, cfg.kl_epsilon);
            }
        }
        model.history.push_back(row);
        model.epochs_trained = t;
        log_debug("bqrbm epoch " + std::to_string(t) + " beta_hat " +
                  std::to_string(model.params.beta_hat));
    }
}

} // namespace detail

// Every dataset row is a visible unit (spin).  Weights start Gaussian with
// sd 0.01, biases zero, beta_hat from config; gamma tracks beta_hat * A(s*)
// and is refreshed whenever beta_hat moves.
inline TrainedBqrbm train_bqrbm(const BitDataset& dataset, SamplerBackend& backend, int n_hidden,
                                const BqrbmTrainConfig& config) {
    validate_dataset(dataset);
    validate_config(config);
    if (n_hidden < 1) throw ValidationError("n_hidden must be >= 1");
    TrainedBqrbm model;
    model.config = config;
    const int n_v = dataset.n_rows();
    Rng init_rng(config.seed);
    model.params.bias = Eigen::VectorXd::Zero(n_v + n_hidden);
    model.params.w.resize(n_v, n_hidden);
    for (int i = 0; i < n_v; ++i)
        for (int j = 0; j < n_hidden; ++j) model.params.w(i, j) = init_rng.normal(0.0, 0.01);
    model.params.beta_hat = config.beta_hat_init;
    model.params.s_star = backend.s_star();
    detail::refresh_gamma(model.params, backend.operating_point());
    detail::run_bqrbm_epochs(model, dataset, backend, config.epochs);
    return model;
}

inline void continue_training(TrainedBqrbm& model, const BitDataset& dataset,
                              SamplerBackend& backend, int extra_epochs) {
    validate_dataset(dataset);
    validate_config(model.config);
    if (extra_epochs < 0) throw ValidationError("extra_epochs must be >= 0");
    if (dataset.n_rows() != model.params.n_visible())
        throw ValidationError("dataset layout does not match the model");
    detail::run_bqrbm_epochs(model, dataset, backend, extra_epochs);
}

// --- persistence ------------------------------------------------------------

namespace detail {

inline std::string bqrbm_config_line(const BqrbmTrainConfig& c) {
    std::ostringstream out;
    out << "config minibatch=" << c.minibatch << " epochs=" << c.epochs << " eta0=" << fmt(c.eta0)
        << " t_decay=" << c.t_decay << " T_decay=" << c.T_decay << " eta_beta0=" << fmt(c.eta_beta0)
        << " beta_t_decay=" << c.beta_t_decay << " beta_T_decay=" << c.beta_T_decay
        << " beta_hat_init=" << fmt(c.beta_hat_init)
        << " per_minibatch_beta=" << (c.per_minibatch_beta ? 1 : 0)
        << " negative_samples=" << c.negative_samples << " seed=" << c.seed
        << " kl_interval=" << c.kl_interval << " kl_samples=" << c.kl_samples
        << " kl_bins=" << c.kl_bins << " kl_epsilon=" << fmt(c.kl_epsilon)
        << " kl_exact=" << (c.kl_exact ? 1 : 0);
    return out.str();
}

inline BqrbmTrainConfig parse_bqrbm_config(const std::map<std::string, std::string>& kv) {
    BqrbmTrainConfig c;
    c.minibatch = static_cast<int>(kv_num(kv, "minibatch"));
    c.epochs = static_cast<int>(kv_num(kv, "epochs"));
    c.eta0 = kv_num(kv, "eta0");
    c.t_decay = static_cast<int>(kv_num(kv, "t_decay"));
    c.T_decay = static_cast<int>(kv_num(kv, "T_decay"));
    c.eta_beta0 = kv_num(kv, "eta_beta0");
    c.beta_t_decay = static_cast<int>(kv_num(kv, "beta_t_decay"));
    c.beta_T_decay = static_cast<int>(kv_num(kv, "beta_T_decay"));
    c.beta_hat_init = kv_num(kv, "beta_hat_init");
    c.per_minibatch_beta = kv_num(kv, "per_minibatch_beta") != 0.0;
    c.negative_samples = static_cast<int>(kv_num(kv, "negative_samples"));
    c.seed = static_cast<std::uint64_t>(kv_num(kv, "seed"));
    c.kl_interval = static_cast<int>(kv_num(kv, "kl_interval"));
    c.kl_samples = static_cast<int>(kv_num(kv, "kl_samples"));
    c.kl_bins = static_cast<int>(kv_num(kv, "kl_bins"));
    c.kl_epsilon = kv_num(kv, "kl_epsilon");
    c.kl_exact = kv_num(kv, "kl_exact") != 0.0;
    return c;
}

} // namespace detail

inline void save_bqrbm(const std::string& path, const TrainedBqrbm& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << "qbm_forge_model v1\n";
    out << "type bqrbm\n";
    out << "visible " << model.params.n_visible() << "\n";
    out << "hidden " << model.params.n_hidden() << "\n";
    out << "epochs_trained " << model.epochs_trained << "\n";
    out << detail::bqrbm_config_line(model.config) << "\n";
    out << "curve " << model.curve_ref << "\n";
    out << "beta_hat " << detail::fmt(model.params.beta_hat) << "\n";
    out << "s_star " << detail::fmt(model.params.s_star) << "\n";
    out << "bias " << detail::fmt_vector(model.params.bias) << "\n";
    out << "gamma " << detail::fmt_vector(model.params.gamma) << "\n";
    out << "W\n";
    for (Eigen::Index i = 0; i < model.params.w.rows(); ++i)
        out << detail::fmt_vector(model.params.w.row(i).transpose()) << "\n";
    out << "end\n";
}

inline TrainedBqrbm load_bqrbm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    detail::expect_exact(in, "qbm_forge_model v1");
    detail::expect_exact(in, "type bqrbm");
    TrainedBqrbm model;
    const int n_v = static_cast<int>(detail::parse_int(detail::expect_keyword(in, "visible"), "visible"));
    const int n_h = static_cast<int>(detail::parse_int(detail::expect_keyword(in, "hidden"), "hidden"));
    if (n_v < 1 || n_h < 1) throw IoError("bad dimensions in " + path);
    model.epochs_trained = static_cast<int>(
        detail::parse_int(detail::expect_keyword(in, "epochs_trained"), "epochs_trained"));
    model.config = detail::parse_bqrbm_config(
        detail::parse_kv_line(detail::expect_line(in, "config"), "config"));
    model.curve_ref = detail::expect_keyword(in, "curve");
    model.params.beta_hat =
        detail::parse_vector(detail::expect_keyword(in, "beta_hat"), 1, "beta_hat")[0];
    model.params.s_star = detail::parse_vector(detail::expect_keyword(in, "s_star"), 1, "s_star")[0];
    model.params.bias = detail::parse_vector(detail::expect_keyword(in, "bias"), n_v + n_h, "bias");
    model.params.gamma = detail::parse_vector(detail::expect_keyword(in, "gamma"), n_v + n_h, "gamma");
    detail::expect_exact(in, "W");
    model.params.w.resize(n_v, n_h);
    for (int i = 0; i < n_v; ++i)
        model.params.w.row(i) =
            detail::parse_vector(detail::expect_line(in, "W row"), n_h, "W row").transpose();
    detail::expect_exact(in, "end");
    validate_params(model.params);
    return model;
}

inline void save_history(const std::string& path, const std::vector<BqrbmHistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history file: " + path);
    out << "epoch,lr,lr_beta,beta_hat,t_hat_mk,classical_limit,hw_in_range,kl\n";
    for (const auto& row : history) {
        out << row.epoch << "," << detail::fmt(row.lr) << "," << detail::fmt(row.lr_beta) << ","
            << detail::fmt(row.beta_hat) << "," << detail::fmt(row.t_hat_mk) << ","
            << (row.classical_limit ? 1 : 0) << "," << (row.hw_in_range ? 1 : 0) << ",";
        if (!std::isnan(row.kl)) out << detail::fmt(row.kl);
        out << "\n";
    }
}

} // namespace qbm_forge

#endif
