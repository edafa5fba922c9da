#ifndef QBM_FORGE_METRICS_HPP
#define QBM_FORGE_METRICS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "exactspin.hpp"
#include "sampler.hpp"
#include "schedule.hpp"
#include "text_io.hpp"

namespace qbm_forge {

// ============================================================================
// Evaluation suite: histogram probabilities, smoothed KL divergence, the
// (s,T) KL heatmap scan, correlation coefficients, autocorrelation and
// integrated time, tails, tail concentration, and the full metrics report.
// ============================================================================

struct Histogram {
    Eigen::VectorXd bin_edges;      // length bins+1, strictly increasing
    Eigen::VectorXd probabilities;  // length bins, sums to 1
};

namespace detail {

inline Eigen::VectorXd linspace_edges(double lo, double hi, int bins) {
    Eigen::VectorXd edges(bins + 1);
    for (int b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * b / bins;
    return edges;
}

// Right-open bins except the last, which is closed so `hi` itself counts.
inline int bin_index(double x, double lo, double hi, int bins) {
    if (x < lo || x > hi) return -1;
    if (x == hi) return bins - 1;
    const int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
}

} // namespace detail

// Weighted histogram; out-of-range values are dropped and the remaining
// weight renormalized.  A degenerate range (all values equal) widens to
// +-0.5 around the common value.
inline Histogram weighted_histogram(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                                    int bins, std::optional<std::pair<double, double>> range = {}) {
    if (bins < 1) throw ValidationError("histogram needs >= 1 bin");
    if (values.size() < 1) throw ValidationError("histogram of empty input");
    if (weights.size() != values.size()) throw ValidationError("weight length mismatch");
    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
        if (!(lo < hi)) throw ValidationError("histogram range must satisfy lo < hi");
    } else {
        lo = values.minCoeff();
        hi = values.maxCoeff();
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
    Histogram h;
    h.bin_edges = detail::linspace_edges(lo, hi, bins);
    h.probabilities = Eigen::VectorXd::Zero(bins);
    double total = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const int b = detail::bin_index(values[i], lo, hi, bins);
        if (b < 0) continue;
        if (weights[i] < 0.0) throw ValidationError("negative histogram weight");
        h.probabilities[b] += weights[i];
        total += weights[i];
    }
    if (total <= 0.0) throw ValidationError("no histogram mass inside the requested range");
    h.probabilities /= total;
    return h;
}

inline Histogram histogram(const Eigen::VectorXd& values, int bins,
                           std::optional<std::pair<double, double>> range = {}) {
    return weighted_histogram(values, Eigen::VectorXd::Ones(values.size()), bins, range);
}

// --- KL divergence with the two smoothing conventions -----------------------

enum class KlSmoothing { kNone, kPlain, kRelative };

// Plain: zero q-entries become eps and the added mass is subtracted evenly
// from the nonzero entries.  Relative: zero entries become eps*p_i and the
// total added mass is subtracted evenly from the nonzero entries.  Either
// way the smoothed q still sums to the original total; entries must stay
// non-negative or the eps is rejected.
inline Eigen::VectorXd smooth_reference(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                                        KlSmoothing smoothing, double eps) {
    if (smoothing == KlSmoothing::kNone) return q;
    if (!(eps > 0.0)) throw ValidationError("smoothing eps must be positive");
    std::vector<Eigen::Index> zeros, nonzeros;
    for (Eigen::Index i = 0; i < q.size(); ++i)
        (q[i] == 0.0 ? zeros : nonzeros).push_back(i);
    if (zeros.empty()) return q;
    if (nonzeros.empty()) throw ValidationError("cannot smooth an all-zero reference");
    Eigen::VectorXd out = q;
    double added = 0.0;
    for (const auto i : zeros) {
        out[i] = smoothing == KlSmoothing::kPlain ? eps : eps * p[i];
        added += out[i];
    }
    const double per_entry = added / static_cast<double>(nonzeros.size());
    for (const auto i : nonzeros) out[i] -= per_entry;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (out[i] < 0.0)
            throw ValidationError("smoothing eps too large: a reference entry went negative");
    return out;
}

inline double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                            KlSmoothing smoothing = KlSmoothing::kNone, double eps = 1e-6) {
    if (p.size() != q.size() || p.size() < 1)
        throw ValidationError("kl_divergence needs aligned non-empty distributions");
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] < 0.0 || q[i] < 0.0) throw ValidationError("negative probability entry");
    if (std::abs(p.sum() - 1.0) > 1e-9) throw ValidationError("p must sum to 1");
    if (std::abs(q.sum() - 1.0) > 1e-9) throw ValidationError("q must sum to 1");
    const Eigen::VectorXd qs = smooth_reference(p, q, smoothing, eps);
    double d = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (qs[i] == 0.0) return std::numeric_limits<double>::infinity();
        d += p[i] * std::log(p[i] / qs[i]);
    }
    return std::max(d, 0.0);
}

// --- (s, T) KL heatmap scan -------------------------------------------------

struct KlGrid {
    Eigen::VectorXd s_values;
    Eigen::VectorXd temperatures_mk;
    Eigen::MatrixXd values;  // rows follow temperatures, columns follow s
    Eigen::VectorXd ridge_temperature_mk;  // per s; NaN where s < 0.5
};

// For each grid point, the theoretical energy distribution (diagonal of
// rho(s,T) aggregated by Ising energy) is compared against each sample set's
// energy histogram; the grid holds the ensemble mean of
// D_KL(theory || samples) under relative smoothing.  One shared binning
// covers the union of theoretical support and sampled energies so values are
// comparable across the grid.
inline KlGrid kl_heatmap(const IsingProblem& problem, const ScheduleCurve& curve,
                         const std::vector<SampleSet>& samples, const Eigen::VectorXd& s_values,
                         const Eigen::VectorXd& temperatures_mk, int bins = 32, double eps = 1e-6) {
    validate_problem(problem);
    validate_curve(curve);
    if (problem.n > kMaxDenseQubits)
        throw CapacityError("heatmap theory side needs n <= " + std::to_string(kMaxDenseQubits));
    if (samples.empty()) throw ValidationError("heatmap needs at least one sample set");
    if (s_values.size() < 1 || temperatures_mk.size() < 1)
        throw ValidationError("heatmap needs non-empty grids");
    for (Eigen::Index i = 0; i < s_values.size(); ++i)
        if (!(s_values[i] >= 0.0 && s_values[i] <= 1.0))
            throw ValidationError("heatmap s values must lie in [0, 1]");
    for (const auto& set : samples)
        if (set.n != problem.n) throw ValidationError("sample set size does not match problem");

    const SpinSystem sys = system_from_problem(problem);
    const int n = problem.n;
    const Eigen::Index dim = 1LL << n;
    // classical_energies carries the b = -h sign flip, so negate back.
    const Eigen::VectorXd state_energy = classical_energies(sys, 1.0);

    double lo = state_energy.minCoeff();
    double hi = state_energy.maxCoeff();
    for (const auto& set : samples) {
        lo = std::min(lo, set.energies.minCoeff());
        hi = std::max(hi, set.energies.maxCoeff());
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const auto range = std::make_optional(std::make_pair(lo, hi));

    std::vector<int> state_bin(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
        state_bin[k] = detail::bin_index(state_energy[k], lo, hi, bins);

    std::vector<Eigen::VectorXd> sample_hists;
    sample_hists.reserve(samples.size());
    for (const auto& set : samples)
        sample_hists.push_back(
            weighted_histogram(set.energies, set.occurrences.cast<double>(), bins, range).probabilities);

    KlGrid grid;
    grid.s_values = s_values;
    grid.temperatures_mk = temperatures_mk;
    grid.values.resize(temperatures_mk.size(), s_values.size());

    for (Eigen::Index si = 0; si < s_values.size(); ++si) {
        const CurvePoint pt = interpolate_curve(curve, s_values[si]);
        const bool diagonal = (pt.a_ghz * sys.gamma.array() == 0.0).all();
        // bin_weight(b, j): total squared eigenvector mass of eigenstate j over
        // basis states in energy bin b; theory histogram is bin_weight * w(beta).
        Eigen::MatrixXd bin_weight;
        Eigen::VectorXd eigenvalues;
        if (diagonal) {
            eigenvalues = pt.b_ghz * state_energy;
            bin_weight = Eigen::MatrixXd::Zero(bins, dim);
            for (Eigen::Index k = 0; k < dim; ++k) bin_weight(state_bin[k], k) = 1.0;
        } else {
            ExactModel model = diagonalize(sys, pt.a_ghz, pt.b_ghz);
            eigenvalues = model.eigenvalues;
            bin_weight = Eigen::MatrixXd::Zero(bins, dim);
            for (Eigen::Index j = 0; j < dim; ++j)
                for (Eigen::Index k = 0; k < dim; ++k)
                    bin_weight(state_bin[k], j) += model.eigenvectors(k, j) * model.eigenvectors(k, j);
        }
        const double e0 = eigenvalues.minCoeff();
        for (Eigen::Index ti = 0; ti < temperatures_mk.size(); ++ti) {
            const double beta = temperature_mk_to_beta(temperatures_mk[ti]);
            Eigen::VectorXd w = (-(beta * (eigenvalues.array() - e0))).exp();
            w /= w.sum();
            const Eigen::VectorXd theory = bin_weight * w;
            double acc = 0.0;
            for (const auto& q : sample_hists)
                acc += kl_divergence(theory, q, KlSmoothing::kRelative, eps);
            grid.values(ti, si) = acc / static_cast<double>(sample_hists.size());
        }
    }

    grid.ridge_temperature_mk =
        Eigen::VectorXd::Constant(s_values.size(), std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index si = 0; si < s_values.size(); ++si) {
        if (s_values[si] < 0.5) continue;
        Eigen::Index best;
        grid.values.col(si).minCoeff(&best);
        grid.ridge_temperature_mk[si] = temperatures_mk[best];
    }
    return grid;
}

// CSV matrix with axis header rows (first row s axis, first column T axis),
// plus an optional per-s ridge file with the B(s)/T diagnostic.
inline void save_kl_grid(const std::string& path, const KlGrid& grid,
                         const std::string& ridge_path = "", const ScheduleCurve* curve = nullptr) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write heatmap file: " + path);
    out << "T_mK";
    for (Eigen::Index si = 0; si < grid.s_values.size(); ++si)
        out << "," << detail::fmt(grid.s_values[si]);
    out << "\n";
    for (Eigen::Index ti = 0; ti < grid.temperatures_mk.size(); ++ti) {
        out << detail::fmt(grid.temperatures_mk[ti]);
        for (Eigen::Index si = 0; si < grid.s_values.size(); ++si)
            out << "," << detail::fmt(grid.values(ti, si));
        out << "\n";
    }
    if (ridge_path.empty()) return;
    std::ofstream ridge(ridge_path);
    if (!ridge) throw IoError("cannot write ridge file: " + ridge_path);
    ridge << "s,argmin_T_mK,B_over_T\n";
    for (Eigen::Index si = 0; si < grid.s_values.size(); ++si) {
        const double t = grid.ridge_temperature_mk[si];
        if (std::isnan(t)) continue;
        ridge << detail::fmt(grid.s_values[si]) << "," << detail::fmt(t) << ",";
        if (curve) ridge << detail::fmt(interpolate_curve(*curve, grid.s_values[si]).b_ghz / t);
        ridge << "\n";
    }
}

// --- correlation coefficients ----------------------------------------------

struct CorrelationTriple {
    double pearson = 0.0;
    double spearman = 0.0;
    double kendall = 0.0;
};

// Average ranks on ties, 1-based.
inline Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ValidationError("correlation needs two equal-length vectors of >= 2 points");
    const Eigen::ArrayXd dx = x.array() - x.mean();
    const Eigen::ArrayXd dy = y.array() - y.mean();
    const double denom = std::sqrt(dx.square().sum() * dy.square().sum());
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (dx * dy).sum() / denom;
}

inline CorrelationTriple correlations(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    CorrelationTriple c;
    c.pearson = pearson(x, y);
    c.spearman = pearson(average_ranks(x), average_ranks(y));
    const Eigen::Index n = x.size();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double sx = x[i] == x[j] ? 0.0 : (x[i] < x[j] ? -1.0 : 1.0);
            const double sy = y[i] == y[j] ? 0.0 : (y[i] < y[j] ? -1.0 : 1.0);
            sum += sx * sy;
        }
    c.kendall = 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
    return c;
}

// --- autocorrelation and integrated time -----------------------------------

inline Eigen::VectorXd acf(const Eigen::VectorXd& x, int max_lag) {
    const Eigen::Index n = x.size();
    if (max_lag < 0) throw ValidationError("max_lag must be >= 0");
    if (n <= 2 * static_cast<Eigen::Index>(max_lag))
        throw ValidationError("series must be longer than twice max_lag");
    const double mean = x.mean();
    const Eigen::ArrayXd d = x.array() - mean;
    const double c0 = d.square().sum() / static_cast<double>(n);
    Eigen::VectorXd rho(max_lag + 1);
    if (c0 == 0.0) {
        rho.setConstant(std::numeric_limits<double>::quiet_NaN());
        return rho;
    }
    rho[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) {
        const double ck = (d.head(n - k) * d.tail(n - k)).sum() / static_cast<double>(n);
        rho[k] = ck / c0;
    }
    return rho;
}

// tau = 1 + 2 sum rho_k truncated at the smallest window W >= c*tau(W)
// (c = 5), the window rule of the Goodman-Weare-style estimator.  The
// candidate window grows geometrically until the rule is satisfied.
inline double integrated_time(const Eigen::VectorXd& x, double c = 5.0) {
    const Eigen::Index n = x.size();
    if (n < 10) throw ValidationError("series too short for integrated time");
    int max_lag = static_cast<int>(std::min<Eigen::Index>(100, (n - 1) / 2));
    while (true) {
        const Eigen::VectorXd rho = acf(x, max_lag);
        if (std::isnan(rho[0])) return std::numeric_limits<double>::quiet_NaN();
        double tau = 1.0;
        for (int w = 1; w <= max_lag; ++w) {
            tau += 2.0 * rho[w];
            if (static_cast<double>(w) >= c * tau) return tau;
        }
        if (max_lag >= (n - 1) / 2) return tau;  // window never closed; best effort
        max_lag = static_cast<int>(std::min<Eigen::Index>(2LL * max_lag, (n - 1) / 2));
    }
}

// --- tails ------------------------------------------------------------------

// Linear interpolation between order statistics.
inline double quantile(Eigen::VectorXd values, double q) {
    if (values.size() < 1) throw ValidationError("quantile of empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
    std::sort(values.data(), values.data() + values.size());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(h));
    if (lo + 1 >= values.size()) return values[values.size() - 1];
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

struct TailStats {
    double p01 = 0.0;
    double p99 = 0.0;
};

inline TailStats tail_stats(const Eigen::VectorXd& values) {
    if (values.size() < 100)
        throw ValidationError("tail percentiles need >= 100 points");
    return {quantile(values, 0.01), quantile(values, 0.99)};
}

inline Eigen::VectorXd normalized_ranks(const Eigen::VectorXd& x) {
    return average_ranks(x) / static_cast<double>(x.size());
}

struct TailConcentration {
    Eigen::VectorXd z;  // degenerate grid entries (z <= 0 or z >= 1) excluded
    Eigen::VectorXd l;  // C(z,z)/z
    Eigen::VectorXd r;  // (1 - 2z + C(z,z))/(1 - z)
};

inline TailConcentration tail_concentration(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                            const Eigen::VectorXd& z_grid) {
    if (u1.size() != u2.size() || u1.size() < 1)
        throw ValidationError("tail concentration needs two equal-length rank vectors");
    for (Eigen::Index i = 0; i < u1.size(); ++i)
        if (u1[i] < 0.0 || u1[i] > 1.0 || u2[i] < 0.0 || u2[i] > 1.0)
            throw ValidationError("normalized ranks must lie in [0, 1]");
    std::vector<double> zs;
    for (Eigen::Index i = 0; i < z_grid.size(); ++i)
        if (z_grid[i] > 0.0 && z_grid[i] < 1.0) zs.push_back(z_grid[i]);
    TailConcentration out;
    out.z = Eigen::Map<Eigen::VectorXd>(zs.data(), zs.size());
    out.l.resize(out.z.size());
    out.r.resize(out.z.size());
    const double n = static_cast<double>(u1.size());
    for (Eigen::Index zi = 0; zi < out.z.size(); ++zi) {
        const double z = out.z[zi];
        double joint = 0.0;
        for (Eigen::Index i = 0; i < u1.size(); ++i)
            if (u1[i] <= z && u2[i] <= z) joint += 1.0;
        const double c = joint / n;
        out.l[zi] = c / z;
        out.r[zi] = (1.0 - 2.0 * z + c) / (1.0 - z);
    }
    return out;
}

// --- mean per-channel KL for training history -------------------------------

// Channels of both matrices are decoded through the dataset's codec; each
// channel gets one shared binning over the union range, plain smoothing, and
// the channel KLs are averaged.
inline double dataset_kl(const BitDataset& dataset, const Eigen::MatrixXi& sample_bits,
                         int bins = 32, double eps = 1e-6) {
    validate_dataset(dataset);
    if (sample_bits.rows() != dataset.bits.rows())
        throw ValidationError("sample bit rows do not match dataset layout");
    const Eigen::MatrixXd data_values = decode_values(dataset);
    const Eigen::MatrixXd model_values = decode_values(dataset, sample_bits);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < data_values.rows(); ++c) {
        const double lo = std::min(data_values.row(c).minCoeff(), model_values.row(c).minCoeff());
        const double hi = std::max(data_values.row(c).maxCoeff(), model_values.row(c).maxCoeff());
        const auto range = std::make_optional(std::make_pair(std::min(lo, hi - 1e-12), std::max(hi, lo + 1e-12)));
        const Histogram p = histogram(data_values.row(c).transpose(), bins, range);
        const Histogram q = histogram(model_values.row(c).transpose(), bins, range);
        acc += kl_divergence(p.probabilities, q.probabilities, KlSmoothing::kPlain, eps);
    }
    return acc / static_cast<double>(data_values.rows());
}

} // namespace qbm_forge

#endif
