#ifndef QBM_FORGE_REPORT_HPP
#define QBM_FORGE_REPORT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "text_io.hpp"

namespace qbm_forge {

// ============================================================================
// Ensemble evaluation report: an ensemble of generated bit matrices (all laid
// out like the reference dataset) against the dataset itself.  Every model
// statistic is reported as mean +- sd across the ensemble; sd is the
// population standard deviation.
// ============================================================================

struct ReportOptions {
    int bins = 32;
    double epsilon = 1e-6;
    Eigen::VectorXd z_grid;  // tail concentration grid; empty selects 0.01..0.99
};

struct PairStat {
    int c1 = 0, c2 = 0;
    CorrelationTriple data;
    CorrelationTriple model_mean;
    CorrelationTriple model_sd;
};

struct QqCurve {
    int channel = 0;
    Eigen::VectorXd data_q;      // sorted dataset values
    Eigen::VectorXd model_mean;  // aligned order-statistic subsample, ensemble mean
    Eigen::VectorXd model_sd;
};

struct TailCurvePair {
    int c1 = 0, c2 = 0;
    Eigen::VectorXd z;
    Eigen::VectorXd l_data, r_data;
    Eigen::VectorXd l_mean, l_sd, r_mean, r_sd;
};

struct MetricsReport {
    std::vector<std::string> channels;
    int n_sets = 0;

    double mean_kl_mean = 0.0;  // channel-averaged marginal KL, then ensemble
    double mean_kl_sd = 0.0;
    Eigen::VectorXd kl_mean, kl_sd;  // per channel

    std::vector<PairStat> pairs;

    Eigen::VectorXd vol_data, vol_mean, vol_sd;  // annualized, per channel
    int n_conditional = 0;  // channels with a paired regime indicator
    Eigen::VectorXd vol_low_data, vol_low_mean, vol_low_sd;
    Eigen::VectorXd vol_high_data, vol_high_mean, vol_high_sd;

    Eigen::VectorXd p01_data, p01_mean, p01_sd;
    Eigen::VectorXd p99_data, p99_mean, p99_sd;

    std::vector<TailCurvePair> tail_curves;
    std::vector<QqCurve> qq;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / n)};
}

inline double annualized_volatility(const Eigen::VectorXd& x) {
    const Eigen::ArrayXd d = x.array() - x.mean();
    return std::sqrt(d.square().sum() / static_cast<double>(x.size())) *
           std::sqrt(kTradingDaysPerYear);
}

// Annualized volatility over the subset where the indicator equals `level`;
// NaN when the subset has fewer than two points.
inline double regime_volatility(const Eigen::VectorXd& x, const Eigen::VectorXi& indicator,
                                int level) {
    std::vector<double> sub;
    for (Eigen::Index t = 0; t < x.size(); ++t)
        if (indicator[t] == level) sub.push_back(x[t]);
    if (sub.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return annualized_volatility(Eigen::Map<Eigen::VectorXd>(sub.data(), sub.size()));
}

inline Eigen::VectorXd sorted_copy(const Eigen::VectorXd& x) {
    Eigen::VectorXd s = x;
    std::sort(s.data(), s.data() + s.size());
    return s;
}

// Order-statistic subsample of a sorted model vector aligned with N dataset
// quantile positions: index_i = floor((i + 0.5) * M / N).  With M == N this
// is the identity, so a dataset compared against itself matches exactly.
inline Eigen::VectorXd qq_subsample(const Eigen::VectorXd& sorted_model, Eigen::Index n_data) {
    const Eigen::Index m = sorted_model.size();
    Eigen::VectorXd out(n_data);
    for (Eigen::Index i = 0; i < n_data; ++i) {
        auto idx = static_cast<Eigen::Index>(
            std::floor((static_cast<double>(i) + 0.5) * static_cast<double>(m) /
                       static_cast<double>(n_data)));
        out[i] = sorted_model[std::min(idx, m - 1)];
    }
    return out;
}

inline std::string sanitize_label(const std::string& label) {
    std::string out = label;
    for (auto& ch : out)
        if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    return out;
}

} // namespace detail

inline MetricsReport report(const BitDataset& dataset,
                            const std::vector<Eigen::MatrixXi>& ensemble,
                            const ReportOptions& options = {}) {
    validate_dataset(dataset);
    if (ensemble.size() < 2)
        throw ValidationError("report needs an ensemble of >= 2 generated sets");
    for (const auto& bits : ensemble)
        if (bits.rows() != dataset.bits.rows() || bits.cols() < 1)
            throw ValidationError("ensemble bit matrix does not match dataset layout");

    const int n_ch = dataset.n_channels();
    const int n_sets = static_cast<int>(ensemble.size());
    const Eigen::MatrixXd data_values = decode_values(dataset);
    std::vector<Eigen::MatrixXd> model_values;
    model_values.reserve(ensemble.size());
    for (const auto& bits : ensemble) model_values.push_back(decode_values(dataset, bits));

    MetricsReport rep;
    rep.n_sets = n_sets;
    for (const auto& cc : dataset.codec) rep.channels.push_back(cc.label);

    Eigen::VectorXd z_grid = options.z_grid;
    if (z_grid.size() == 0) {
        z_grid.resize(99);
        for (int i = 0; i < 99; ++i) z_grid[i] = 0.01 * (i + 1);
    }

    // Marginal KL per channel with one shared binning across the ensemble.
    rep.kl_mean.resize(n_ch);
    rep.kl_sd.resize(n_ch);
    Eigen::MatrixXd kl(n_ch, n_sets);
    for (int c = 0; c < n_ch; ++c) {
        double lo = data_values.row(c).minCoeff();
        double hi = data_values.row(c).maxCoeff();
        for (const auto& mv : model_values) {
            lo = std::min(lo, mv.row(c).minCoeff());
            hi = std::max(hi, mv.row(c).maxCoeff());
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const auto range = std::make_optional(std::make_pair(lo, hi));
        const Histogram p = histogram(data_values.row(c).transpose(), options.bins, range);
        std::vector<double> per_set;
        for (int s = 0; s < n_sets; ++s) {
            const Histogram q = histogram(model_values[s].row(c).transpose(), options.bins, range);
            kl(c, s) = kl_divergence(p.probabilities, q.probabilities, KlSmoothing::kPlain,
                                     options.epsilon);
            per_set.push_back(kl(c, s));
        }
        std::tie(rep.kl_mean[c], rep.kl_sd[c]) = detail::mean_sd(per_set);
    }
    {
        std::vector<double> set_means;
        for (int s = 0; s < n_sets; ++s) set_means.push_back(kl.col(s).mean());
        std::tie(rep.mean_kl_mean, rep.mean_kl_sd) = detail::mean_sd(set_means);
    }

    // Pairwise correlations.
    for (int c1 = 0; c1 < n_ch; ++c1)
        for (int c2 = c1 + 1; c2 < n_ch; ++c2) {
            PairStat ps;
            ps.c1 = c1;
            ps.c2 = c2;
            ps.data = correlations(data_values.row(c1).transpose(), data_values.row(c2).transpose());
            std::vector<double> pe, sp, ke;
            for (const auto& mv : model_values) {
                const CorrelationTriple t =
                    correlations(mv.row(c1).transpose(), mv.row(c2).transpose());
                pe.push_back(t.pearson);
                sp.push_back(t.spearman);
                ke.push_back(t.kendall);
            }
            std::tie(ps.model_mean.pearson, ps.model_sd.pearson) = detail::mean_sd(pe);
            std::tie(ps.model_mean.spearman, ps.model_sd.spearman) = detail::mean_sd(sp);
            std::tie(ps.model_mean.kendall, ps.model_sd.kendall) = detail::mean_sd(ke);
            rep.pairs.push_back(ps);
        }

    // Volatility, unconditional and per indicator regime.
    rep.vol_data.resize(n_ch);
    rep.vol_mean.resize(n_ch);
    rep.vol_sd.resize(n_ch);
    rep.n_conditional =
        std::min<int>(n_ch, static_cast<int>(dataset.indicator_labels.size()));
    const int n_cond = rep.n_conditional;
    for (auto* v : {&rep.vol_low_data, &rep.vol_low_mean, &rep.vol_low_sd, &rep.vol_high_data,
                    &rep.vol_high_mean, &rep.vol_high_sd})
        v->resize(n_cond);
    const Eigen::MatrixXi data_ind = indicator_rows(dataset, dataset.bits);
    for (int c = 0; c < n_ch; ++c) {
        rep.vol_data[c] = detail::annualized_volatility(data_values.row(c).transpose());
        std::vector<double> vols;
        for (const auto& mv : model_values)
            vols.push_back(detail::annualized_volatility(mv.row(c).transpose()));
        std::tie(rep.vol_mean[c], rep.vol_sd[c]) = detail::mean_sd(vols);
        if (c >= n_cond) continue;
        rep.vol_low_data[c] =
            detail::regime_volatility(data_values.row(c).transpose(), data_ind.row(c).transpose(), 0);
        rep.vol_high_data[c] =
            detail::regime_volatility(data_values.row(c).transpose(), data_ind.row(c).transpose(), 1);
        std::vector<double> low, high;
        for (int s = 0; s < n_sets; ++s) {
            const Eigen::MatrixXi ind = indicator_rows(dataset, ensemble[s]);
            low.push_back(detail::regime_volatility(model_values[s].row(c).transpose(),
                                                    ind.row(c).transpose(), 0));
            high.push_back(detail::regime_volatility(model_values[s].row(c).transpose(),
                                                     ind.row(c).transpose(), 1));
        }
        std::tie(rep.vol_low_mean[c], rep.vol_low_sd[c]) = detail::mean_sd(low);
        std::tie(rep.vol_high_mean[c], rep.vol_high_sd[c]) = detail::mean_sd(high);
    }

    // Tail percentiles; NaN whenever a series is too short to rate them.
    for (auto* v : {&rep.p01_data, &rep.p01_mean, &rep.p01_sd, &rep.p99_data, &rep.p99_mean,
                    &rep.p99_sd})
        v->resize(n_ch);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int c = 0; c < n_ch; ++c) {
        if (data_values.cols() >= 100) {
            const TailStats td = tail_stats(data_values.row(c).transpose());
            rep.p01_data[c] = td.p01;
            rep.p99_data[c] = td.p99;
        } else {
            rep.p01_data[c] = nan;
            rep.p99_data[c] = nan;
        }
        std::vector<double> p01s, p99s;
        for (const auto& mv : model_values) {
            if (mv.cols() >= 100) {
                const TailStats tm = tail_stats(mv.row(c).transpose());
                p01s.push_back(tm.p01);
                p99s.push_back(tm.p99);
            } else {
                p01s.push_back(nan);
                p99s.push_back(nan);
            }
        }
        std::tie(rep.p01_mean[c], rep.p01_sd[c]) = detail::mean_sd(p01s);
        std::tie(rep.p99_mean[c], rep.p99_sd[c]) = detail::mean_sd(p99s);
    }

    // Tail concentration curves per channel pair.
    for (int c1 = 0; c1 < n_ch; ++c1)
        for (int c2 = c1 + 1; c2 < n_ch; ++c2) {
            TailCurvePair tc;
            tc.c1 = c1;
            tc.c2 = c2;
            const TailConcentration data_curve =
                tail_concentration(normalized_ranks(data_values.row(c1).transpose()),
                                   normalized_ranks(data_values.row(c2).transpose()), z_grid);
            tc.z = data_curve.z;
            tc.l_data = data_curve.l;
            tc.r_data = data_curve.r;
            Eigen::MatrixXd ls(tc.z.size(), n_sets), rs(tc.z.size(), n_sets);
            for (int s = 0; s < n_sets; ++s) {
                const TailConcentration mc =
                    tail_concentration(normalized_ranks(model_values[s].row(c1).transpose()),
                                       normalized_ranks(model_values[s].row(c2).transpose()), z_grid);
                ls.col(s) = mc.l;
                rs.col(s) = mc.r;
            }
            tc.l_mean.resize(tc.z.size());
            tc.l_sd.resize(tc.z.size());
            tc.r_mean.resize(tc.z.size());
            tc.r_sd.resize(tc.z.size());
            for (Eigen::Index zi = 0; zi < tc.z.size(); ++zi) {
                std::vector<double> lrow(n_sets), rrow(n_sets);
                for (int s = 0; s < n_sets; ++s) {
                    lrow[s] = ls(zi, s);
                    rrow[s] = rs(zi, s);
                }
                std::tie(tc.l_mean[zi], tc.l_sd[zi]) = detail::mean_sd(lrow);
                std::tie(tc.r_mean[zi], tc.r_sd[zi]) = detail::mean_sd(rrow);
            }
            rep.tail_curves.push_back(std::move(tc));
        }

    // Q-Q curves.
    for (int c = 0; c < n_ch; ++c) {
        QqCurve qc;
        qc.channel = c;
        qc.data_q = detail::sorted_copy(data_values.row(c).transpose());
        const Eigen::Index n = qc.data_q.size();
        Eigen::MatrixXd sub(n, n_sets);
        for (int s = 0; s < n_sets; ++s)
            sub.col(s) =
                detail::qq_subsample(detail::sorted_copy(model_values[s].row(c).transpose()), n);
        qc.model_mean.resize(n);
        qc.model_sd.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<double> row(n_sets);
            for (int s = 0; s < n_sets; ++s) row[s] = sub(i, s);
            std::tie(qc.model_mean[i], qc.model_sd[i]) = detail::mean_sd(row);
        }
        rep.qq.push_back(std::move(qc));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Writers: report.txt summary plus flat CSV files under `dir`.
// ---------------------------------------------------------------------------

inline void save_report(const std::string& dir, const MetricsReport& rep) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory: " + dir);
    const auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw IoError("cannot write report file: " + dir + "/" + name);
        return out;
    };
    const auto pm = [](std::ofstream& out, double mean, double sd) {
        out << detail::fmt(mean) << "," << detail::fmt(sd);
    };

    {
        auto out = open("report.txt");
        out << "qbm_forge metrics report\n";
        out << "sets " << rep.n_sets << "\n";
        out << "channels";
        for (const auto& ch : rep.channels) out << " " << ch;
        out << "\n";
        out << "mean_marginal_kl " << detail::fmt(rep.mean_kl_mean) << " +- "
            << detail::fmt(rep.mean_kl_sd) << "\n";
        for (std::size_t c = 0; c < rep.channels.size(); ++c) {
            out << "channel " << rep.channels[c] << " kl " << detail::fmt(rep.kl_mean[c]) << " +- "
                << detail::fmt(rep.kl_sd[c]) << " vol_ann " << detail::fmt(rep.vol_data[c])
                << " -> " << detail::fmt(rep.vol_mean[c]) << " +- " << detail::fmt(rep.vol_sd[c])
                << " p01 " << detail::fmt(rep.p01_data[c]) << " -> "
                << detail::fmt(rep.p01_mean[c]) << " p99 " << detail::fmt(rep.p99_data[c])
                << " -> " << detail::fmt(rep.p99_mean[c]) << "\n";
        }
        for (const auto& ps : rep.pairs) {
            out << "pair " << rep.channels[ps.c1] << ":" << rep.channels[ps.c2] << " pearson "
                << detail::fmt(ps.data.pearson) << " -> " << detail::fmt(ps.model_mean.pearson)
                << " +- " << detail::fmt(ps.model_sd.pearson) << " spearman "
                << detail::fmt(ps.data.spearman) << " -> " << detail::fmt(ps.model_mean.spearman)
                << " +- " << detail::fmt(ps.model_sd.spearman) << " kendall "
                << detail::fmt(ps.data.kendall) << " -> " << detail::fmt(ps.model_mean.kendall)
                << " +- " << detail::fmt(ps.model_sd.kendall) << "\n";
        }
        for (int c = 0; c < rep.n_conditional; ++c) {
            out << "regime " << rep.channels[c] << " low " << detail::fmt(rep.vol_low_data[c])
                << " -> " << detail::fmt(rep.vol_low_mean[c]) << " +- "
                << detail::fmt(rep.vol_low_sd[c]) << " high " << detail::fmt(rep.vol_high_data[c])
                << " -> " << detail::fmt(rep.vol_high_mean[c]) << " +- "
                << detail::fmt(rep.vol_high_sd[c]) << "\n";
        }
    }
    {
        auto out = open("kl.csv");
        out << "channel,kl_mean,kl_sd\n";
        for (std::size_t c = 0; c < rep.channels.size(); ++c) {
            out << rep.channels[c] << ",";
            pm(out, rep.kl_mean[c], rep.kl_sd[c]);
            out << "\n";
        }
    }
    {
        auto out = open("correlations.csv");
        out << "pair,stat,data,model_mean,model_sd\n";
        for (const auto& ps : rep.pairs) {
            const std::string pair = rep.channels[ps.c1] + ":" + rep.channels[ps.c2];
            out << pair << ",pearson," << detail::fmt(ps.data.pearson) << ",";
            pm(out, ps.model_mean.pearson, ps.model_sd.pearson);
            out << "\n" << pair << ",spearman," << detail::fmt(ps.data.spearman) << ",";
            pm(out, ps.model_mean.spearman, ps.model_sd.spearman);
            out << "\n" << pair << ",kendall," << detail::fmt(ps.data.kendall) << ",";
            pm(out, ps.model_mean.kendall, ps.model_sd.kendall);
            out << "\n";
        }
    }
    {
        auto out = open("volatility.csv");
        out << "channel,ann_data,ann_model_mean,ann_model_sd,low_data,low_model_mean,low_model_sd,"
               "high_data,high_model_mean,high_model_sd\n";
        for (std::size_t c = 0; c < rep.channels.size(); ++c) {
            out << rep.channels[c] << "," << detail::fmt(rep.vol_data[c]) << ",";
            pm(out, rep.vol_mean[c], rep.vol_sd[c]);
            if (static_cast<int>(c) < rep.n_conditional) {
                out << "," << detail::fmt(rep.vol_low_data[c]) << ",";
                pm(out, rep.vol_low_mean[c], rep.vol_low_sd[c]);
                out << "," << detail::fmt(rep.vol_high_data[c]) << ",";
                pm(out, rep.vol_high_mean[c], rep.vol_high_sd[c]);
            } else {
                out << ",,,,,,";
            }
            out << "\n";
        }
    }
    {
        auto out = open("tails.csv");
        out << "channel,p01_data,p01_model_mean,p01_model_sd,p99_data,p99_model_mean,p99_model_sd\n";
        for (std::size_t c = 0; c < rep.channels.size(); ++c) {
            out << rep.channels[c] << "," << detail::fmt(rep.p01_data[c]) << ",";
            pm(out, rep.p01_mean[c], rep.p01_sd[c]);
            out << "," << detail::fmt(rep.p99_data[c]) << ",";
            pm(out, rep.p99_mean[c], rep.p99_sd[c]);
            out << "\n";
        }
    }
    {
        auto out = open("tail_concentration.csv");
        out << "pair,z,side,data,model_mean,model_sd\n";
        for (const auto& tc : rep.tail_curves) {
            const std::string pair = rep.channels[tc.c1] + ":" + rep.channels[tc.c2];
            for (Eigen::Index zi = 0; zi < tc.z.size(); ++zi) {
                out << pair << "," << detail::fmt(tc.z[zi]) << ",L," << detail::fmt(tc.l_data[zi])
                    << ",";
                pm(out, tc.l_mean[zi], tc.l_sd[zi]);
                out << "\n" << pair << "," << detail::fmt(tc.z[zi]) << ",R,"
                    << detail::fmt(tc.r_data[zi]) << ",";
                pm(out, tc.r_mean[zi], tc.r_sd[zi]);
                out << "\n";
            }
        }
    }
    for (const auto& qc : rep.qq) {
        auto out = open("qq_" + detail::sanitize_label(rep.channels[qc.channel]) + ".csv");
        out << "data,model_mean,model_sd\n";
        for (Eigen::Index i = 0; i < qc.data_q.size(); ++i) {
            out << detail::fmt(qc.data_q[i]) << ",";
            pm(out, qc.model_mean[i], qc.model_sd[i]);
            out << "\n";
        }
    }
}

} // namespace qbm_forge

#endif
