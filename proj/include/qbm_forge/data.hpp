#ifndef QBM_FORGE_DATA_HPP
#define QBM_FORGE_DATA_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "text_io.hpp"

namespace qbm_forge {

// ============================================================================
// Data ingestion and preprocessing: OHLC series -> log returns -> filtering
// -> optional outlier power transform -> fixed-point discretization -> bit
// encoding, plus rolling-volatility regime indicators and a synthetic
// bimodal generator for the small reproduction experiments.
// ============================================================================

inline constexpr double kTradingDaysPerYear = 252.0;

struct OhlcRow {
    std::string date;  // ISO yyyy-mm-dd
    double open = 0.0, high = 0.0, low = 0.0, close = 0.0, volume = 0.0;
};

struct OhlcSeries {
    std::string label;
    std::vector<OhlcRow> rows;
};

inline void validate_series(const OhlcSeries& s) {
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        const auto& r = s.rows[i];
        if (!(r.open > 0.0) || !(r.close > 0.0))
            throw ValidationError(s.label + " " + r.date + ": open/close must be positive");
        if (i > 0 && !(s.rows[i - 1].date < r.date))
            throw ValidationError(s.label + ": dates must be strictly increasing at " + r.date);
    }
}

// One file per pair: header `date,open,high,low,close,volume`, ISO dates.
inline OhlcSeries load_ohlc_csv(const std::string& path, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OHLC file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty OHLC file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,open,high,low,close,volume")
        throw IoError(path + ": header must be 'date,open,high,low,close,volume'");
    OhlcSeries s;
    s.label = label;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f[6];
        for (int i = 0; i < 6; ++i)
            if (!std::getline(row, f[i], ','))
                throw IoError(path + " line " + std::to_string(lineno) + ": expected 6 fields");
        OhlcRow r;
        r.date = f[0];
        try {
            r.open = std::stod(f[1]);
            r.high = std::stod(f[2]);
            r.low = std::stod(f[3]);
            r.close = std::stod(f[4]);
            r.volume = std::stod(f[5]);
        } catch (const std::exception&) {
            throw IoError(path + " line " + std::to_string(lineno) + ": bad number");
        }
        s.rows.push_back(std::move(r));
    }
    validate_series(s);
    return s;
}

// Plain date-per-line file; blank lines ignored.
inline std::set<std::string> load_holiday_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open holiday file: " + path);
    std::set<std::string> days;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) days.insert(line);
    }
    return days;
}

// Pairs aligned on their common dates.
struct JoinedTable {
    std::vector<std::string> dates;
    std::vector<OhlcSeries> pairs;  // each pair's rows parallel to `dates`
};

inline JoinedTable join_on_dates(const std::vector<OhlcSeries>& series) {
    if (series.empty()) throw ValidationError("need at least one OHLC series");
    for (const auto& s : series) validate_series(s);
    std::map<std::string, int> date_hits;
    for (const auto& s : series)
        for (const auto& r : s.rows) ++date_hits[r.date];
    JoinedTable t;
    for (const auto& [date, hits] : date_hits)
        if (hits == static_cast<int>(series.size())) t.dates.push_back(date);
    if (t.dates.empty()) throw ValidationError("no dates shared by all pairs");
    for (const auto& s : series) {
        std::map<std::string, const OhlcRow*> by_date;
        for (const auto& r : s.rows) by_date[r.date] = &r;
        OhlcSeries aligned;
        aligned.label = s.label;
        for (const auto& d : t.dates) aligned.rows.push_back(*by_date.at(d));
        t.pairs.push_back(std::move(aligned));
    }
    return t;
}

// Close-to-close: r_t = log(close_{t+1} / close_t), one fewer entry than rows.
inline Eigen::VectorXd log_returns(const OhlcSeries& s) {
    validate_series(s);
    if (s.rows.size() < 2) throw ValidationError("need at least two rows for returns");
    Eigen::VectorXd r(s.rows.size() - 1);
    for (std::size_t i = 0; i + 1 < s.rows.size(); ++i)
        r[i] = std::log(s.rows[i + 1].close / s.rows[i].close);
    return r;
}

// Channels x (N - 1) matrix of per-pair daily log returns.
inline Eigen::MatrixXd log_returns(const JoinedTable& t) {
    if (t.dates.size() < 2) throw ValidationError("need at least two rows for returns");
    Eigen::MatrixXd m(t.pairs.size(), t.dates.size() - 1);
    for (std::size_t p = 0; p < t.pairs.size(); ++p) m.row(p) = log_returns(t.pairs[p]).transpose();
    return m;
}

// Keep flags under the k-sigma rule: a column is dropped when any channel
// deviates *strictly* more than k standard deviations from that channel's
// mean.  Mean and (population) sigma come from the full input in one pass.
inline std::vector<bool> outlier_keep_mask(const Eigen::MatrixXd& returns, double k) {
    if (!(k > 0.0)) throw ValidationError("outlier threshold k must be positive");
    const auto channels = returns.rows();
    const auto n = returns.cols();
    if (n < 1) throw ValidationError("empty returns matrix");
    std::vector<bool> keep(n, true);
    for (Eigen::Index c = 0; c < channels; ++c) {
        const double mean = returns.row(c).mean();
        const double var = (returns.row(c).array() - mean).square().mean();
        const double sigma = std::sqrt(var);
        if (sigma == 0.0) continue;
        for (Eigen::Index t = 0; t < n; ++t)
            if (std::abs(returns(c, t) - mean) > k * sigma) keep[t] = false;
    }
    return keep;
}

struct FilterRules {
    bool drop_zero_volume = true;
    std::set<std::string> holidays;
    double outlier_k = 10.0;
};

// Zero-volume and holiday rows go first; the k-sigma rule then sees the
// surviving rows' log returns (single pass, no re-filtering).
inline JoinedTable filter_rows(const JoinedTable& table, const FilterRules& rules) {
    const auto n = table.dates.size();
    std::vector<bool> keep(n, true);
    for (std::size_t t = 0; t < n; ++t) {
        if (rules.holidays.count(table.dates[t])) keep[t] = false;
        if (rules.drop_zero_volume)
            for (const auto& p : table.pairs)
                if (p.rows[t].volume == 0.0) keep[t] = false;
    }
    JoinedTable pass1;
    pass1.pairs.resize(table.pairs.size());
    for (std::size_t p = 0; p < table.pairs.size(); ++p) pass1.pairs[p].label = table.pairs[p].label;
    for (std::size_t t = 0; t < n; ++t) {
        if (!keep[t]) continue;
        pass1.dates.push_back(table.dates[t]);
        for (std::size_t p = 0; p < table.pairs.size(); ++p)
            pass1.pairs[p].rows.push_back(table.pairs[p].rows[t]);
    }
    if (pass1.dates.size() < 2) throw ValidationError("filtering left fewer than two rows");
    // keep2[t] rates the move into row t + 1; the first surviving row always
    // stays, so an outlier day drops exactly the row where the move landed.
    const std::vector<bool> keep2 = outlier_keep_mask(log_returns(pass1), rules.outlier_k);
    JoinedTable out;
    out.pairs.resize(table.pairs.size());
    for (std::size_t p = 0; p < table.pairs.size(); ++p) out.pairs[p].label = table.pairs[p].label;
    out.dates.push_back(pass1.dates[0]);
    for (std::size_t p = 0; p < table.pairs.size(); ++p)
        out.pairs[p].rows.push_back(pass1.pairs[p].rows[0]);
    for (std::size_t t = 0; t + 1 < pass1.dates.size(); ++t) {
        if (!keep2[t]) continue;
        out.dates.push_back(pass1.dates[t + 1]);
        for (std::size_t p = 0; p < table.pairs.size(); ++p)
            out.pairs[p].rows.push_back(pass1.pairs[p].rows[t + 1]);
    }
    if (out.dates.size() < 2) throw ValidationError("filtering removed every row");
    return out;
}

// --- outlier power transform ------------------------------------------------

struct TransformStats {
    double alpha = 1.0;
    double tau = 1.0;
    double mean = 0.0;
    double sigma = 1.0;
    double delta = 0.0;
};

// Standardize, then compress the tails: standardized values with |x| > tau
// map to (|x|^alpha + delta) sign(x), delta = tau - tau^alpha keeping the map
// continuous and strictly monotone, then unstandardize.  Values inside the
// threshold pass through bit for bit.
inline Eigen::VectorXd outlier_power_transform(const Eigen::VectorXd& x, double alpha, double tau,
                                               TransformStats& stats) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    if (x.size() < 1) throw ValidationError("empty input vector");
    stats.alpha = alpha;
    stats.tau = tau;
    stats.mean = x.mean();
    stats.sigma = std::sqrt((x.array() - stats.mean).square().mean());
    if (stats.sigma == 0.0) throw ValidationError("transform undefined for zero-variance input");
    stats.delta = tau - std::pow(tau, alpha);
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double z = (x[i] - stats.mean) / stats.sigma;
        if (std::abs(z) > tau) {
            const double zt = (std::pow(std::abs(z), alpha) + stats.delta) * (z < 0 ? -1.0 : 1.0);
            y[i] = zt * stats.sigma + stats.mean;
        } else {
            y[i] = x[i];
        }
    }
    return y;
}

inline Eigen::VectorXd inverse_transform(const Eigen::VectorXd& y, const TransformStats& stats) {
    if (!(stats.sigma > 0.0)) throw ValidationError("bad transform stats: sigma must be positive");
    Eigen::VectorXd x(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double z = (y[i] - stats.mean) / stats.sigma;
        if (std::abs(z) > stats.tau) {
            const double zt = std::pow(std::abs(z) - stats.delta, 1.0 / stats.alpha) * (z < 0 ? -1.0 : 1.0);
            x[i] = zt * stats.sigma + stats.mean;
        } else {
            x[i] = y[i];
        }
    }
    return x;
}

// --- discretization and bit codec ------------------------------------------

struct ChannelCodec {
    std::string label;
    double min = 0.0;
    double max = 1.0;
    int n_bits = 8;
    int levels() const { return (1 << n_bits) - 1; }  // highest level index
};

struct Discretized {
    Eigen::MatrixXi values;  // channels x N
    std::vector<ChannelCodec> codec;
};

// x' = round((x - min)/(max - min) * (2^n_bits - 1)), ties to nearest even
// (std::nearbyint under the default rounding mode).
inline Discretized discretize(const Eigen::MatrixXd& x, int n_bits,
                              const std::vector<std::string>& labels = {}) {
    if (n_bits < 1 || n_bits > 30) throw ValidationError("n_bits must lie in [1, 30]");
    if (x.rows() < 1 || x.cols() < 1) throw ValidationError("empty value matrix");
    if (!x.allFinite()) throw ValidationError("non-finite value in discretize input");
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != x.rows())
        throw ValidationError("label count must match channel count");
    Discretized d;
    d.values.resize(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        ChannelCodec codec;
        codec.label = labels.empty() ? "ch" + std::to_string(c) : labels[c];
        codec.min = x.row(c).minCoeff();
        codec.max = x.row(c).maxCoeff();
        codec.n_bits = n_bits;
        if (!(codec.max > codec.min))
            throw ValidationError("channel " + codec.label + " is constant; discretization undefined");
        const double span = codec.max - codec.min;
        for (Eigen::Index t = 0; t < x.cols(); ++t)
            d.values(c, t) = static_cast<int>(
                std::nearbyint((x(c, t) - codec.min) / span * codec.levels()));
        d.codec.push_back(std::move(codec));
    }
    return d;
}

inline Eigen::MatrixXd undiscretize(const std::vector<ChannelCodec>& codec,
                                    const Eigen::MatrixXi& values) {
    if (values.rows() != static_cast<Eigen::Index>(codec.size()))
        throw ValidationError("codec channel count must match value rows");
    Eigen::MatrixXd x(values.rows(), values.cols());
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
        const auto& cc = codec[c];
        for (Eigen::Index t = 0; t < values.cols(); ++t) {
            if (values(c, t) < 0 || values(c, t) > cc.levels())
                throw ValidationError("level out of range for channel " + cc.label);
            x(c, t) = cc.min + static_cast<double>(values(c, t)) / cc.levels() * (cc.max - cc.min);
        }
    }
    return x;
}

// Big-endian fixed-width bits, channel blocks stacked in channel order.
inline Eigen::MatrixXi encode_bits(const Eigen::MatrixXi& values, const std::vector<ChannelCodec>& codec) {
    if (values.rows() != static_cast<Eigen::Index>(codec.size()))
        throw ValidationError("codec channel count must match value rows");
    int rows = 0;
    for (const auto& cc : codec) rows += cc.n_bits;
    Eigen::MatrixXi bits(rows, values.cols());
    int offset = 0;
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
        const int nb = codec[c].n_bits;
        for (Eigen::Index t = 0; t < values.cols(); ++t) {
            const int v = values(c, t);
            if (v < 0 || v > codec[c].levels())
                throw ValidationError("value out of range for " + std::to_string(nb) + " bits");
            for (int b = 0; b < nb; ++b) bits(offset + b, t) = (v >> (nb - 1 - b)) & 1;
        }
        offset += nb;
    }
    return bits;
}

inline Eigen::MatrixXi decode_bits(const Eigen::MatrixXi& bits, const std::vector<ChannelCodec>& codec) {
    int rows = 0;
    for (const auto& cc : codec) rows += cc.n_bits;
    if (bits.rows() < rows)
        throw ValidationError("bit matrix has fewer rows than the codec expects");
    Eigen::MatrixXi values(codec.size(), bits.cols());
    int offset = 0;
    for (std::size_t c = 0; c < codec.size(); ++c) {
        const int nb = codec[c].n_bits;
        for (Eigen::Index t = 0; t < bits.cols(); ++t) {
            int v = 0;
            for (int b = 0; b < nb; ++b) {
                const int bit = bits(offset + b, t);
                if (bit != 0 && bit != 1) throw ValidationError("bit entries must be 0/1");
                v = (v << 1) | bit;
            }
            values(c, t) = v;
        }
        offset += nb;
    }
    return values;
}

// --- volatility regime indicator -------------------------------------------

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Rolling annualized volatility (sqrt(252) * population std over `window`
// trailing points) against the median of the complete-window series.  At or
// below the median -> 0, above -> 1.  The first window-1 entries reuse the
// first complete window's value.
inline Eigen::VectorXi volatility_indicator(const Eigen::VectorXd& returns, int window = 63) {
    if (window < 2) throw ValidationError("volatility window must be >= 2");
    const auto n = returns.size();
    if (n <= window) throw ValidationError("series must be longer than the volatility window");
    std::vector<double> vol(n);
    for (Eigen::Index t = window - 1; t < n; ++t) {
        const auto seg = returns.segment(t - window + 1, window);
        const double mean = seg.mean();
        vol[t] = std::sqrt(kTradingDaysPerYear * (seg.array() - mean).square().mean());
    }
    for (Eigen::Index t = 0; t < window - 1; ++t) vol[t] = vol[window - 1];
    const double med = median_of(std::vector<double>(vol.begin() + window - 1, vol.end()));
    Eigen::VectorXi bit(n);
    for (Eigen::Index t = 0; t < n; ++t) bit[t] = vol[t] > med ? 1 : 0;
    return bit;
}

// --- the dataset container --------------------------------------------------

struct BitDataset {
    Eigen::MatrixXi bits;  // (sum of channel bits + indicator rows) x N
    std::vector<ChannelCodec> codec;
    std::vector<TransformStats> transform;     // empty, or one per channel
    std::vector<std::string> indicator_labels; // one appended row each

    int n_samples() const { return static_cast<int>(bits.cols()); }
    int n_channels() const { return static_cast<int>(codec.size()); }
    int channel_rows() const {
        int r = 0;
        for (const auto& cc : codec) r += cc.n_bits;
        return r;
    }
    int n_rows() const { return channel_rows() + static_cast<int>(indicator_labels.size()); }
};

inline void validate_dataset(const BitDataset& d) {
    if (d.codec.empty()) throw ValidationError("dataset needs at least one channel");
    if (d.bits.rows() != d.n_rows())
        throw ValidationError("bit rows do not match codec layout plus indicators");
    if (d.bits.cols() < 1) throw ValidationError("dataset needs at least one sample");
    if (!d.transform.empty() && d.transform.size() != d.codec.size())
        throw ValidationError("transform stats must cover every channel or none");
    for (Eigen::Index r = 0; r < d.bits.rows(); ++r)
        for (Eigen::Index c = 0; c < d.bits.cols(); ++c)
            if (d.bits(r, c) != 0 && d.bits(r, c) != 1)
                throw ValidationError("dataset bits must be 0/1");
}

// Real-valued channels recovered from a bit matrix laid out like `d`:
// bits -> levels -> linear values -> inverse transform when stats exist.
inline Eigen::MatrixXd decode_values(const BitDataset& d, const Eigen::MatrixXi& bits) {
    Eigen::MatrixXd x = undiscretize(d.codec, decode_bits(bits, d.codec));
    if (!d.transform.empty())
        for (Eigen::Index c = 0; c < x.rows(); ++c)
            x.row(c) = inverse_transform(x.row(c).transpose(), d.transform[c]).transpose();
    return x;
}

inline Eigen::MatrixXd decode_values(const BitDataset& d) { return decode_values(d, d.bits); }

// Indicator rows of a bit matrix laid out like `d` (empty matrix when the
// dataset carries no indicators).
inline Eigen::MatrixXi indicator_rows(const BitDataset& d, const Eigen::MatrixXi& bits) {
    const int nr = static_cast<int>(d.indicator_labels.size());
    if (bits.rows() != d.n_rows())
        throw ValidationError("bit matrix rows do not match dataset layout");
    return bits.bottomRows(nr);
}

// Two-Gaussian mixture, one channel, deterministic per seed.
inline BitDataset synthetic_bimodal(int n1, double mu1, int n2, double mu2, double sigma,
                                    int n_bits, std::uint64_t seed) {
    if (n1 < 1 || n2 < 0) throw ValidationError("need n1 >= 1 and n2 >= 0 draws");
    if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
    Rng rng(seed);
    Eigen::MatrixXd x(1, n1 + n2);
    for (int i = 0; i < n1; ++i) x(0, i) = rng.normal(mu1, sigma);
    for (int i = 0; i < n2; ++i) x(0, n1 + i) = rng.normal(mu2, sigma);
    Discretized d = discretize(x, n_bits, {"bimodal"});
    BitDataset out;
    out.bits = encode_bits(d.values, d.codec);
    out.codec = std::move(d.codec);
    return out;
}

// --- persistence -----------------------------------------------------------
// Structured text: header lines, one `channel` line per channel with codec
// (and optional transform) fields, optional `indicator` lines, then a `bits`
// block with one line of 0/1 characters per sample in row order.

inline void save_dataset(const std::string& path, const BitDataset& d) {
    validate_dataset(d);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    char buf[512];
    out << "qbm_forge_dataset v1\n";
    out << "samples " << d.n_samples() << "\n";
    out << "channels " << d.n_channels() << "\n";
    for (int c = 0; c < d.n_channels(); ++c) {
        const auto& cc = d.codec[c];
        std::snprintf(buf, sizeof buf, "channel %s bits=%d min=%.17g max=%.17g", cc.label.c_str(),
                      cc.n_bits, cc.min, cc.max);
        out << buf;
        if (!d.transform.empty()) {
            const auto& ts = d.transform[c];
            std::snprintf(buf, sizeof buf,
                          " transform alpha=%.17g tau=%.17g mean=%.17g sigma=%.17g delta=%.17g",
                          ts.alpha, ts.tau, ts.mean, ts.sigma, ts.delta);
            out << buf;
        }
        out << "\n";
    }
    for (const auto& name : d.indicator_labels) out << "indicator " << name << "\n";
    out << "bits\n";
    std::string line(d.n_rows(), '0');
    for (int t = 0; t < d.n_samples(); ++t) {
        for (int r = 0; r < d.n_rows(); ++r) line[r] = d.bits(r, t) ? '1' : '0';
        out << line << "\n";
    }
    out << "end\n";
}

inline BitDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "qbm_forge_dataset v1")
        throw IoError(path + ": not a qbm_forge dataset file");
    BitDataset d;
    int samples = -1, channels = -1;
    auto parse_kv = [](const std::string& tok, const std::string& key) -> std::string {
        if (tok.rfind(key + "=", 0) != 0) throw IoError("expected '" + key + "=...', got '" + tok + "'");
        return tok.substr(key.size() + 1);
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "bits") break;
        std::istringstream row(line);
        std::string word;
        row >> word;
        if (word == "samples") row >> samples;
        else if (word == "channels") row >> channels;
        else if (word == "channel") {
            ChannelCodec cc;
            std::string tok;
            row >> cc.label;
            row >> tok; cc.n_bits = std::stoi(parse_kv(tok, "bits"));
            row >> tok; cc.min = std::stod(parse_kv(tok, "min"));
            row >> tok; cc.max = std::stod(parse_kv(tok, "max"));
            if (row >> tok) {
                if (tok != "transform") throw IoError(path + ": unexpected token '" + tok + "'");
                TransformStats ts;
                row >> tok; ts.alpha = std::stod(parse_kv(tok, "alpha"));
                row >> tok; ts.tau = std::stod(parse_kv(tok, "tau"));
                row >> tok; ts.mean = std::stod(parse_kv(tok, "mean"));
                row >> tok; ts.sigma = std::stod(parse_kv(tok, "sigma"));
                row >> tok; ts.delta = std::stod(parse_kv(tok, "delta"));
                d.transform.push_back(ts);
            }
            d.codec.push_back(std::move(cc));
        } else if (word == "indicator") {
            std::string name;
            row >> name;
            d.indicator_labels.push_back(name);
        } else {
            throw IoError(path + ": unknown dataset line '" + line + "'");
        }
    }
    if (samples < 1 || channels < 1 || static_cast<int>(d.codec.size()) != channels)
        throw IoError(path + ": malformed dataset header");
    if (!d.transform.empty() && static_cast<int>(d.transform.size()) != channels)
        throw IoError(path + ": transform stats must cover every channel or none");
    d.bits.resize(d.n_rows(), samples);
    int t = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "end") break;
        if (t >= samples) throw IoError(path + ": more bit lines than declared samples");
        if (static_cast<int>(line.size()) != d.n_rows())
            throw IoError(path + ": bit line " + std::to_string(t) + " has wrong length");
        for (int r = 0; r < d.n_rows(); ++r) {
            if (line[r] != '0' && line[r] != '1') throw IoError(path + ": bit lines must be 0/1");
            d.bits(r, t) = line[r] - '0';
        }
        ++t;
    }
    if (t != samples) throw IoError(path + ": expected " + std::to_string(samples) + " bit lines");
    validate_dataset(d);
    return d;
}

// Plain 0/1 matrix persistence, used for generated sample sets.
inline void save_bit_matrix(const std::string& path, const Eigen::MatrixXi& bits) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write bit matrix: " + path);
    out << "qbm_forge_bits v1\n";
    out << "rows " << bits.rows() << "\n";
    out << "cols " << bits.cols() << "\n";
    for (Eigen::Index r = 0; r < bits.rows(); ++r) {
        for (Eigen::Index c = 0; c < bits.cols(); ++c) {
            if (bits(r, c) != 0 && bits(r, c) != 1)
                throw ValidationError("bit matrix entries must be 0/1");
            if (c) out << ' ';
            out << bits(r, c);
        }
        out << "\n";
    }
    out << "end\n";
}

inline Eigen::MatrixXi load_bit_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open bit matrix: " + path);
    detail::expect_exact(in, "qbm_forge_bits v1");
    const auto rows = detail::parse_int(detail::expect_keyword(in, "rows"), "rows");
    const auto cols = detail::parse_int(detail::expect_keyword(in, "cols"), "cols");
    if (rows < 1 || cols < 1) throw IoError("bad bit matrix dimensions in " + path);
    Eigen::MatrixXi bits(rows, cols);
    for (long long r = 0; r < rows; ++r) {
        std::istringstream line(detail::expect_line(in, "bit row"));
        for (long long c = 0; c < cols; ++c) {
            int v;
            if (!(line >> v)) throw IoError("short bit row in " + path);
            if (v != 0 && v != 1) throw ValidationError("bit matrix entries must be 0/1");
            bits(r, c) = v;
        }
    }
    detail::expect_exact(in, "end");
    return bits;
}

// --- summary statistics for the preprocess report --------------------------

struct ChannelSummary {
    double mean = 0.0, sd = 0.0, skew = 0.0, excess_kurtosis = 0.0;
};

inline ChannelSummary channel_summary(const Eigen::VectorXd& x) {
    if (x.size() < 2) throw ValidationError("need >= 2 points for summary statistics");
    ChannelSummary s;
    s.mean = x.mean();
    const Eigen::ArrayXd d = x.array() - s.mean;
    const double m2 = d.square().mean();
    s.sd = std::sqrt(m2);
    if (m2 > 0.0) {
        s.skew = d.cube().mean() / std::pow(m2, 1.5);
        s.excess_kurtosis = d.square().square().mean() / (m2 * m2) - 3.0;
    }
    return s;
}

} // namespace qbm_forge

#endif
