#ifndef QBM_FORGE_SAMPLER_HPP
#define QBM_FORGE_SAMPLER_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "exactspin.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace qbm_forge {

// ============================================================================
// Sample generation: exact annealer simulator (i.i.d. draws from the diagonal
// of rho(s,T)) plus a facade that reproduces the operational constraints of
// the real device: 1e4-sample cap per read, gauge ensembles kept separate.
// ============================================================================

inline constexpr int kMaxSamplesPerSet = 10000;

struct SampleSet {
    int n = 0;
    Eigen::MatrixXi spins;       // one row per distinct state, entries +-1
    Eigen::VectorXd energies;    // dimensionless Ising energy per row
    Eigen::VectorXi occurrences; // draw count per row
    double s_point = 1.0;
    double temperature_mk = 0.0;
    int gauge_index = 0;
    std::string schedule;

    int total_occurrences() const { return occurrences.sum(); }
};

inline double ising_energy(const IsingProblem& p, const Eigen::VectorXi& spins) {
    validate_problem(p);
    if (spins.size() != p.n) throw ValidationError("spin vector length must equal problem size");
    double e = 0.0;
    for (int i = 0; i < p.n; ++i) e += p.h[i] * spins[i];
    for (const auto& c : p.j) e += c.value * spins[c.i] * spins[c.j];
    return e;
}

// The device realizes H(s) = -A(s) sum sx - B(s) (sum h sz + sum J sz sz)
// up to overall sign conventions, so an Ising problem maps to a spin system
// with unit transverse coefficients and negated longitudinal terms.
inline SpinSystem system_from_problem(const IsingProblem& p) {
    validate_problem(p);
    SpinSystem sys;
    sys.n_qubits = p.n;
    sys.n_visible = p.n;
    sys.gamma = Eigen::VectorXd::Ones(p.n);
    sys.bias = -p.h;
    for (const auto& c : p.j) sys.couplings.push_back({c.i, c.j, -c.value});
    return sys;
}

namespace detail {

// Draw n_samples i.i.d. basis states from the exact diagonal and aggregate
// them into one row per distinct state, ascending state index.
inline SampleSet sample_density(const SpinSystem& sys, const ScheduleCurve& curve, double s_point,
                                double temperature_mk, int n_samples, Rng& rng) {
    validate_system(sys);
    if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
    const CurvePoint pt = interpolate_curve(curve, s_point);
    const double beta = temperature_mk_to_beta(temperature_mk);
    const Eigen::VectorXd unit_energies = classical_energies(sys, 1.0);

    DensityDiagonal density;
    const bool diagonal = (pt.a_ghz * sys.gamma.array() == 0.0).all();
    if (diagonal) {
        density = boltzmann_diagonal(pt.b_ghz * unit_energies, beta);
    } else {
        density = density_diagonal(diagonalize(sys, pt.a_ghz, pt.b_ghz), beta);
    }

    const Eigen::Index dim = density.probabilities.size();
    std::vector<double> cdf(dim);
    std::partial_sum(density.probabilities.data(), density.probabilities.data() + dim, cdf.begin());
    std::vector<int> counts(dim, 0);
    for (int k = 0; k < n_samples; ++k) {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const Eigen::Index idx = std::min<Eigen::Index>(dim - 1, it - cdf.begin());
        ++counts[idx];
    }

    const int distinct = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
    SampleSet set;
    set.n = sys.n_qubits;
    set.s_point = s_point;
    set.temperature_mk = temperature_mk;
    set.spins.resize(distinct, sys.n_qubits);
    set.energies.resize(distinct);
    set.occurrences.resize(distinct);
    int row = 0;
    for (Eigen::Index k = 0; k < dim; ++k) {
        if (counts[k] == 0) continue;
        for (int q = 0; q < sys.n_qubits; ++q)
            set.spins(row, q) = static_cast<int>(spin_of(k, q, sys.n_qubits));
        set.energies[row] = unit_energies[k];
        set.occurrences[row] = counts[k];
        ++row;
    }
    return set;
}

inline std::uint64_t state_index_of_row(const SampleSet& set, int row) {
    std::uint64_t k = 0;
    for (int q = 0; q < set.n; ++q) k = (k << 1) | (set.spins(row, q) == -1 ? 1ULL : 0ULL);
    return k;
}

// Canonical row order: ascending computational-basis index.
inline void sort_rows_by_state(SampleSet& set) {
    const int rows = static_cast<int>(set.spins.rows());
    std::vector<int> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::uint64_t> keys(rows);
    for (int r = 0; r < rows; ++r) keys[r] = state_index_of_row(set, r);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
    SampleSet out = set;
    for (int r = 0; r < rows; ++r) {
        out.spins.row(r) = set.spins.row(order[r]);
        out.energies[r] = set.energies[order[r]];
        out.occurrences[r] = set.occurrences[order[r]];
    }
    set = std::move(out);
}

} // namespace detail

inline SampleSet sample_exact(const SpinSystem& sys, const ScheduleCurve& curve, double s_point,
                              double temperature_mk, int n_samples, std::uint64_t seed) {
    Rng rng(seed);
    return detail::sample_density(sys, curve, s_point, temperature_mk, n_samples, rng);
}

// Relabel sampled spins back to the original frame: s_i -> r_i s_i.  Energies
// are untouched; the gauge preserves them exactly.
inline void gauge_undo(SampleSet& set, const GaugeVector& r) {
    validate_gauge(r, set.n);
    for (int q = 0; q < set.n; ++q)
        if (r[q] == -1) set.spins.col(q) = -set.spins.col(q);
    detail::sort_rows_by_state(set);
}

struct FacadeOptions {
    bool random_gauges = true;  // false samples every set in the identity gauge
    // Gaussian coefficient mismatch, off by default; meant for robustness tests.
    double noise_sigma_h = 0.0;
    double noise_sigma_j = 0.0;
};

// Emulates submitting `problem` to a pause-and-quench annealer run: for each
// gauge, transform the problem, sample exactly at (s_star, effective_T), and
// map the spins back.  Sets stay separate; estimators downstream ensemble-
// average across them.
inline std::vector<SampleSet> annealer_facade(const IsingProblem& problem, const PauseQuenchSpec& spec,
                                              const ScheduleCurve& curve, double effective_t_mk,
                                              double s_star, int n_samples, int gauges,
                                              std::uint64_t seed, const FacadeOptions& opts = {}) {
    validate_problem(problem);
    if (n_samples < 1 || n_samples > kMaxSamplesPerSet)
        throw ValidationError("n_samples per set must lie in [1, " + std::to_string(kMaxSamplesPerSet) + "]");
    if (gauges < 1) throw ValidationError("gauges must be >= 1");
    const std::vector<SchedulePoint> waypoints = build_pause_quench(spec);
    (void)waypoints;  // constructed for validation; the exact sampler needs only s_star
    const std::string schedule_desc = describe_schedule(spec);

    std::vector<SampleSet> sets;
    sets.reserve(gauges);
    for (int g = 0; g < gauges; ++g) {
        Rng gauge_rng = Rng::stream(seed ^ 0x67617567ULL, static_cast<std::uint64_t>(g) + 1);
        const GaugeVector r = opts.random_gauges ? random_gauge(problem.n, gauge_rng)
                                                 : identity_gauge(problem.n);
        IsingProblem submitted = apply_gauge(problem, r);
        IsingProblem realized = submitted;
        if (opts.noise_sigma_h > 0.0 || opts.noise_sigma_j > 0.0) {
            Rng noise_rng = Rng::stream(seed ^ 0x6e6f697365ULL, static_cast<std::uint64_t>(g) + 1);
            for (Eigen::Index i = 0; i < realized.h.size(); ++i)
                realized.h[i] += noise_rng.normal(0.0, opts.noise_sigma_h);
            for (auto& c : realized.j) c.value += noise_rng.normal(0.0, opts.noise_sigma_j);
        }

        Rng draw_rng = Rng::stream(seed, static_cast<std::uint64_t>(g));
        SampleSet set = detail::sample_density(system_from_problem(realized), curve, s_star,
                                               effective_t_mk, n_samples, draw_rng);
        if (opts.noise_sigma_h > 0.0 || opts.noise_sigma_j > 0.0) {
            // The device reports energies under the submitted problem, not the
            // noisy one it actually realized.
            for (int row = 0; row < set.spins.rows(); ++row)
                set.energies[row] = ising_energy(submitted, set.spins.row(row).transpose());
        }
        set.gauge_index = g;
        set.schedule = schedule_desc;
        gauge_undo(set, r);
        sets.push_back(std::move(set));
    }
    return sets;
}

// Occurrence-weighted first moments <s_i> and pair moments <s_i s_j>.
struct SampleMoments {
    Eigen::VectorXd first;
    std::vector<double> second;  // aligned with the requested pair list
};

inline SampleMoments moments_from_samples(const SampleSet& set,
                                          const std::vector<std::pair<int, int>>& pairs) {
    if (set.spins.rows() < 1) throw ValidationError("empty sample set");
    if (set.spins.cols() != set.n || set.energies.size() != set.spins.rows() ||
        set.occurrences.size() != set.spins.rows())
        throw ValidationError("inconsistent sample set");
    for (const auto& [i, j] : pairs)
        if (i < 0 || j >= set.n || i >= j)
            throw ValidationError("moment pair indices must satisfy 0 <= i < j < n");
    const double total = static_cast<double>(set.occurrences.sum());
    SampleMoments m;
    m.first = Eigen::VectorXd::Zero(set.n);
    m.second.assign(pairs.size(), 0.0);
    for (int row = 0; row < set.spins.rows(); ++row) {
        const double w = set.occurrences[row] / total;
        for (int q = 0; q < set.n; ++q) m.first[q] += w * set.spins(row, q);
        for (std::size_t c = 0; c < pairs.size(); ++c)
            m.second[c] += w * set.spins(row, pairs[c].first) * set.spins(row, pairs[c].second);
    }
    return m;
}

inline double mean_energy(const SampleSet& set) {
    if (set.spins.rows() < 1) throw ValidationError("empty sample set");
    const double total = static_cast<double>(set.occurrences.sum());
    return set.energies.dot(set.occurrences.cast<double>()) / total;
}

// --- persistence -----------------------------------------------------------
// Header block of `# key=value` meta lines, then one CSV row per state:
// spin_1,...,spin_n,energy,occurrences.

inline void save_sample_set(const std::string& path, const SampleSet& set) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sample set file: " + path);
    char buf[64];
    out << "# qbm_forge_sample_set=1\n";
    out << "# n=" << set.n << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", set.s_point);
    out << "# s_point=" << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", set.temperature_mk);
    out << "# temperature_mk=" << buf << "\n";
    out << "# gauge_index=" << set.gauge_index << "\n";
    out << "# schedule=" << set.schedule << "\n";
    for (int row = 0; row < set.spins.rows(); ++row) {
        for (int q = 0; q < set.n; ++q) out << set.spins(row, q) << ",";
        std::snprintf(buf, sizeof buf, "%.17g", set.energies[row]);
        out << buf << "," << set.occurrences[row] << "\n";
    }
}

inline SampleSet load_sample_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sample set file: " + path);
    SampleSet set;
    std::string line;
    std::vector<std::vector<int>> spin_rows;
    std::vector<double> energies;
    std::vector<int> occurrences;
    int lineno = 0;
    bool have_n = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const std::size_t eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = body.substr(0, eq);
            std::string value = body.substr(eq + 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            try {
                if (key == "n") { set.n = std::stoi(value); have_n = true; }
                else if (key == "s_point") set.s_point = std::stod(value);
                else if (key == "temperature_mk") set.temperature_mk = std::stod(value);
                else if (key == "gauge_index") set.gauge_index = std::stoi(value);
                else if (key == "schedule") set.schedule = value;
            } catch (const std::exception&) {
                throw IoError("sample set line " + std::to_string(lineno) + ": bad meta value");
            }
            continue;
        }
        if (!have_n) throw IoError("sample set file must declare '# n=...' before data rows");
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (static_cast<int>(fields.size()) != set.n + 2)
            throw IoError("sample set line " + std::to_string(lineno) + ": expected " +
                          std::to_string(set.n + 2) + " fields");
        try {
            std::vector<int> spins(set.n);
            for (int q = 0; q < set.n; ++q) spins[q] = std::stoi(fields[q]);
            spin_rows.push_back(std::move(spins));
            energies.push_back(std::stod(fields[set.n]));
            occurrences.push_back(std::stoi(fields[set.n + 1]));
        } catch (const std::exception&) {
            throw IoError("sample set line " + std::to_string(lineno) + ": bad number");
        }
    }
    if (!have_n) throw IoError("sample set file missing '# n=...' header: " + path);
    const int rows = static_cast<int>(spin_rows.size());
    set.spins.resize(rows, set.n);
    set.energies.resize(rows);
    set.occurrences.resize(rows);
    for (int r = 0; r < rows; ++r) {
        for (int q = 0; q < set.n; ++q) {
            if (spin_rows[r][q] != 1 && spin_rows[r][q] != -1)
                throw ValidationError("sample set spins must be +-1");
            set.spins(r, q) = spin_rows[r][q];
        }
        if (occurrences[r] < 1) throw ValidationError("sample set occurrences must be >= 1");
        set.energies[r] = energies[r];
        set.occurrences[r] = occurrences[r];
    }
    return set;
}

} // namespace qbm_forge

#endif
