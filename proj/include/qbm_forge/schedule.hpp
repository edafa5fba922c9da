#ifndef QBM_FORGE_SCHEDULE_HPP
#define QBM_FORGE_SCHEDULE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "logging.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace qbm_forge {

// ============================================================================
// Annealer-side plumbing: energy schedule curves A(s), B(s), pause-and-quench
// waypoint construction, temperature conversion, and the mapping between
// model parameters and the (h, J) problem submitted to the sampler.
// ============================================================================

// Boltzmann constant over Planck constant: GHz per kelvin.  Converts between
// inverse temperature in 1/GHz and temperature in kelvin.
inline constexpr double kGhzPerKelvin = 20.83661912;

// Tabulated anneal schedule; energies in GHz, s dimensionless in [0, 1].
struct ScheduleCurve {
    Eigen::VectorXd s;
    Eigen::VectorXd a_ghz;
    Eigen::VectorXd b_ghz;
};

inline void validate_curve(const ScheduleCurve& c) {
    const auto n = c.s.size();
    if (n < 2 || c.a_ghz.size() != n || c.b_ghz.size() != n)
        throw ValidationError("schedule curve needs >= 2 rows of equal length");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(c.s[i]) || !std::isfinite(c.a_ghz[i]) || !std::isfinite(c.b_ghz[i]))
            throw ValidationError("non-finite schedule curve entry");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(c.s[i] > c.s[i - 1]))
            throw ValidationError("schedule curve s values must be strictly increasing");
    if (c.s[0] != 0.0 || c.s[n - 1] != 1.0)
        throw ValidationError("schedule curve must cover s = 0 and s = 1");
    if (!(c.a_ghz[0] > c.b_ghz[0]))
        throw ValidationError("schedule curve must have A(0) > B(0)");
    if (!(c.a_ghz[n - 1] < c.b_ghz[n - 1]))
        throw ValidationError("schedule curve must have A(1) < B(1)");
    for (Eigen::Index i = 1; i < n; ++i) {
        if (c.a_ghz[i] > c.a_ghz[i - 1])
            log_warn("schedule curve: A(s) increases at s=" + std::to_string(c.s[i]));
        if (c.b_ghz[i] < c.b_ghz[i - 1])
            log_warn("schedule curve: B(s) decreases at s=" + std::to_string(c.s[i]));
    }
}

struct CurvePoint {
    double a_ghz = 0.0;
    double b_ghz = 0.0;
};

// Linear interpolation between tabulated rows.
inline CurvePoint interpolate_curve(const ScheduleCurve& c, double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw ValidationError("anneal fraction s must lie in [0, 1]");
    const auto n = c.s.size();
    if (n < 2) throw ValidationError("schedule curve needs >= 2 rows");
    const double* begin = c.s.data();
    const double* it = std::upper_bound(begin, begin + n, s);
    Eigen::Index hi = std::min<Eigen::Index>(n - 1, it - begin);
    if (hi == 0) hi = 1;
    const Eigen::Index lo = hi - 1;
    const double t = (s - c.s[lo]) / (c.s[hi] - c.s[lo]);
    return {c.a_ghz[lo] + t * (c.a_ghz[hi] - c.a_ghz[lo]),
            c.b_ghz[lo] + t * (c.b_ghz[hi] - c.b_ghz[lo])};
}

inline ScheduleCurve load_schedule_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schedule curve file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty schedule curve file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "s,A_GHz,B_GHz")
        throw IoError("schedule curve header must be 's,A_GHz,B_GHz', got '" + line + "'");
    std::vector<double> s, a, b;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f1, f2, f3;
        if (!std::getline(row, f1, ',') || !std::getline(row, f2, ',') || !std::getline(row, f3))
            throw IoError("schedule curve line " + std::to_string(lineno) + ": expected 3 fields");
        try {
            std::size_t p1 = 0, p2 = 0, p3 = 0;
            s.push_back(std::stod(f1, &p1));
            a.push_back(std::stod(f2, &p2));
            b.push_back(std::stod(f3, &p3));
        } catch (const std::exception&) {
            throw IoError("schedule curve line " + std::to_string(lineno) + ": bad number");
        }
    }
    ScheduleCurve c;
    c.s = Eigen::Map<Eigen::VectorXd>(s.data(), s.size());
    c.a_ghz = Eigen::Map<Eigen::VectorXd>(a.data(), a.size());
    c.b_ghz = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
    validate_curve(c);
    return c;
}

inline void save_schedule_curve(const std::string& path, const ScheduleCurve& c) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write schedule curve file: " + path);
    out << "s,A_GHz,B_GHz\n";
    char buf[128];
    for (Eigen::Index i = 0; i < c.s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", c.s[i], c.a_ghz[i], c.b_ghz[i]);
        out << buf;
    }
}

// --- temperature <-> inverse temperature -----------------------------------

inline double beta_to_temperature_mk(double beta_per_ghz) {
    if (!(beta_per_ghz > 0.0) || !std::isfinite(beta_per_ghz))
        throw ValidationError("beta must be positive and finite");
    return 1000.0 / (kGhzPerKelvin * beta_per_ghz);
}

inline double temperature_mk_to_beta(double t_mk) {
    if (!(t_mk > 0.0) || !std::isfinite(t_mk))
        throw ValidationError("temperature must be positive and finite");
    return 1000.0 / (kGhzPerKelvin * t_mk);
}

// --- pause-and-quench waypoints --------------------------------------------

struct SchedulePoint {
    double t_us = 0.0;
    double s = 0.0;
};

struct PauseQuenchSpec {
    double s_quench = 1.0;        // anneal fraction the pause sits at
    double t_relative_us = 20.0;  // nominal full-anneal time scale
    double delta_pause_us = 0.0;  // pause duration
    double alpha_quench_per_us = 2.0;  // quench slope, device maximum 2/us
};

// Waypoints (t in us, s): ramp to the pause point in t_relative*s_quench,
// hold for delta_pause, then quench to s = 1 at slope alpha_quench.
// s_quench = 1 degenerates to a plain linear anneal; any pause is dropped
// because pausing at s = 1 has no effect on the final state.
inline std::vector<SchedulePoint> build_pause_quench(const PauseQuenchSpec& spec) {
    if (!(spec.s_quench > 0.0 && spec.s_quench <= 1.0))
        throw ValidationError("s_quench must lie in (0, 1]");
    if (!(spec.t_relative_us > 0.0))
        throw ValidationError("t_relative must be positive");
    if (spec.delta_pause_us < 0.0)
        throw ValidationError("delta_pause must be non-negative");
    if (!(spec.alpha_quench_per_us > 0.0) || spec.alpha_quench_per_us > 2.0)
        throw ValidationError("alpha_quench must lie in (0, 2] per us");
    const double t_pause = spec.s_quench * spec.t_relative_us;
    if (spec.s_quench == 1.0) return {{0.0, 0.0}, {t_pause, 1.0}};
    const double t_quench = t_pause + spec.delta_pause_us;
    const double delta_quench = (1.0 - spec.s_quench) / spec.alpha_quench_per_us;
    std::vector<SchedulePoint> pts;
    pts.push_back({0.0, 0.0});
    pts.push_back({t_pause, spec.s_quench});
    if (spec.delta_pause_us > 0.0) pts.push_back({t_quench, spec.s_quench});
    pts.push_back({t_quench + delta_quench, 1.0});
    return pts;
}

inline std::string describe_schedule(const PauseQuenchSpec& spec) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "pause_quench(s=%g,t_rel=%gus,pause=%gus,alpha=%g/us)",
                  spec.s_quench, spec.t_relative_us, spec.delta_pause_us, spec.alpha_quench_per_us);
    return buf;
}

// --- Ising problems and parameter scaling ----------------------------------

struct Coefficient {
    int i = 0;
    int j = 0;
    double value = 0.0;
};

// Problem in annealer units: dimensionless h and J with the device's
// permitted ranges carried along.  Range violations are advisory (flagged,
// never clipped).
struct IsingProblem {
    int n = 0;
    Eigen::VectorXd h;
    std::vector<Coefficient> j;
    double h_min = -4.0, h_max = 4.0;
    double j_min = -1.0, j_max = 1.0;
};

inline void validate_problem(const IsingProblem& p) {
    if (p.n < 1) throw ValidationError("ising problem needs at least one variable");
    if (p.h.size() != p.n) throw ValidationError("h length must equal n");
    if (!p.h.allFinite()) throw ValidationError("non-finite h");
    std::set<std::pair<int, int>> seen;
    for (const auto& c : p.j) {
        if (c.i < 0 || c.j >= p.n || c.i >= c.j)
            throw ValidationError("J indices must satisfy 0 <= i < j < n");
        if (!std::isfinite(c.value)) throw ValidationError("non-finite J");
        if (!seen.insert({c.i, c.j}).second)
            throw ValidationError("duplicate J entry");
    }
    if (!(p.h_min < p.h_max) || !(p.j_min < p.j_max))
        throw ValidationError("bad coefficient ranges");
}

inline bool problem_in_range(const IsingProblem& p) {
    for (Eigen::Index i = 0; i < p.h.size(); ++i)
        if (p.h[i] < p.h_min || p.h[i] > p.h_max) return false;
    for (const auto& c : p.j)
        if (c.value < p.j_min || c.value > p.j_max) return false;
    return true;
}

// Model -> annealer mapping: h_i = -bias_i / (beta_hat B(s*)), likewise for
// the couplings.  The annealer realizes -B(s) (sum h sz + sum J sz sz), so
// the sign flip makes the sampled Boltzmann factor match the model's energy.
inline IsingProblem qbm_to_ising(const BqrbmParameters& p, const CurvePoint& at_s_star) {
    validate_params(p);
    const double denom = p.beta_hat * at_s_star.b_ghz;
    if (!(denom > 0.0))
        throw ValidationError("beta_hat * B(s_star) must be positive to scale parameters");
    IsingProblem out;
    out.n = p.n_qubits();
    out.h = -p.bias / denom;
    const int nv = p.n_visible();
    for (int i = 0; i < nv; ++i)
        for (int jj = 0; jj < p.n_hidden(); ++jj)
            out.j.push_back({i, nv + jj, -p.w(i, jj) / denom});
    return out;
}

inline IsingProblem qbm_to_ising(const BqrbmParameters& p, const ScheduleCurve& curve) {
    return qbm_to_ising(p, interpolate_curve(curve, p.s_star));
}

// Inverse mapping; J entries must connect a visible to a hidden unit.
inline BqrbmParameters ising_to_qbm(const IsingProblem& prob, int n_visible, double beta,
                                    double s_star, const ScheduleCurve& curve) {
    validate_problem(prob);
    if (n_visible < 1 || n_visible >= prob.n)
        throw ValidationError("n_visible must split the problem into two non-empty layers");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ValidationError("beta must be positive");
    const CurvePoint pt = interpolate_curve(curve, s_star);
    BqrbmParameters p;
    p.beta_hat = beta;
    p.s_star = s_star;
    p.bias = -beta * pt.b_ghz * prob.h;
    p.w = Eigen::MatrixXd::Zero(n_visible, prob.n - n_visible);
    for (const auto& c : prob.j) {
        if (c.i >= n_visible || c.j < n_visible)
            throw ValidationError("J entry does not connect visible to hidden");
        p.w(c.i, c.j - n_visible) = -beta * pt.b_ghz * c.value;
    }
    p.gamma = Eigen::VectorXd::Constant(prob.n, beta * pt.a_ghz);
    return p;
}

// Largest factor by which the problem overshoots the device ranges; 0 when
// every coefficient is inside them.  Ratios are clamped at zero so a
// coefficient deep inside the opposite end of the range cannot mask an
// overshoot elsewhere.
inline double autoscale_factor(const IsingProblem& p) {
    validate_problem(p);
    double h_max = 0.0, h_min = 0.0, j_max = 0.0, j_min = 0.0;
    if (p.h.size() > 0) {
        h_max = p.h.maxCoeff();
        h_min = p.h.minCoeff();
    }
    if (!p.j.empty()) {
        j_max = j_min = p.j.front().value;
        for (const auto& c : p.j) {
            j_max = std::max(j_max, c.value);
            j_min = std::min(j_min, c.value);
        }
    }
    const double r1 = std::max(h_max / p.h_max, 0.0);
    const double r2 = std::max(h_min / p.h_min, 0.0);
    const double r3 = std::max(j_max / p.j_max, 0.0);
    const double r4 = std::max(j_min / p.j_min, 0.0);
    return std::max({r1, r2, r3, r4});
}

// Ferromagnetic chain coupling magnitude for embedding:
// gamma = gamma_rel * min(max J range, largest |coefficient|).
inline double chain_strength(const IsingProblem& p, double gamma_rel) {
    validate_problem(p);
    if (!(gamma_rel > 0.0)) throw ValidationError("gamma_rel must be positive");
    double largest = 0.0;
    for (Eigen::Index i = 0; i < p.h.size(); ++i) largest = std::max(largest, std::abs(p.h[i]));
    for (const auto& c : p.j) largest = std::max(largest, std::abs(c.value));
    return gamma_rel * std::min(p.j_max, largest);
}

// --- gauge (spin-reversal) transforms --------------------------------------

using GaugeVector = std::vector<int>;  // entries +-1

inline void validate_gauge(const GaugeVector& r, int n) {
    if (static_cast<int>(r.size()) != n)
        throw ValidationError("gauge vector length must equal n");
    for (int v : r)
        if (v != 1 && v != -1) throw ValidationError("gauge entries must be +-1");
}

inline GaugeVector identity_gauge(int n) { return GaugeVector(n, 1); }

inline GaugeVector random_gauge(int n, Rng& rng) {
    GaugeVector r(n);
    for (int i = 0; i < n; ++i) r[i] = rng.sign();
    return r;
}

// h_i -> r_i h_i, J_ij -> r_i r_j J_ij.  Involution: applying twice is the
// identity, and sample energies are invariant once spins are mapped back.
inline IsingProblem apply_gauge(const IsingProblem& p, const GaugeVector& r) {
    validate_problem(p);
    validate_gauge(r, p.n);
    IsingProblem out = p;
    for (Eigen::Index i = 0; i < out.h.size(); ++i) out.h[i] *= r[i];
    for (auto& c : out.j) c.value *= static_cast<double>(r[c.i]) * static_cast<double>(r[c.j]);
    return out;
}

} // namespace qbm_forge

#endif
