#ifndef QBM_FORGE_EXACTSPIN_HPP
#define QBM_FORGE_EXACTSPIN_HPP

#include <Eigen/Dense>
#ifdef QBM_FORGE_USE_LAPACKE
#include <lapacke.h>
#else
#include <Eigen/Eigenvalues>
#endif

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace qbm_forge {

// ============================================================================
// Exact (dense) treatment of a transverse-field Ising system
//
//   H = -a_scale * sum_i gamma_i sx_i
//       -b_scale * ( sum_i bias_i sz_i + sum_{i<j} w_ij sz_i sz_j )
//
// Basis convention, which every consumer of state indices relies on:
// qubit 0 occupies the MOST significant bit of the computational basis
// index, and bit value 0 maps to spin +1.  So for n qubits, state index k
// assigns qubit q the spin  +1 if bit (n-1-q) of k is clear, -1 if set.
// ============================================================================

// Dense storage is 2^n x 2^n doubles; beyond 14 qubits that is no longer a
// sane in-memory object.
inline constexpr int kMaxDenseQubits = 14;

struct Coupling {
    int i = 0;
    int j = 0;
    double w = 0.0;
};

// Qubits [0, n_visible) are the visible layer, the rest are hidden.
// Models without a layer split set n_visible = n_qubits.
struct SpinSystem {
    int n_qubits = 0;
    int n_visible = 0;
    Eigen::VectorXd gamma;
    Eigen::VectorXd bias;
    std::vector<Coupling> couplings;
};

inline double spin_of(std::uint64_t state, int qubit, int n_qubits) {
    return (state >> (n_qubits - 1 - qubit)) & 1ULL ? -1.0 : 1.0;
}

inline void validate_system(const SpinSystem& sys) {
    if (sys.n_qubits < 1)
        throw ValidationError("spin system needs at least one qubit");
    if (sys.n_qubits > kMaxDenseQubits)
        throw CapacityError("dense simulator supports at most " + std::to_string(kMaxDenseQubits) +
                            " qubits, got " + std::to_string(sys.n_qubits));
    if (sys.n_visible < 0 || sys.n_visible > sys.n_qubits)
        throw ValidationError("n_visible out of range");
    if (sys.gamma.size() != sys.n_qubits || sys.bias.size() != sys.n_qubits)
        throw ValidationError("gamma/bias length must equal n_qubits");
    for (int i = 0; i < sys.n_qubits; ++i)
        if (!std::isfinite(sys.gamma[i]) || !std::isfinite(sys.bias[i]))
            throw ValidationError("non-finite field coefficient");
    std::set<std::pair<int, int>> seen;
    for (const auto& c : sys.couplings) {
        if (c.i < 0 || c.j >= sys.n_qubits || c.i >= c.j)
            throw ValidationError("coupling indices must satisfy 0 <= i < j < n_qubits");
        if (!std::isfinite(c.w))
            throw ValidationError("non-finite coupling");
        if (!seen.insert({c.i, c.j}).second)
            throw ValidationError("duplicate coupling (" + std::to_string(c.i) + "," + std::to_string(c.j) + ")");
    }
}

// Diagonal of the classical (sz) part, scaled by b_scale.  Entry k is the
// energy of basis state k with all transverse terms dropped.
inline Eigen::VectorXd classical_energies(const SpinSystem& sys, double b_scale = 1.0) {
    validate_system(sys);
    const int n = sys.n_qubits;
    const std::uint64_t dim = 1ULL << n;
    Eigen::VectorXd e(dim);
    for (std::uint64_t k = 0; k < dim; ++k) {
        double h = 0.0;
        for (int q = 0; q < n; ++q) h += sys.bias[q] * spin_of(k, q, n);
        for (const auto& c : sys.couplings) h += c.w * spin_of(k, c.i, n) * spin_of(k, c.j, n);
        e[k] = -b_scale * h;
    }
    return e;
}

inline Eigen::MatrixXd build_hamiltonian(const SpinSystem& sys, double a_scale = 1.0, double b_scale = 1.0) {
    if (!std::isfinite(a_scale) || !std::isfinite(b_scale))
        throw ValidationError("non-finite scale factor");
    const Eigen::VectorXd diag = classical_energies(sys, b_scale);
    const int n = sys.n_qubits;
    const std::uint64_t dim = 1ULL << n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    h.diagonal() = diag;
    for (int q = 0; q < n; ++q) {
        const double g = a_scale * sys.gamma[q];
        if (g == 0.0) continue;
        const std::uint64_t mask = 1ULL << (n - 1 - q);
        for (std::uint64_t k = 0; k < dim; ++k) h(k ^ mask, k) -= g;
    }
    return h;
}

// Eigendecomposition of the Hamiltonian, eigenvalues ascending.
struct ExactModel {
    Eigen::MatrixXd hamiltonian;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  // columns
};

inline ExactModel diagonalize(Eigen::MatrixXd h) {
    if (h.rows() != h.cols() || h.rows() < 1)
        throw ValidationError("hamiltonian must be square and non-empty");
    ExactModel m;
    const auto dim = h.rows();
#ifdef QBM_FORGE_USE_LAPACKE
    m.eigenvectors = h;  // dsyevd overwrites its input with the eigenvectors
    m.eigenvalues.resize(dim);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(dim),
                                           m.eigenvectors.data(), static_cast<lapack_int>(dim),
                                           m.eigenvalues.data());
    if (info != 0)
        throw ValidationError("symmetric eigensolver failed, info=" + std::to_string(info));
#else
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success)
        throw ValidationError("symmetric eigensolver failed");
    m.eigenvalues = solver.eigenvalues();
    m.eigenvectors = solver.eigenvectors();
#endif
    m.hamiltonian = std::move(h);
    return m;
}

inline ExactModel diagonalize(const SpinSystem& sys, double a_scale = 1.0, double b_scale = 1.0) {
    return diagonalize(build_hamiltonian(sys, a_scale, b_scale));
}

// Diagonal of exp(-beta H)/Z in the computational basis.
struct DensityDiagonal {
    Eigen::VectorXd probabilities;
    double beta = 0.0;
};

// Eigenvalues are shifted by the ground-state energy before exponentiating so
// that large beta*|E| cannot overflow; the shift cancels in the normalization.
inline DensityDiagonal density_diagonal(const ExactModel& model, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ValidationError("beta must be positive and finite");
    const auto dim = model.eigenvalues.size();
    const double e0 = model.eigenvalues.minCoeff();
    Eigen::VectorXd w(dim);
    for (Eigen::Index j = 0; j < dim; ++j) w[j] = std::exp(-beta * (model.eigenvalues[j] - e0));
    const double z = w.sum();
    DensityDiagonal d;
    d.beta = beta;
    d.probabilities = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        d.probabilities.array() += (w[j] / z) * model.eigenvectors.col(j).array().square();
    return d;
}

// Exact shortcut for a purely diagonal Hamiltonian (all transverse terms
// zero): the eigenbasis is the computational basis, so the diagonal of rho is
// the Boltzmann distribution over the diagonal energies.
inline DensityDiagonal boltzmann_diagonal(const Eigen::VectorXd& energies, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ValidationError("beta must be positive and finite");
    if (energies.size() < 1)
        throw ValidationError("empty energy vector");
    const double e0 = energies.minCoeff();
    DensityDiagonal d;
    d.beta = beta;
    d.probabilities = (-(beta * (energies.array() - e0))).exp();
    d.probabilities /= d.probabilities.sum();
    return d;
}

// Marginal over the visible layer: visible qubits occupy the high bits, so
// each visible configuration owns one contiguous block of 2^(n-n_visible)
// basis states.
inline Eigen::VectorXd marginal_visible(const DensityDiagonal& density, int n_qubits, int n_visible) {
    if (n_visible < 0 || n_visible > n_qubits)
        throw ValidationError("n_visible out of range");
    if (density.probabilities.size() != (1LL << n_qubits))
        throw ValidationError("density size does not match n_qubits");
    const std::uint64_t block = 1ULL << (n_qubits - n_visible);
    Eigen::VectorXd m(1ULL << n_visible);
    for (Eigen::Index v = 0; v < m.size(); ++v)
        m[v] = density.probabilities.segment(static_cast<Eigen::Index>(v * block), block).sum();
    return m;
}

// First moments <sz_i> for every qubit and second moments <sz_i sz_j> for the
// system's coupled pairs, in coupling order.
struct Moments {
    Eigen::VectorXd first;
    std::vector<double> second;
};

inline Moments exact_moments(const DensityDiagonal& density, const SpinSystem& sys) {
    validate_system(sys);
    const int n = sys.n_qubits;
    const std::uint64_t dim = 1ULL << n;
    if (density.probabilities.size() != static_cast<Eigen::Index>(dim))
        throw ValidationError("density size does not match system");
    Moments m;
    m.first = Eigen::VectorXd::Zero(n);
    m.second.assign(sys.couplings.size(), 0.0);
    for (std::uint64_t k = 0; k < dim; ++k) {
        const double p = density.probabilities[k];
        if (p == 0.0) continue;
        for (int q = 0; q < n; ++q) m.first[q] += p * spin_of(k, q, n);
        for (std::size_t c = 0; c < sys.couplings.size(); ++c)
            m.second[c] += p * spin_of(k, sys.couplings[c].i, n) * spin_of(k, sys.couplings[c].j, n);
    }
    return m;
}

// <sz_j> for each hidden qubit with the visible layer clamped to v (spins,
// +-1).  With the visibles frozen the clamped Hamiltonian factorizes into
// independent single-qubit pieces
//     -gamma_j sx - b'_j sz,   b'_j = bias_j + sum_i w_ij v_i,
// whose thermal sz expectation has the closed form (b'/D) tanh(D) with
// D = sqrt(gamma^2 + b'^2).  Requires a hidden layer free of internal
// couplings; visible-visible couplings only shift the clamped energy by a
// constant and are ignored here.
inline Eigen::VectorXd clamped_hidden_expectations(const SpinSystem& sys, const Eigen::VectorXd& v) {
    validate_system(sys);
    const int nv = sys.n_visible;
    const int nh = sys.n_qubits - nv;
    if (v.size() != nv)
        throw ValidationError("visible vector length must equal n_visible");
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] != 1.0 && v[i] != -1.0)
            throw ValidationError("visible spins must be +-1");
    Eigen::VectorXd bprime = sys.bias.tail(nh);
    for (const auto& c : sys.couplings) {
        const bool i_hidden = c.i >= nv;
        const bool j_hidden = c.j >= nv;
        if (i_hidden && j_hidden)
            throw ValidationError("clamped expectations need a coupling-free hidden layer");
        if (!i_hidden && j_hidden) bprime[c.j - nv] += c.w * v[c.i];
        if (i_hidden && !j_hidden) bprime[c.i - nv] += c.w * v[c.j];
    }
    Eigen::VectorXd out(nh);
    for (int j = 0; j < nh; ++j) {
        const double d = std::sqrt(sys.gamma[nv + j] * sys.gamma[nv + j] + bprime[j] * bprime[j]);
        out[j] = d == 0.0 ? 0.0 : (bprime[j] / d) * std::tanh(d);
    }
    return out;
}

} // namespace qbm_forge

#endif
