#ifndef QBM_FORGE_PARAMS_HPP
#define QBM_FORGE_PARAMS_HPP

#include <Eigen/Dense>

#include <cmath>

#include "errors.hpp"

namespace qbm_forge {

// Classical RBM over {0,1} units:  E(v,h) = -a.v - b.h - v'Wh.
struct RbmParameters {
    Eigen::VectorXd a;  // visible bias
    Eigen::VectorXd b;  // hidden bias
    Eigen::MatrixXd w;  // n_visible x n_hidden

    int n_visible() const { return static_cast<int>(a.size()); }
    int n_hidden() const { return static_cast<int>(b.size()); }
};

inline void validate_params(const RbmParameters& p) {
    if (p.a.size() < 1 || p.b.size() < 1)
        throw ValidationError("rbm needs at least one visible and one hidden unit");
    if (p.w.rows() != p.a.size() || p.w.cols() != p.b.size())
        throw ValidationError("weight matrix shape must be n_visible x n_hidden");
    if (!p.a.allFinite() || !p.b.allFinite() || !p.w.allFinite())
        throw ValidationError("non-finite rbm parameter");
}

// Bound-trained quantum RBM over +-1 spins.  Dimensionful (GHz) parameters;
// bias covers visible then hidden units, gamma is the per-qubit transverse
// field, beta_hat the learned inverse temperature (1/GHz), s_star the anneal
// fraction the sampler is frozen at.
struct BqrbmParameters {
    Eigen::VectorXd bias;   // length n_visible + n_hidden
    Eigen::MatrixXd w;      // n_visible x n_hidden
    Eigen::VectorXd gamma;  // length n_visible + n_hidden
    double beta_hat = 1.0;
    double s_star = 1.0;

    int n_visible() const { return static_cast<int>(w.rows()); }
    int n_hidden() const { return static_cast<int>(w.cols()); }
    int n_qubits() const { return n_visible() + n_hidden(); }
};

inline void validate_params(const BqrbmParameters& p) {
    if (p.w.rows() < 1 || p.w.cols() < 1)
        throw ValidationError("bqrbm needs at least one visible and one hidden unit");
    if (p.bias.size() != p.n_qubits() || p.gamma.size() != p.n_qubits())
        throw ValidationError("bias/gamma length must equal n_visible + n_hidden");
    if (!p.bias.allFinite() || !p.gamma.allFinite() || !p.w.allFinite())
        throw ValidationError("non-finite bqrbm parameter");
    if (!(p.beta_hat > 0.0) || !std::isfinite(p.beta_hat))
        throw ValidationError("beta_hat must be positive");
    if (p.s_star < 0.0 || p.s_star > 1.0)
        throw ValidationError("s_star must lie in [0, 1]");
}

} // namespace qbm_forge

#endif
