#include <catch2/catch_amalgamated.hpp>

#include <qbm_forge/exactspin.hpp>
#include <qbm_forge/rng.hpp>

#include <cmath>

using namespace qbm_forge;

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Tensor-product operator with `op` at qubit position q (position 0 is the
// leftmost, most significant factor).
Eigen::MatrixXd at_qubit(const Eigen::MatrixXd& op, int q, int n) {
    const Eigen::MatrixXd id2 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(1, 1);
    for (int k = 0; k < n; ++k) acc = kron(acc, k == q ? op : id2);
    return acc;
}

const Eigen::MatrixXd kSx = (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished();
const Eigen::MatrixXd kSz = (Eigen::MatrixXd(2, 2) << 1, 0, 0, -1).finished();

SpinSystem random_system(int n, Rng& rng, double coeff_sd = 0.5) {
    SpinSystem sys;
    sys.n_qubits = n;
    sys.n_visible = n;
    sys.gamma.resize(n);
    sys.bias.resize(n);
    for (int i = 0; i < n; ++i) {
        sys.gamma[i] = std::abs(rng.normal(0.0, coeff_sd)) + 0.1;
        sys.bias[i] = rng.normal(0.0, coeff_sd);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) sys.couplings.push_back({i, j, rng.normal(0.0, coeff_sd)});
    return sys;
}

// Reference Hamiltonian assembled from explicit tensor products.
Eigen::MatrixXd reference_hamiltonian(const SpinSystem& sys, double a_scale, double b_scale) {
    const int n = sys.n_qubits;
    const Eigen::Index dim = 1LL << n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int q = 0; q < n; ++q) h -= a_scale * sys.gamma[q] * at_qubit(kSx, q, n);
    Eigen::MatrixXd zpart = Eigen::MatrixXd::Zero(dim, dim);
    for (int q = 0; q < n; ++q) zpart += sys.bias[q] * at_qubit(kSz, q, n);
    for (const auto& c : sys.couplings)
        zpart += c.w * (at_qubit(kSz, c.i, n) * at_qubit(kSz, c.j, n));
    return h - b_scale * zpart;
}

} // namespace

TEST_CASE("spin convention maps bit 1 to spin -1 with qubit 0 most significant") {
    // n = 2: state index 2 is bits (1, 0), so qubit 0 carries the set bit.
    CHECK(spin_of(2, 0, 2) == -1.0);
    CHECK(spin_of(2, 1, 2) == 1.0);
    CHECK(spin_of(1, 0, 2) == 1.0);
    CHECK(spin_of(1, 1, 2) == -1.0);
    CHECK(spin_of(0, 0, 2) == 1.0);
    CHECK(spin_of(3, 1, 2) == -1.0);
}

TEST_CASE("classical energies match a hand enumeration at n = 2") {
    SpinSystem sys;
    sys.n_qubits = 2;
    sys.n_visible = 2;
    sys.gamma = Eigen::VectorXd::Zero(2);
    sys.bias = (Eigen::VectorXd(2) << 0.7, -0.3).finished();
    sys.couplings.push_back({0, 1, 0.2});
    const Eigen::VectorXd e = classical_energies(sys);
    // E(k) = -(b0 s0 + b1 s1 + w s0 s1), states ordered 00, 01, 10, 11.
    CHECK(e[0] == Catch::Approx(-(0.7 - 0.3 + 0.2)).margin(1e-15));
    CHECK(e[1] == Catch::Approx(-(0.7 + 0.3 - 0.2)).margin(1e-15));
    CHECK(e[2] == Catch::Approx(-(-0.7 - 0.3 - 0.2)).margin(1e-15));
    CHECK(e[3] == Catch::Approx(-(-0.7 + 0.3 + 0.2)).margin(1e-15));
}

TEST_CASE("dense hamiltonian equals the tensor-product construction") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 2 + static_cast<int>(rng.below(2));
        const SpinSystem sys = random_system(n, rng);
        const double a_scale = 0.3 + rng.uniform();
        const double b_scale = 0.5 + rng.uniform();
        const Eigen::MatrixXd got = build_hamiltonian(sys, a_scale, b_scale);
        const Eigen::MatrixXd want = reference_hamiltonian(sys, a_scale, b_scale);
        REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("diagonalize returns an orthonormal eigenbasis in ascending order") {
    Rng rng(12);
    const SpinSystem sys = random_system(3, rng);
    const ExactModel m = diagonalize(sys, 1.0, 1.0);
    const Eigen::Index dim = m.eigenvalues.size();
    REQUIRE(dim == 8);
    for (Eigen::Index i = 1; i < dim; ++i) CHECK(m.eigenvalues[i] >= m.eigenvalues[i - 1]);
    const Eigen::MatrixXd eye = m.eigenvectors.transpose() * m.eigenvectors;
    CHECK((eye - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd rebuilt =
        m.eigenvectors * m.eigenvalues.asDiagonal() * m.eigenvectors.transpose();
    CHECK((rebuilt - m.hamiltonian).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("density diagonal matches an independent eigensolver and is shift invariant") {
    Rng rng(13);
    const SpinSystem sys = random_system(3, rng);
    const double beta = 0.8;
    const Eigen::MatrixXd h = reference_hamiltonian(sys, 1.0, 1.0);

    // Independent route: Eigen's own solver on the reference matrix.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    REQUIRE(solver.info() == Eigen::Success);
    const Eigen::VectorXd ev = solver.eigenvalues();
    Eigen::VectorXd w = (-(beta * (ev.array() - ev.minCoeff()))).exp();
    w /= w.sum();
    Eigen::VectorXd want(h.rows());
    for (Eigen::Index k = 0; k < h.rows(); ++k)
        want[k] = (solver.eigenvectors().row(k).transpose().array().square() * w.array()).sum();

    const DensityDiagonal got = density_diagonal(diagonalize(sys, 1.0, 1.0), beta);
    REQUIRE(got.probabilities.size() == h.rows());
    CHECK(std::abs(got.probabilities.sum() - 1.0) < 1e-12);
    CHECK((got.probabilities - want).cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd shifted = h + 3.7 * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    const DensityDiagonal got2 = density_diagonal(diagonalize(shifted), beta);
    CHECK((got.probabilities - got2.probabilities).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero transverse field reduces the density to the classical Boltzmann weights") {
    Rng rng(14);
    const SpinSystem sys = random_system(4, rng);
    const double beta = 1.3;
    const DensityDiagonal dense = density_diagonal(diagonalize(sys, 0.0, 1.0), beta);
    const DensityDiagonal direct = boltzmann_diagonal(classical_energies(sys), beta);
    CHECK((dense.probabilities - direct.probabilities).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("density diagonal rejects non-positive beta") {
    Rng rng(15);
    const SpinSystem sys = random_system(2, rng);
    const ExactModel m = diagonalize(sys);
    CHECK_THROWS_AS(density_diagonal(m, 0.0), ValidationError);
    CHECK_THROWS_AS(density_diagonal(m, -1.0), ValidationError);
}

TEST_CASE("visible marginal sums probability over the trailing hidden bits") {
    SECTION("all qubits visible is the identity") {
        Rng rng(16);
        const SpinSystem sys = random_system(3, rng);
        const DensityDiagonal d = density_diagonal(diagonalize(sys), 1.0);
        const Eigen::VectorXd m = marginal_visible(d, 3, 3);
        CHECK((m - d.probabilities).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("single visible qubit pools the halves of the state vector") {
        // Classical one-qubit field: p(s0 = +1) = e^beta / (e^beta + e^-beta),
        // and s0 = +1 occupies the low-index half (bit 0 of qubit 0).
        SpinSystem sys;
        sys.n_qubits = 2;
        sys.n_visible = 1;
        sys.gamma = Eigen::VectorXd::Zero(2);
        sys.bias = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
        const double beta = 0.9;
        const DensityDiagonal d = boltzmann_diagonal(classical_energies(sys), beta);
        const Eigen::VectorXd m = marginal_visible(d, 2, 1);
        const double want_up = std::exp(beta) / (std::exp(beta) + std::exp(-beta));
        CHECK(m[0] == Catch::Approx(want_up).margin(1e-12));
        CHECK(m[1] == Catch::Approx(1.0 - want_up).margin(1e-12));
    }
    SECTION("12-qubit projection equals a brute-force sum") {
        const int n = 12, nv = 5;
        Rng rng(17);
        DensityDiagonal d;
        d.beta = 1.0;
        d.probabilities.resize(1 << n);
        for (Eigen::Index k = 0; k < d.probabilities.size(); ++k) d.probabilities[k] = rng.uniform();
        d.probabilities /= d.probabilities.sum();
        const Eigen::VectorXd got = marginal_visible(d, n, nv);
        REQUIRE(got.size() == (1 << nv));
        for (Eigen::Index v = 0; v < got.size(); ++v) {
            double acc = 0.0;
            for (Eigen::Index hbits = 0; hbits < (1 << (n - nv)); ++hbits)
                acc += d.probabilities[(v << (n - nv)) | hbits];
            REQUIRE(got[v] == Catch::Approx(acc).margin(1e-15));
        }
    }
    SECTION("bad arguments are rejected") {
        DensityDiagonal d;
        d.probabilities = Eigen::VectorXd::Constant(4, 0.25);
        CHECK_THROWS_AS(marginal_visible(d, 2, 3), ValidationError);
        CHECK_THROWS_AS(marginal_visible(d, 3, 1), ValidationError);
    }
}

TEST_CASE("exact moments reproduce a three-qubit hand enumeration") {
    Rng rng(18);
    const SpinSystem sys = random_system(3, rng);
    const double beta = 0.7;
    const DensityDiagonal d = boltzmann_diagonal(classical_energies(sys), beta);
    const Moments m = exact_moments(d, sys);

    // Independent enumeration with explicit spin tables.
    const int n = 3;
    double z = 0.0;
    Eigen::VectorXd first = Eigen::VectorXd::Zero(n);
    std::vector<double> second(sys.couplings.size(), 0.0);
    for (int k = 0; k < 8; ++k) {
        double s[3];
        for (int q = 0; q < n; ++q) s[q] = ((k >> (n - 1 - q)) & 1) ? -1.0 : 1.0;
        double energy = 0.0;
        for (int q = 0; q < n; ++q) energy -= sys.bias[q] * s[q];
        for (const auto& c : sys.couplings) energy -= c.w * s[c.i] * s[c.j];
        const double weight = std::exp(-beta * energy);
        z += weight;
        for (int q = 0; q < n; ++q) first[q] += weight * s[q];
        for (std::size_t c = 0; c < sys.couplings.size(); ++c)
            second[c] += weight * s[sys.couplings[c].i] * s[sys.couplings[c].j];
    }
    for (int q = 0; q < n; ++q) CHECK(m.first[q] == Catch::Approx(first[q] / z).margin(1e-12));
    for (std::size_t c = 0; c < second.size(); ++c)
        CHECK(m.second[c] == Catch::Approx(second[c] / z).margin(1e-12));
}

TEST_CASE("single-qubit longitudinal field gives the tanh magnetization") {
    SpinSystem sys;
    sys.n_qubits = 1;
    sys.n_visible = 1;
    sys.gamma = Eigen::VectorXd::Zero(1);
    sys.bias = Eigen::VectorXd::Ones(1);
    const DensityDiagonal d = boltzmann_diagonal(classical_energies(sys), 1.0);
    const Moments m = exact_moments(d, sys);
    CHECK(m.first[0] == Catch::Approx(std::tanh(1.0)).margin(1e-15));
}

TEST_CASE("quantum moments agree with an independent density computation") {
    Rng rng(19);
    const SpinSystem sys = random_system(2, rng);
    const double beta = 1.1;
    const Moments m = exact_moments(density_diagonal(diagonalize(sys), beta), sys);

    const Eigen::MatrixXd h = reference_hamiltonian(sys, 1.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    Eigen::VectorXd w = (-(beta * (solver.eigenvalues().array() -
                                   solver.eigenvalues().minCoeff()))).exp();
    w /= w.sum();
    const Eigen::MatrixXd rho =
        solver.eigenvectors() * w.asDiagonal() * solver.eigenvectors().transpose();
    for (int q = 0; q < 2; ++q) {
        const double want = (rho * at_qubit(kSz, q, 2)).trace();
        CHECK(m.first[q] == Catch::Approx(want).margin(1e-10));
    }
    const double want_zz = (rho * at_qubit(kSz, 0, 2) * at_qubit(kSz, 1, 2)).trace();
    CHECK(m.second[0] == Catch::Approx(want_zz).margin(1e-10));
}

TEST_CASE("clamped hidden expectations follow the two-level closed form") {
    SECTION("zero effective field gives zero magnetization") {
        SpinSystem sys;
        sys.n_qubits = 2;
        sys.n_visible = 1;
        sys.gamma = (Eigen::VectorXd(2) << 0.4, 1.0).finished();
        sys.bias = Eigen::VectorXd::Zero(2);
        const Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
        const Eigen::VectorXd m = clamped_hidden_expectations(sys, v);
        REQUIRE(m.size() == 1);
        CHECK(m[0] == 0.0);
    }
    SECTION("balanced field and transverse term") {
        SpinSystem sys;
        sys.n_qubits = 2;
        sys.n_visible = 1;
        sys.gamma = (Eigen::VectorXd(2) << 0.0, 0.5).finished();
        sys.bias = (Eigen::VectorXd(2) << 0.0, 0.5).finished();
        const Eigen::VectorXd m = clamped_hidden_expectations(sys, Eigen::VectorXd::Ones(1));
        const double d = std::sqrt(0.5 * 0.5 + 0.5 * 0.5);
        CHECK(m[0] == Catch::Approx(0.5 / d * std::tanh(d)).margin(1e-15));
    }
    SECTION("agrees with the dense two-level thermal expectation") {
        Rng rng(20);
        for (int rep = 0; rep < 100; ++rep) {
            const double gamma = std::abs(rng.normal(0.0, 1.0)) + 1e-3;
            const double w = rng.normal(0.0, 1.0);
            const double bias_h = rng.normal(0.0, 1.0);
            const double v = rng.sign();

            SpinSystem pair;
            pair.n_qubits = 2;
            pair.n_visible = 1;
            pair.gamma = (Eigen::VectorXd(2) << 0.0, gamma).finished();
            pair.bias = (Eigen::VectorXd(2) << 0.0, bias_h).finished();
            pair.couplings.push_back({0, 1, w});
            const Eigen::VectorXd closed =
                clamped_hidden_expectations(pair, Eigen::VectorXd::Constant(1, v));

            // Dense route: a single qubit carrying the effective field.
            SpinSystem one;
            one.n_qubits = 1;
            one.n_visible = 1;
            one.gamma = Eigen::VectorXd::Constant(1, gamma);
            one.bias = Eigen::VectorXd::Constant(1, bias_h + w * v);
            const Moments m = exact_moments(density_diagonal(diagonalize(one), 1.0), one);
            REQUIRE(std::abs(closed[0] - m.first[0]) < 1e-12);
        }
    }
    SECTION("hidden-hidden couplings are rejected") {
        SpinSystem sys;
        sys.n_qubits = 3;
        sys.n_visible = 1;
        sys.gamma = Eigen::VectorXd::Ones(3);
        sys.bias = Eigen::VectorXd::Zero(3);
        sys.couplings.push_back({1, 2, 0.5});
        CHECK_THROWS_AS(clamped_hidden_expectations(sys, Eigen::VectorXd::Ones(1)),
                        ValidationError);
    }
    SECTION("visible spins must be exactly +-1") {
        SpinSystem sys;
        sys.n_qubits = 2;
        sys.n_visible = 1;
        sys.gamma = Eigen::VectorXd::Ones(2);
        sys.bias = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(clamped_hidden_expectations(sys, Eigen::VectorXd::Constant(1, 0.5)),
                        ValidationError);
    }
}

TEST_CASE("system validation enforces the dense capacity limit") {
    SpinSystem sys;
    sys.n_qubits = kMaxDenseQubits + 1;
    sys.n_visible = 1;
    sys.gamma = Eigen::VectorXd::Ones(sys.n_qubits);
    sys.bias = Eigen::VectorXd::Zero(sys.n_qubits);
    CHECK_THROWS_AS(validate_system(sys), CapacityError);
}

TEST_CASE("system validation rejects malformed couplings") {
    SpinSystem sys;
    sys.n_qubits = 3;
    sys.n_visible = 3;
    sys.gamma = Eigen::VectorXd::Ones(3);
    sys.bias = Eigen::VectorXd::Zero(3);
    SECTION("self coupling") {
        sys.couplings.push_back({1, 1, 0.5});
        CHECK_THROWS_AS(validate_system(sys), ValidationError);
    }
    SECTION("duplicate pair") {
        sys.couplings.push_back({0, 2, 0.5});
        sys.couplings.push_back({0, 2, -0.5});
        CHECK_THROWS_AS(validate_system(sys), ValidationError);
    }
    SECTION("index out of range") {
        sys.couplings.push_back({0, 3, 0.5});
        CHECK_THROWS_AS(validate_system(sys), ValidationError);
    }
}
