#include <catch2/catch_amalgamated.hpp>

#include <qbm_forge/rbm.hpp>
#include <qbm_forge/rng.hpp>

#include <cmath>
#include <vector>

#include "test_util.hpp"

using namespace qbm_forge;

namespace {

RbmParameters random_rbm(int n_v, int n_h, Rng& rng, double sd = 0.3) {
    RbmParameters p;
    p.a.resize(n_v);
    p.b.resize(n_h);
    p.w.resize(n_v, n_h);
    for (int i = 0; i < n_v; ++i) p.a[i] = rng.normal(0.0, sd);
    for (int j = 0; j < n_h; ++j) p.b[j] = rng.normal(0.0, sd);
    for (int i = 0; i < n_v; ++i)
        for (int j = 0; j < n_h; ++j) p.w(i, j) = rng.normal(0.0, sd);
    return p;
}

Eigen::VectorXi bits_of(std::uint64_t k, int n) {
    Eigen::VectorXi v(n);
    for (int i = 0; i < n; ++i) v[i] = static_cast<int>((k >> i) & 1u);
    return v;
}

// Unnormalized visible weight: sum over every hidden configuration.
double visible_weight(const RbmParameters& p, const Eigen::VectorXi& v) {
    const int n_h = p.n_hidden();
    double acc = 0.0;
    for (std::uint64_t kh = 0; kh < (1ULL << n_h); ++kh)
        acc += std::exp(-rbm_energy(p, v, bits_of(kh, n_h)));
    return acc;
}

Eigen::VectorXd exact_visible_distribution(const RbmParameters& p) {
    const int n_v = p.n_visible();
    Eigen::VectorXd w(1LL << n_v);
    for (std::uint64_t kv = 0; kv < (1ULL << n_v); ++kv)
        w[kv] = visible_weight(p, bits_of(kv, n_v));
    return w / w.sum();
}

} // namespace

TEST_CASE("rbm energy matches its definition on a hand case") {
    RbmParameters p;
    p.a.resize(2);
    p.b.resize(1);
    p.w.resize(2, 1);
    p.a << 0.5, -0.25;
    p.b << 0.75;
    p.w << 2.0, -1.0;
    Eigen::VectorXi v(2), h(1);
    v << 1, 1;
    h << 1;
    CHECK(rbm_energy(p, v, h) == Catch::Approx(-(0.5 - 0.25) - 0.75 - (2.0 - 1.0)).margin(1e-15));
    h << 0;
    CHECK(rbm_energy(p, v, h) == Catch::Approx(-0.25).margin(1e-15));
    v << 1, 2;
    h << 1;
    CHECK_THROWS_AS(rbm_energy(p, v, h), ValidationError);
}

TEST_CASE("conditionals agree with the joint enumeration") {
    Rng rng(81);
    const RbmParameters p = random_rbm(3, 2, rng);
    for (std::uint64_t kv = 0; kv < 8; ++kv) {
        const Eigen::VectorXi v = bits_of(kv, 3);
        const Eigen::VectorXd cond = hidden_conditional(p, v);
        for (int j = 0; j < 2; ++j) {
            double num = 0.0, den = 0.0;
            for (std::uint64_t kh = 0; kh < 4; ++kh) {
                const Eigen::VectorXi h = bits_of(kh, 2);
                const double w = std::exp(-rbm_energy(p, v, h));
                den += w;
                if (h[j] == 1) num += w;
            }
            CHECK(cond[j] == Catch::Approx(num / den).margin(1e-12));
        }
    }
    for (std::uint64_t kh = 0; kh < 4; ++kh) {
        const Eigen::VectorXi h = bits_of(kh, 2);
        const Eigen::VectorXd cond = visible_conditional(p, h);
        for (int i = 0; i < 3; ++i) {
            double num = 0.0, den = 0.0;
            for (std::uint64_t kv = 0; kv < 8; ++kv) {
                const Eigen::VectorXi v = bits_of(kv, 3);
                const double w = std::exp(-rbm_energy(p, v, h));
                den += w;
                if (v[i] == 1) num += w;
            }
            CHECK(cond[i] == Catch::Approx(num / den).margin(1e-12));
        }
    }
}

TEST_CASE("a cd update replays exactly from the documented op order") {
    Rng rng(82);
    const RbmParameters p0 = random_rbm(2, 2, rng, 0.4);
    Eigen::MatrixXi batch(2, 3);
    batch << 1, 0, 1, 0, 1, 1;
    const double eta = 0.05;

    RbmParameters lib = p0;
    Rng lib_rng(4242);
    cd_update(lib, batch, 1, eta, lib_rng);

    // Mirror: per column, positive hidden probabilities, one Gibbs step that
    // draws the hidden bits then the visible bits with fresh uniforms.
    RbmParameters mine = p0;
    Rng my_rng(4242);
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd da = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(2);
    for (int c = 0; c < 3; ++c) {
        const Eigen::VectorXi v_pos = batch.col(c);
        const Eigen::VectorXd h_pos = hidden_conditional(p0, v_pos);
        Eigen::VectorXi h(2), v_neg(2);
        const Eigen::VectorXd ph = hidden_conditional(p0, v_pos);
        for (int j = 0; j < 2; ++j) h[j] = my_rng.uniform() < ph[j] ? 1 : 0;
        const Eigen::VectorXd pv = visible_conditional(p0, h);
        for (int i = 0; i < 2; ++i) v_neg[i] = my_rng.uniform() < pv[i] ? 1 : 0;
        const Eigen::VectorXd h_neg = hidden_conditional(p0, v_neg);
        const Eigen::VectorXd vp = v_pos.cast<double>();
        const Eigen::VectorXd vn = v_neg.cast<double>();
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) dw(i, j) += vp[i] * h_pos[j] - vn[i] * h_neg[j];
        da += vp - vn;
        db += h_pos - h_neg;
    }
    const double scale = eta / 3.0;
    mine.w += scale * dw;
    mine.a += scale * da;
    mine.b += scale * db;

    CHECK((lib.w - mine.w).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((lib.a - mine.a).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((lib.b - mine.b).cwiseAbs().maxCoeff() <= 1e-15);

    CHECK_THROWS_AS(cd_update(lib, batch, 0, eta, lib_rng), ValidationError);
    CHECK_THROWS_AS(cd_update(lib, Eigen::MatrixXi(2, 0), 1, eta, lib_rng), ValidationError);
}

TEST_CASE("the moment-form likelihood gradient matches finite differences") {
    Rng rng(83);
    RbmParameters p = random_rbm(4, 3, rng, 0.4);
    Eigen::MatrixXi data(4, 6);
    for (int c = 0; c < 6; ++c) data.col(c) = bits_of(rng.below(16), 4);
    const int N = 6;

    const auto log_likelihood = [&](const RbmParameters& q) {
        double z = 0.0;
        for (std::uint64_t kv = 0; kv < 16; ++kv) z += visible_weight(q, bits_of(kv, 4));
        double acc = 0.0;
        for (int c = 0; c < N; ++c) acc += std::log(visible_weight(q, data.col(c)));
        return acc - N * std::log(z);
    };

    // Analytic gradient: positive statistics minus model moments from the
    // full joint enumeration.
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(4), gb = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(4, 3);
    for (int c = 0; c < N; ++c) {
        const Eigen::VectorXi v = data.col(c);
        const Eigen::VectorXd hp = hidden_conditional(p, v);
        ga += v.cast<double>();
        gb += hp;
        gw += v.cast<double>() * hp.transpose();
    }
    double z = 0.0;
    Eigen::VectorXd mv = Eigen::VectorXd::Zero(4), mh = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd mvh = Eigen::MatrixXd::Zero(4, 3);
    for (std::uint64_t kv = 0; kv < 16; ++kv)
        for (std::uint64_t kh = 0; kh < 8; ++kh) {
            const Eigen::VectorXi v = bits_of(kv, 4);
            const Eigen::VectorXi h = bits_of(kh, 3);
            const double w = std::exp(-rbm_energy(p, v, h));
            z += w;
            mv += w * v.cast<double>();
            mh += w * h.cast<double>();
            mvh += w * v.cast<double>() * h.cast<double>().transpose();
        }
    ga -= N * mv / z;
    gb -= N * mh / z;
    gw -= N * mvh / z;

    const double fd_h = 1e-5;
    double worst = 0.0;
    const auto fd_check = [&](double* coeff, double analytic) {
        const double saved = *coeff;
        *coeff = saved + fd_h;
        const double up = log_likelihood(p);
        *coeff = saved - fd_h;
        const double dn = log_likelihood(p);
        *coeff = saved;
        const double fd = (up - dn) / (2.0 * fd_h);
        worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(fd)));
    };
    for (int i = 0; i < 4; ++i) fd_check(&p.a[i], ga[i]);
    for (int j = 0; j < 3; ++j) fd_check(&p.b[j], gb[j]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) fd_check(&p.w(i, j), gw(i, j));
    CHECK(worst <= 1e-6);
}

TEST_CASE("long gibbs chains reproduce the enumerated visible marginal") {
    Rng rng(84);
    const RbmParameters p = random_rbm(3, 2, rng, 0.3);
    const Eigen::VectorXd exact = exact_visible_distribution(p);

    Rng chain_rng(85);
    const int n = 300000;
    const Eigen::MatrixXi samples = sample_rbm(p, n, 5000, 1, chain_rng);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
    for (int c = 0; c < n; ++c) {
        int k = 0;
        for (int i = 0; i < 3; ++i) k |= samples(i, c) << i;
        counts[k] += 1.0;
    }
    const Eigen::VectorXd empirical = counts / counts.sum();
    CHECK(kl_divergence(exact, empirical, KlSmoothing::kPlain, 1e-9) <= 1e-3);
}

TEST_CASE("clamped sampling pins the bits and targets the conditional law") {
    Rng rng(86);
    const RbmParameters p = random_rbm(3, 2, rng, 0.4);
    Clamp clamp;
    clamp.indices = {0};
    clamp.bits = {1};
    Rng chain_rng(87);
    const int n = 150000;
    const Eigen::MatrixXi samples = sample_rbm(p, n, 3000, 1, chain_rng, clamp);
    int violations = 0;
    for (int c = 0; c < n; ++c)
        if (samples(0, c) != 1) ++violations;
    REQUIRE(violations == 0);

    // Exact conditional over the two free bits given v0 = 1.
    Eigen::VectorXd w(4);
    for (int k = 0; k < 4; ++k) {
        Eigen::VectorXi v(3);
        v << 1, k & 1, (k >> 1) & 1;
        w[k] = visible_weight(p, v);
    }
    const Eigen::VectorXd exact = w / w.sum();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(4);
    for (int c = 0; c < n; ++c) counts[samples(1, c) | (samples(2, c) << 1)] += 1.0;
    CHECK(kl_divergence(exact, counts / counts.sum(), KlSmoothing::kPlain, 1e-9) <= 2e-3);

    Clamp bad;
    bad.indices = {5};
    bad.bits = {1};
    CHECK_THROWS_AS(sample_rbm(p, 10, 0, 1, chain_rng, bad), ValidationError);
    bad.indices = {0};
    bad.bits = {2};
    CHECK_THROWS_AS(sample_rbm(p, 10, 0, 1, chain_rng, bad), ValidationError);
}

TEST_CASE("learning rate decay halves on schedule") {
    CHECK(decayed_lr(0.1, 50, 10, 1) == 0.1);
    CHECK(decayed_lr(0.1, 50, 10, 50) == 0.1);
    CHECK(decayed_lr(0.1, 50, 10, 60) == Catch::Approx(0.05).margin(1e-15));
    CHECK(decayed_lr(0.1, 50, 10, 70) == Catch::Approx(0.025).margin(1e-15));
    CHECK(decayed_lr(0.1, 0, 5, 5) == Catch::Approx(0.05).margin(1e-15));
    CHECK_THROWS_AS(decayed_lr(0.1, 50, 10, -1), ValidationError);
}

TEST_CASE("training is deterministic and the kl evaluation stream is isolated") {
    const BitDataset dataset = synthetic_bimodal(60, -1.0, 40, 1.0, 0.5, 3, 13);
    TrainConfig cfg;
    cfg.minibatch = 10;
    cfg.epochs = 3;
    cfg.eta0 = 0.05;
    cfg.seed = 21;

    const TrainedRbm a = train_rbm(dataset, 4, cfg);
    const TrainedRbm b = train_rbm(dataset, 4, cfg);
    CHECK((a.params.w - b.params.w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.params.a - b.params.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.params.b - b.params.b).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.history.size() == 3);
    CHECK(a.history[0].epoch == 1);
    CHECK(a.history[2].epoch == 3);
    CHECK(std::isnan(a.history[0].kl));

    TrainConfig with_eval = cfg;
    with_eval.kl_interval = 2;
    with_eval.kl_samples = 200;
    with_eval.kl_thermalization = 100;
    with_eval.kl_spacing = 2;
    const TrainedRbm c = train_rbm(dataset, 4, with_eval);
    CHECK((a.params.w - c.params.w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.params.a - c.params.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::isnan(c.history[0].kl));
    CHECK(std::isfinite(c.history[1].kl));
    CHECK(std::isnan(c.history[2].kl));
}

TEST_CASE("zero-epoch training leaves the freshly seeded parameters in place") {
    const BitDataset dataset = synthetic_bimodal(30, -1.0, 20, 1.0, 0.5, 3, 13);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    TrainedRbm model = train_rbm(dataset, 2, cfg);
    CHECK(model.epochs_trained == 0);
    CHECK(model.history.empty());
    CHECK(model.params.a.isZero(0.0));
    CHECK(model.params.b.isZero(0.0));
    Rng init(5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) CHECK(model.params.w(i, j) == init.normal(0.0, 0.01));

    const Eigen::MatrixXd w0 = model.params.w;
    continue_training(model, dataset, 0);
    CHECK(model.epochs_trained == 0);
    CHECK((model.params.w - w0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resumed training keeps the global epoch numbering and stays deterministic") {
    const BitDataset dataset = synthetic_bimodal(60, -1.0, 40, 1.0, 0.5, 3, 17);
    TrainConfig cfg;
    cfg.minibatch = 10;
    cfg.epochs = 2;
    cfg.eta0 = 0.08;
    cfg.t_decay = 1;
    cfg.T_decay = 2;
    cfg.seed = 31;

    TrainedRbm model = train_rbm(dataset, 3, cfg);
    test_util::TempDir dir;
    save_rbm(dir.file("model.txt"), model);

    continue_training(model, dataset, 2);
    REQUIRE(model.history.size() == 4);
    for (int t = 0; t < 4; ++t) {
        CHECK(model.history[t].epoch == t + 1);
        CHECK(model.history[t].lr == lr_at(cfg, t + 1));
    }
    CHECK(model.epochs_trained == 4);

    TrainedRbm reloaded = load_rbm(dir.file("model.txt"));
    continue_training(reloaded, dataset, 2);
    CHECK((reloaded.params.w - model.params.w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((reloaded.params.a - model.params.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((reloaded.params.b - model.params.b).cwiseAbs().maxCoeff() == 0.0);

    BitDataset other = synthetic_bimodal(10, -1.0, 10, 1.0, 0.5, 4, 1);
    CHECK_THROWS_AS(continue_training(reloaded, other, 1), ValidationError);
}

TEST_CASE("rbm models round trip through their text format") {
    const BitDataset dataset = synthetic_bimodal(40, -1.0, 20, 1.0, 0.5, 3, 19);
    TrainConfig cfg;
    cfg.minibatch = 7;
    cfg.epochs = 2;
    cfg.eta0 = 0.037;
    cfg.t_decay = 3;
    cfg.T_decay = 4;
    cfg.cd_steps = 2;
    cfg.seed = 3141;
    cfg.kl_interval = 1;
    cfg.kl_samples = 100;
    cfg.kl_thermalization = 50;
    cfg.kl_spacing = 3;
    cfg.kl_bins = 16;
    cfg.kl_epsilon = 1e-5;
    const TrainedRbm model = train_rbm(dataset, 3, cfg);

    test_util::TempDir dir;
    save_rbm(dir.file("m.txt"), model);
    const TrainedRbm back = load_rbm(dir.file("m.txt"));
    CHECK((back.params.a - model.params.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.params.b - model.params.b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.params.w - model.params.w).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.epochs_trained == model.epochs_trained);
    CHECK(back.config.minibatch == 7);
    CHECK(back.config.eta0 == cfg.eta0);
    CHECK(back.config.T_decay == 4);
    CHECK(back.config.cd_steps == 2);
    CHECK(back.config.seed == cfg.seed);
    CHECK(back.config.kl_interval == 1);
    CHECK(back.config.kl_epsilon == cfg.kl_epsilon);

    save_history(dir.file("h.csv"), model.history);
    const std::string text = test_util::slurp(dir.file("h.csv"));
    CHECK(text.rfind("epoch,lr,kl\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);

    // Truncated files are rejected.
    const std::string full = test_util::slurp(dir.file("m.txt"));
    test_util::spit(dir.file("cut.txt"), full.substr(0, full.size() / 2));
    CHECK_THROWS_AS(load_rbm(dir.file("cut.txt")), IoError);
    CHECK_THROWS_AS(load_rbm(dir.file("absent.txt")), IoError);
}

TEST_CASE("training configuration is validated") {
    const BitDataset dataset = synthetic_bimodal(20, -1.0, 10, 1.0, 0.5, 2, 23);
    TrainConfig cfg;
    cfg.minibatch = 0;
    CHECK_THROWS_AS(train_rbm(dataset, 2, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.eta0 = 0.0;
    CHECK_THROWS_AS(train_rbm(dataset, 2, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.cd_steps = 0;
    CHECK_THROWS_AS(train_rbm(dataset, 2, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.T_decay = 0;
    CHECK_THROWS_AS(train_rbm(dataset, 2, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.kl_interval = 1;
    cfg.kl_samples = 0;
    CHECK_THROWS_AS(train_rbm(dataset, 2, cfg), ValidationError);
    cfg = TrainConfig{};
    CHECK_THROWS_AS(train_rbm(dataset, 0, cfg), ValidationError);
}
