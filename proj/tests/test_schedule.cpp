#include <catch2/catch_amalgamated.hpp>

#include <qbm_forge/sampler.hpp>
#include <qbm_forge/schedule.hpp>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

using namespace qbm_forge;

namespace {

IsingProblem random_problem(int n, Rng& rng, double sd = 0.5) {
    IsingProblem p;
    p.n = n;
    p.h.resize(n);
    for (int i = 0; i < n; ++i) p.h[i] = rng.normal(0.0, sd);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) p.j.push_back({i, j, rng.normal(0.0, sd)});
    return p;
}

} // namespace

TEST_CASE("bundled schedule curve loads and pins its endpoints") {
    const ScheduleCurve curve = load_schedule_curve(test_util::asset_path("schedule_curve.csv"));
    REQUIRE(curve.s.size() >= 2);
    CHECK(curve.s[0] == 0.0);
    CHECK(curve.s[curve.s.size() - 1] == 1.0);
    const CurvePoint end = interpolate_curve(curve, 1.0);
    CHECK(end.a_ghz == 0.0);
    CHECK(end.b_ghz == Catch::Approx(11.8).margin(1e-9));
    const CurvePoint start = interpolate_curve(curve, 0.0);
    CHECK(start.a_ghz > start.b_ghz);  // transverse-dominated at the start
}

TEST_CASE("curve interpolation is linear between rows and rejects out-of-range points") {
    const ScheduleCurve curve = load_schedule_curve(test_util::asset_path("schedule_curve.csv"));
    const double s0 = curve.s[3], s1 = curve.s[4];
    const double mid = 0.5 * (s0 + s1);
    const CurvePoint p = interpolate_curve(curve, mid);
    CHECK(p.a_ghz == Catch::Approx(0.5 * (curve.a_ghz[3] + curve.a_ghz[4])).margin(1e-12));
    CHECK(p.b_ghz == Catch::Approx(0.5 * (curve.b_ghz[3] + curve.b_ghz[4])).margin(1e-12));
    CHECK_THROWS_AS(interpolate_curve(curve, -0.01), ValidationError);
    CHECK_THROWS_AS(interpolate_curve(curve, 1.01), ValidationError);
}

TEST_CASE("curve files round trip through save and load") {
    const ScheduleCurve curve = load_schedule_curve(test_util::asset_path("schedule_curve.csv"));
    test_util::TempDir dir;
    save_schedule_curve(dir.file("curve.csv"), curve);
    const ScheduleCurve again = load_schedule_curve(dir.file("curve.csv"));
    REQUIRE(again.s.size() == curve.s.size());
    CHECK((again.s - curve.s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((again.a_ghz - curve.a_ghz).cwiseAbs().maxCoeff() == 0.0);
    CHECK((again.b_ghz - curve.b_ghz).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed curve files are rejected") {
    test_util::TempDir dir;
    SECTION("missing file") {
        CHECK_THROWS_AS(load_schedule_curve(dir.file("absent.csv")), IoError);
    }
    SECTION("bad header") {
        test_util::spit(dir.file("c.csv"), "a,b,c\n0,1,1\n1,0,1\n");
        CHECK_THROWS_AS(load_schedule_curve(dir.file("c.csv")), IoError);
    }
    SECTION("non-monotone s") {
        test_util::spit(dir.file("c.csv"), "s,A_GHz,B_GHz\n0,6,0.3\n0.5,3,5\n0.4,1,8\n1,0,11.8\n");
        CHECK_THROWS_AS(load_schedule_curve(dir.file("c.csv")), ValidationError);
    }
    SECTION("transverse term still dominant at the end") {
        test_util::spit(dir.file("c.csv"), "s,A_GHz,B_GHz\n0,6,0.3\n1,12,11.8\n");
        CHECK_THROWS_AS(load_schedule_curve(dir.file("c.csv")), ValidationError);
    }
}

TEST_CASE("inverse temperature and millikelvin conversions agree and round trip") {
    // 1 GHz of energy corresponds to ~48 mK, so beta = 0.5/GHz sits near 96 mK.
    CHECK(beta_to_temperature_mk(0.5) == Catch::Approx(1000.0 / (kGhzPerKelvin * 0.5)).margin(1e-9));
    CHECK(std::abs(beta_to_temperature_mk(0.5) - 96.0) < 0.1);
    for (const double beta : {0.1, 0.5, 1.0, 3.0})
        CHECK(temperature_mk_to_beta(beta_to_temperature_mk(beta)) ==
              Catch::Approx(beta).margin(1e-12));
    CHECK_THROWS_AS(beta_to_temperature_mk(0.0), ValidationError);
    CHECK_THROWS_AS(temperature_mk_to_beta(-5.0), ValidationError);
}

TEST_CASE("pause-quench waypoints ramp, hold, and quench at the requested slope") {
    PauseQuenchSpec spec;
    spec.s_quench = 0.55;
    spec.t_relative_us = 20.0;
    spec.delta_pause_us = 2.0;
    spec.alpha_quench_per_us = 2.0;
    const auto pts = build_pause_quench(spec);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].t_us == 0.0);
    CHECK(pts[0].s == 0.0);
    CHECK(pts[1].t_us == Catch::Approx(11.0).margin(1e-12));  // 0.55 * 20
    CHECK(pts[1].s == 0.55);
    CHECK(pts[2].t_us == Catch::Approx(13.0).margin(1e-12));
    CHECK(pts[2].s == 0.55);
    // Quench duration (1 - 0.55) / 2 = 0.225 us.
    CHECK(pts[3].t_us - pts[2].t_us == Catch::Approx(0.225).margin(1e-12));
    CHECK(pts[3].s == 1.0);
}

TEST_CASE("waypoints are monotone for random valid specs") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        PauseQuenchSpec spec;
        spec.s_quench = 0.05 + 0.95 * rng.uniform();
        spec.t_relative_us = 1.0 + 99.0 * rng.uniform();
        spec.delta_pause_us = rng.uniform() < 0.3 ? 0.0 : 100.0 * rng.uniform();
        spec.alpha_quench_per_us = 0.05 + 1.95 * rng.uniform();
        const auto pts = build_pause_quench(spec);
        REQUIRE(pts.size() >= 2);
        CHECK(pts.front().s == 0.0);
        CHECK(pts.back().s == 1.0);
        for (std::size_t i = 1; i < pts.size(); ++i) {
            CHECK(pts[i].t_us > pts[i - 1].t_us);
            CHECK(pts[i].s >= pts[i - 1].s);
        }
    }
}

TEST_CASE("a full-length anneal degenerates to two waypoints and drops the pause") {
    PauseQuenchSpec spec;
    spec.s_quench = 1.0;
    spec.delta_pause_us = 5.0;
    const auto pts = build_pause_quench(spec);
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].t_us == Catch::Approx(spec.t_relative_us).margin(1e-12));
}

TEST_CASE("invalid pause-quench specs are rejected") {
    PauseQuenchSpec spec;
    SECTION("zero s_quench") {
        spec.s_quench = 0.0;
        CHECK_THROWS_AS(build_pause_quench(spec), ValidationError);
    }
    SECTION("negative pause") {
        spec.delta_pause_us = -1.0;
        CHECK_THROWS_AS(build_pause_quench(spec), ValidationError);
    }
    SECTION("slope above the device ceiling") {
        spec.alpha_quench_per_us = 2.5;
        CHECK_THROWS_AS(build_pause_quench(spec), ValidationError);
    }
}

TEST_CASE("model parameters round trip through the annealer coefficient mapping") {
    const ScheduleCurve curve = load_schedule_curve(test_util::asset_path("schedule_curve.csv"));
    Rng rng(32);
    for (int rep = 0; rep < 50; ++rep) {
        const int nv = 2 + static_cast<int>(rng.below(3));
        const int nh = 1 + static_cast<int>(rng.below(3));
        BqrbmParameters p;
        p.s_star = 0.3 + 0.7 * rng.uniform();
        p.beta_hat = 0.2 + rng.uniform();
        const CurvePoint pt = interpolate_curve(curve, p.s_star);
        p.bias.resize(nv + nh);
        for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias[i] = rng.normal(0.0, 1.0);
        p.w.resize(nv, nh);
        for (int i = 0; i < nv; ++i)
            for (int j = 0; j < nh; ++j) p.w(i, j) = rng.normal(0.0, 1.0);
        p.gamma = Eigen::VectorXd::Constant(nv + nh, p.beta_hat * pt.a_ghz);

        const IsingProblem prob = qbm_to_ising(p, curve);
        const BqrbmParameters back = ising_to_qbm(prob, nv, p.beta_hat, p.s_star, curve);
        CHECK((back.bias - p.bias).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((back.w - p.w).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((back.gamma - p.gamma).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(back.beta_hat == p.beta_hat);
        CHECK(back.s_star == p.s_star);
    }
}

TEST_CASE("coefficient mapping applies the -1/(beta_hat B) scale") {
    const ScheduleCurve curve = load_schedule_curve(test_util::asset_path("schedule_curve.csv"));
    BqrbmParameters p;
    p.s_star = 1.0;
    p.beta_hat = 0.5;
    p.bias = (Eigen::VectorXd(2) << 1.18, -2.36).finished();
    p.w = Eigen::MatrixXd::Constant(1, 1, 5.9);
    p.gamma = Eigen::VectorXd::Zero(2);
    const IsingProblem prob = qbm_to_ising(p, curve);
    // beta_hat * B(1) = 0.5 * 11.8 = 5.9.
    CHECK(prob.h[0] == Catch::Approx(-0.2).margin(1e-12));
    CHECK(prob.h[1] == Catch::Approx(0.4).margin(1e-12));
    REQUIRE(prob.j.size() == 1);
    CHECK(prob.j[0].value == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("autoscale factor measures range overshoot and rescaling cures it") {
    Rng rng(33);
    for (int rep = 0; rep < 1000; ++rep) {
        IsingProblem p = random_problem(2 + static_cast<int>(rng.below(4)), rng,
                                        0.3 + 3.0 * rng.uniform());
        const double f = autoscale_factor(p);
        REQUIRE(f >= 0.0);
        if (f <= 1.0) {
            CHECK(problem_in_range(p));
        } else {
            CHECK_FALSE(problem_in_range(p));
            IsingProblem scaled = p;
            scaled.h /= f;
            for (auto& c : scaled.j) c.value /= f;
            CHECK(autoscale_factor(scaled) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("autoscale ignores slack on the opposite side of an asymmetric range") {
    IsingProblem p;
    p.n = 2;
    p.h = (Eigen::VectorXd(2) << 0.0, 0.0).finished();
    p.j.push_back({0, 1, -0.5});
    // j range is [-1, 1]; a negative-only problem overshoots nothing.
    CHECK(autoscale_factor(p) == Catch::Approx(0.5).margin(1e-15));
    p.j[0].value = 2.0;
    CHECK(autoscale_factor(p) == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("chain strength scales with the largest coefficient but saturates at the range") {
    IsingProblem p;
    p.n = 2;
    p.h = (Eigen::VectorXd(2) << 0.3, -0.1).finished();
    p.j.push_back({0, 1, 0.6});
    CHECK(chain_strength(p, 1.5) == Catch::Approx(1.5 * 0.6).margin(1e-15));
    p.j[0].value = 3.0;  // above the range cap of 1.0
    CHECK(chain_strength(p, 1.5) == Catch::Approx(1.5 * 1.0).margin(1e-15));
    CHECK_THROWS_AS(chain_strength(p, 0.0), ValidationError);
}

TEST_CASE("gauge transforms are involutions that permute the classical spectrum") {
    Rng rng(34);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + static_cast<int>(rng.below(5));
        const IsingProblem p = random_problem(n, rng);
        const GaugeVector r = random_gauge(n, rng);
        const IsingProblem g = apply_gauge(p, r);
        const IsingProblem gg = apply_gauge(g, r);
        CHECK((gg.h - p.h).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t c = 0; c < p.j.size(); ++c) CHECK(gg.j[c].value == p.j[c].value);

        Eigen::VectorXd e1 = classical_energies(system_from_problem(p));
        Eigen::VectorXd e2 = classical_energies(system_from_problem(g));
        std::sort(e1.data(), e1.data() + e1.size());
        std::sort(e2.data(), e2.data() + e2.size());
        CHECK((e1 - e2).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gauge vectors must be +-1 entries of the right length") {
    IsingProblem p;
    p.n = 2;
    p.h = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(apply_gauge(p, GaugeVector{1}), ValidationError);
    CHECK_THROWS_AS(apply_gauge(p, GaugeVector{1, 0}), ValidationError);
    CHECK(identity_gauge(3) == GaugeVector{1, 1, 1});
}

TEST_CASE("problem validation rejects malformed coefficient lists") {
    IsingProblem p;
    p.n = 3;
    p.h = Eigen::VectorXd::Zero(3);
    SECTION("duplicate J") {
        p.j.push_back({0, 1, 0.2});
        p.j.push_back({0, 1, 0.3});
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
    SECTION("reversed indices") {
        p.j.push_back({2, 1, 0.2});
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
    SECTION("h length mismatch") {
        p.h = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(validate_problem(p), ValidationError);
    }
}
