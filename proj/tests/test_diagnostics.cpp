// Coupled-experiment diagnostics: measurement tables, the dropout/RaM and
// dropout/penalty couplings, the geometric-exponential jump-time coupling,
// finite-vs-limit distances, the NTK Gram matrix and its exponential
// moving-average identity, and the RMS parameter distance.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "dplab/diagnostics.hpp"
#include "dplab/harness.hpp"
#include "dplab/limits.hpp"
#include "dplab/model.hpp"
#include "dplab/rng.hpp"
#include "dplab/runner.hpp"

using namespace dplab;

namespace {

Dataset toy_data(int m, int d, std::uint64_t seed) {
    FeatureMap map(FeatureKind::BoundedSmooth, d);
    TeacherSpec spec;
    spec.input_dim = d;
    spec.teacher_width = 8;
    spec.sample_count = m;
    return gen_teacher_student(map, spec, seed);
}

}  // namespace

TEST_CASE("measurement tables: means and CSV output") {
    MeasurementTable t{{64, 1, 10.0, "w1", 0.5},
                       {64, 2, 10.0, "w1", 0.7},
                       {128, 1, 10.0, "w1", 0.3},
                       {64, 1, 10.0, "other", 9.0}};
    CHECK(table_mean(t, "w1", 64) == doctest::Approx(0.6));
    CHECK(table_mean(t, "w1", 128) == doctest::Approx(0.3));
    CHECK_THROWS(table_mean(t, "w1", 999));
    const std::string path = "test_diag_table.csv";
    save_table_csv(t, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "n,seed,time_or_step,metric,value");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 4);
    std::remove(path.c_str());
}

TEST_CASE("dropout-RaM coupling: zero at q = 1 and K = 0, deterministic, shrinking in n") {
    const int d = 3;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = toy_data(6, d, 1001);

    CoupleConfig cfg;
    cfg.widths = {16};
    cfg.seeds = {1, 2};
    cfg.tau = 0.2;
    cfg.q = 1.0;  // no masking: all variants coincide exactly
    cfg.steps = 5;
    for (const auto& row : couple_dropout_ram(map, data, cfg, true)) CHECK(row.value == 0.0);

    cfg.q = 0.5;
    cfg.steps = 0;  // no steps: identical initial states
    for (const auto& row : couple_dropout_ram(map, data, cfg, false)) CHECK(row.value == 0.0);

    cfg.steps = 30;
    cfg.widths = {64, 512};
    cfg.seeds = {1, 2, 3};
    const MeasurementTable a = couple_dropout_ram(map, data, cfg, false);
    const MeasurementTable b = couple_dropout_ram(map, data, cfg, false);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].value == b[k].value);  // replay determinism
        CHECK(a[k].value > 0.0);
    }
    CHECK(table_mean(a, "sup_path_ram", 512) < table_mean(a, "sup_path_ram", 64));
    CHECK(table_mean(a, "rms_param_ram", 512) < table_mean(a, "rms_param_ram", 64));
}

TEST_CASE("dropout-penalty coupling: validation and finite positive distances") {
    const int d = 3;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = toy_data(5, d, 1013);
    PenaltyCoupleConfig cfg;
    cfg.widths = {32};
    cfg.seeds = {1};
    cfg.beta = 1.0;
    cfg.tau0 = 1.0;
    cfg.a = 1.25;
    cfg.horizon = 0.05;

    PenaltyCoupleConfig bad = cfg;
    bad.a = 1.0;  // tau exponent must exceed 1
    CHECK_THROWS(couple_dropout_penalty(map, data, bad));
    bad = cfg;
    bad.widths = {1};  // q_n = 1/(beta n) >= 1
    CHECK_THROWS(couple_dropout_penalty(map, data, bad));

    const MeasurementTable t = couple_dropout_penalty(map, data, cfg);
    REQUIRE(t.size() == 1);
    CHECK(t[0].metric == "sup_path_penalty");
    CHECK(t[0].value >= 0.0);
    CHECK(std::isfinite(t[0].value));
}

TEST_CASE("geometric-exponential coupling: geometric counts and the sandwich bounds") {
    const double alpha = 1.0;
    const HyperSchedule sched{1.0, 1.0, 0.5, 0.5};  // tau_n = q_n = n^{-1/2}
    const long n = 10000;
    const double tau_n = sched.tau(n), q_n = sched.q(n);
    const double alpha_n = sched.alpha(n);
    const auto samples = couple_geom_exp(alpha, sched, n, 20000, 5);
    REQUIRE(samples.size() == 20000);
    double mean_k = 0;
    for (const auto& s : samples) {
        const double dk = s.tau_delta_k / tau_n;
        CHECK(dk >= 1.0 - 1e-9);  // ceil of a positive quantity
        CHECK(std::abs(dk - double(std::llround(dk))) < 1e-6);
        mean_k += double(std::llround(dk));
        // Samplewise sandwich: dT alpha_n/((1+q_n) alpha) <= tau_n dK < dT alpha_n/alpha + tau_n.
        CHECK(s.tau_delta_k >= s.delta_t * alpha_n / ((1.0 + q_n) * alpha) - 1e-12);
        CHECK(s.tau_delta_k < s.delta_t * alpha_n / alpha + tau_n + 1e-12);
        CHECK(s.gap == doctest::Approx(std::abs(s.tau_delta_k - s.delta_t)));
    }
    mean_k /= double(samples.size());
    // dK is geometric with success probability ~q_n: mean 1/q_n, sd ~ 1/q_n.
    CHECK(std::abs(mean_k - 1.0 / q_n) <=
          3.0 * (1.0 / q_n) / std::sqrt(double(samples.size())) + 1.0);

    // Mean gap decreases along the width sequence.
    std::vector<double> gaps;
    for (long nn : {100L, 1000L, 10000L}) {
        const auto ss = couple_geom_exp(alpha, sched, nn, 5000, 7);
        double g = 0;
        for (const auto& s : ss) g += s.gap;
        gaps.push_back(g / double(ss.size()));
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);

    const HyperSchedule constant{0.5, 0.5, 0.0, 0.0};
    CHECK(couple_geom_exp(alpha, constant, 100, 10, 1).size() == 10);
    const HyperSchedule capped{1.0, 1.0, 0.0, 0.0};  // q_n = 1
    CHECK_THROWS(couple_geom_exp(alpha, capped, 100, 10, 1));
}

TEST_CASE("finite-vs-limit coupling smoke: phase I distances shrink with width") {
    const int d = 3;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = toy_data(5, d, 1021);
    const HyperSchedule sched{0.5, 0.5, 0.0, 0.0};
    FiniteLimitConfig cfg;
    cfg.widths = {32, 256};
    cfg.seeds = {1, 2, 3};
    cfg.ref_multiplier = 4;
    cfg.horizon = 5;  // steps in phase I
    const MeasurementTable t =
        couple_finite_limit(map, data, Phase::DiscreteJump, sched, cfg);
    CHECK(table_mean(t, "w1", 256) < table_mean(t, "w1", 32));
    CHECK(table_mean(t, "sup_path", 256) <= table_mean(t, "sup_path", 32) + 1e-12);
    CHECK_THROWS(couple_finite_limit(map, data, Phase::Degenerate, sched, cfg));
    FiniteLimitConfig empty;
    CHECK_THROWS(couple_finite_limit(map, data, Phase::DiscreteJump, sched, empty));
}

TEST_CASE("NTK Gram matrix: naive oracle, single particle, symmetry, PSD") {
    const int d = 3, n = 16;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = toy_data(5, d, 1031);
    const ParticleEnsemble ens = init_ensemble(n, d, 1033);

    const Eigen::MatrixXd gram = ntk_gram(map, data, ens);
    Eigen::MatrixXd naive = Eigen::MatrixXd::Zero(data.size(), data.size());
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd jac = map.jacobian(data, ens.particle(i));
        naive += jac * jac.transpose();
    }
    naive /= double(n);
    CHECK((gram - naive).norm() <= 1e-12 * (1.0 + naive.norm()));

    // Single particle: exactly the Jacobian outer product.
    ParticleEnsemble one;
    one.positions = ens.positions.topRows(1);
    const Eigen::MatrixXd jac0 = map.jacobian(data, one.particle(0));
    const Eigen::MatrixXd outer0 = jac0 * jac0.transpose();
    CHECK(((ntk_gram(map, data, one) - outer0).array() == 0.0).all());

    CHECK((gram - gram.transpose()).norm() <= 1e-13 * gram.norm());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * gram.norm());
    ParticleEnsemble none;
    none.positions.resize(0, map.param_dim());
    CHECK_THROWS(ntk_gram(map, data, none));
}

TEST_CASE("NTK EMA residual: grid validation, stationary case, quadrature refinement") {
    const int d = 2, n = 128;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    Dataset data = toy_data(4, d, 1039);
    const ParticleEnsemble init = init_ensemble(n, d, 1041);
    const double alpha = 1.0;

    // Interpolating targets: the jump process never moves, Gram is constant,
    // and the identity holds up to trapezoid quadrature error.
    data.targets = predictor(map, data, init);
    const auto record_on_grid = [&](int intervals) {
        RecorderConfig rc;
        rc.stride = intervals;
        rc.store_ensembles = true;
        return ctsjump_simulate(map, data, init, alpha, 2.0 * alpha,
                                JumpScheme::EventDriven, 0.0, 3, rc);
    };
    const TrajectoryRecord coarse = record_on_grid(40);   // dt = alpha/20
    const TrajectoryRecord fine = record_on_grid(80);     // dt = alpha/40
    const std::vector<double> r_coarse = ntk_ema_residual(map, data, coarse, alpha);
    const std::vector<double> r_fine = ntk_ema_residual(map, data, fine, alpha);
    REQUIRE(r_coarse.size() == coarse.size());
    CHECK(r_coarse[0] == 0.0);
    double worst_coarse = 0, worst_fine = 0;
    for (double v : r_coarse) worst_coarse = std::max(worst_coarse, v);
    for (double v : r_fine) worst_fine = std::max(worst_fine, v);
    CHECK(worst_coarse < 1e-3);
    CHECK(worst_fine < worst_coarse / 2.0);  // ~4x for second-order quadrature

    // Grid coarser than alpha/10 is rejected, as are truncated inputs.
    const TrajectoryRecord bad_grid = record_on_grid(8);  // dt = alpha/4
    CHECK_THROWS(ntk_ema_residual(map, data, bad_grid, alpha));
    TrajectoryRecord no_ens = coarse;
    no_ens.ensembles.clear();
    CHECK_THROWS(ntk_ema_residual(map, data, no_ens, alpha));
    TrajectoryRecord warped = coarse;
    warped.times[1] += 0.011;
    CHECK_THROWS(ntk_ema_residual(map, data, warped, alpha));
}

TEST_CASE("RMS parameter distance") {
    ParticleEnsemble a, b;
    a.positions = Eigen::MatrixXd::Zero(4, 2);
    b.positions = Eigen::MatrixXd::Zero(4, 2);
    b.positions(0, 0) = 2.0;
    // ||A - B||_F / sqrt(n) = 2 / 2 = 1.
    CHECK(rms_param_distance(a, b) == doctest::Approx(1.0));
    CHECK(rms_param_distance(a, a) == 0.0);
    ParticleEnsemble c;
    c.positions = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS(rms_param_distance(a, c));
}
