// Finite-width dynamics: mask statistics, every update variant against an
// independent oracle, the four-term decomposition (including its bitwise
// identities and variance scalings), the trajectory runner, and the sharpness
// statistics.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dplab/masks.hpp"
#include "dplab/model.hpp"
#include "dplab/rng.hpp"
#include "dplab/runner.hpp"
#include "dplab/steps.hpp"

using namespace dplab;

namespace {

Dataset random_dataset(int m, int d, std::uint64_t seed) {
    Dataset data;
    data.inputs.resize(m, d);
    data.targets.resize(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j)
            data.inputs(i, j) = rng::gaussian(seed, rng::Lane::TeacherData, i, 0, j);
        data.targets[i] = rng::gaussian(seed, rng::Lane::TeacherData, i, 1, 0);
    }
    return data;
}

ParticleEnsemble random_ensemble(int n, int p, std::uint64_t seed) {
    ParticleEnsemble ens;
    ens.positions.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            ens.positions(i, j) = rng::gaussian(seed, rng::Lane::Init, i, 7, j);
    return ens;
}

// Literal transcription of the update formulas with plain loops; the oracle
// shares no code with the batched implementations.
Eigen::MatrixXd naive_dropout_update(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const Eigen::VectorXd& eta, double tau) {
    const int n = ens.width();
    Eigen::VectorXd f_masked = Eigen::VectorXd::Zero(data.size());
    for (int j = 0; j < n; ++j)
        f_masked += (1.0 + eta[j]) * map.evaluate(data, ens.particle(j));
    f_masked /= double(n);
    Eigen::MatrixXd upd(n, ens.param_dim());
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd jac = map.jacobian(data, ens.particle(i));
        upd.row(i) =
            (-tau * (1.0 + eta[i]) * (jac.transpose() * (f_masked - data.targets)))
                .transpose();
    }
    return upd;
}

}  // namespace

TEST_CASE("masks take the two dropout values with the right probability and moments") {
    for (double q : {0.1, 0.3, 0.5, 0.9, 1.0}) {
        const MaskStream ms(q, 12345);
        const int n = 200000;
        double s1 = 0, s2 = 0, skeep = 0;
        for (int i = 0; i < n; ++i) {
            const double eta = ms.draw(i, 0);
            const bool keep = eta == (1.0 - q) / q;
            CHECK((keep || eta == -1.0));
            skeep += keep ? 1.0 : 0.0;
            s1 += eta;
            s2 += eta * eta;
        }
        const double var = (1.0 - q) / q;
        CHECK(std::abs(skeep / n - q) <= 3.0 * std::sqrt(q * (1 - q) / n) + 1e-12);
        CHECK(std::abs(s1 / n) <= 3.0 * std::sqrt(var / n) + 1e-12);
        // E[eta^2] = (1-q)/q; 1 + E[eta^2] = 1/q.
        CHECK(std::abs(s2 / n - var) <= 1e-2 * (var + 1.0));
        CHECK(std::abs(1.0 + s2 / n - 1.0 / q) <= 1e-2 / q);
    }
    CHECK_THROWS(MaskStream(0.0, 1));
    CHECK_THROWS(MaskStream(1.5, 1));
}

TEST_CASE("mask draws are replayable and order-independent") {
    const MaskStream ms(0.3, 99);
    const Eigen::VectorXd row = ms.row(64, 5);
    for (int i = 63; i >= 0; --i) CHECK(ms.draw(i, 5) == row[i]);
    // A different step or particle index decouples the draw.
    CHECK(ms.row(64, 6) != row);
}

TEST_CASE("dropout step matches a naive transcription of the update rule") {
    const int d = 3, n = 17;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 201);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 203);
    const MaskStream ms(0.4, 205);
    const Eigen::VectorXd eta = ms.row(n, 0);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 0.4;
    const ParticleEnsemble out = dropout_step(map, data, ens, eta, cfg);
    const Eigen::MatrixXd want =
        ens.positions + naive_dropout_update(map, data, ens, eta, cfg.tau);
    CHECK((out.positions - want).norm() <= 1e-12 * (1.0 + want.norm()));
}

TEST_CASE("dropout with q = 1 is plain gradient descent") {
    const int d = 3, n = 9;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(4, d, 211);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 213);
    StepConfig cfg;
    cfg.tau = 0.1;
    cfg.keep_rate = 1.0;
    const Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);  // q = 1 forces eta = 0
    const ParticleEnsemble a = dropout_step(map, data, ens, eta, cfg);
    const ParticleEnsemble b = plain_gd_step(map, data, ens, cfg);
    CHECK((a.positions - b.positions).norm() <= 1e-13 * (1.0 + b.positions.norm()));
}

TEST_CASE("all-dropped masks freeze the ensemble") {
    const int d = 2, n = 7;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(4, d, 217);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 219);
    StepConfig cfg;
    cfg.tau = 0.3;
    cfg.keep_rate = 0.5;
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, -1.0);
    const ParticleEnsemble out = dropout_step(map, data, ens, eta, cfg);
    // (1 + eta) = 0 kills both the forward and backward factors; positions may
    // only change by an exactly-zero increment.
    CHECK((out.positions.array() == ens.positions.array()).all());
}

TEST_CASE("single-particle dropout step matches a hand expansion") {
    const int d = 2;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(3, d, 223);
    const ParticleEnsemble ens = random_ensemble(1, map.param_dim(), 227);
    StepConfig cfg;
    cfg.tau = 0.15;
    cfg.keep_rate = 0.5;
    Eigen::VectorXd eta(1);
    eta[0] = 1.0;  // kept: (1-q)/q with q = 1/2
    const Eigen::VectorXd x = ens.particle(0);
    const Eigen::VectorXd want =
        x - cfg.tau * 2.0 *
                (map.jacobian(data, x).transpose() *
                 (2.0 * map.evaluate(data, x) - data.targets));
    const ParticleEnsemble out = dropout_step(map, data, ens, eta, cfg);
    CHECK((out.particle(0) - want).norm() <= 1e-12 * (1.0 + want.norm()));
}

TEST_CASE("random-metric step only rescales backward gradients") {
    const int d = 3, n = 11;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 229);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 233);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 0.25;
    const Eigen::VectorXd eta = MaskStream(0.25, 239).row(n, 0);
    const ParticleEnsemble out = ram_step(map, data, ens, eta, cfg);
    const Eigen::VectorXd r = residual(map, data, ens);  // unmasked forward pass
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd g =
            map.jacobian(data, ens.particle(i)).transpose() * r;
        const Eigen::VectorXd want = ens.particle(i) - cfg.tau * (1.0 + eta[i]) * g;
        CHECK((out.particle(i) - want).norm() <= 1e-12 * (1.0 + want.norm()));
        if (eta[i] == -1.0) CHECK(out.particle(i) == ens.particle(i));
    }
}

TEST_CASE("propagation-noise step moves every particle off the masked forward pass") {
    const int d = 3, n = 11;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 241);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 251);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 0.5;
    const Eigen::VectorXd eta = MaskStream(0.5, 257).row(n, 0);
    const ParticleEnsemble out = pn_step(map, data, ens, eta, cfg);
    Eigen::VectorXd f_masked = Eigen::VectorXd::Zero(data.size());
    for (int j = 0; j < n; ++j)
        f_masked += (1.0 + eta[j]) * map.evaluate(data, ens.particle(j));
    f_masked /= double(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd want =
            ens.particle(i) - cfg.tau * (map.jacobian(data, ens.particle(i)).transpose() *
                                         (f_masked - data.targets));
        CHECK((out.particle(i) - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
}

TEST_CASE("propagation noise is unbiased: averaged over masks it recovers plain GD") {
    const int d = 2, n = 6;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(4, d, 263);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 269);
    StepConfig cfg;
    cfg.tau = 0.1;
    cfg.keep_rate = 0.3;
    const MaskStream ms(0.3, 271);
    const int trials = 20000;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, map.param_dim());
    for (int t = 0; t < trials; ++t)
        mean += pn_step(map, data, ens, ms.row(n, t), cfg).positions;
    mean /= double(trials);
    const Eigen::MatrixXd want = plain_gd_step(map, data, ens, cfg).positions;
    // E[eta] = 0, so E[masked forward] is the unmasked one; 4-sigma-ish MC band.
    CHECK((mean - want).lpNorm<Eigen::Infinity>() <
          5.0 * cfg.tau * std::sqrt((1 - cfg.keep_rate) / cfg.keep_rate / trials) * 10.0);
}

TEST_CASE("mixed-mask step matches a naive two-mask transcription") {
    const int d = 3, n = 13;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 277);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 281);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 0.5;
    const Eigen::VectorXd fwd = MaskStream(0.5, 283).row(n, 0);
    const Eigen::VectorXd bwd = MaskStream(0.5, 293).row(n, 0);
    const ParticleEnsemble out = pn_ram_step(map, data, ens, fwd, bwd, cfg);
    Eigen::VectorXd f_masked = Eigen::VectorXd::Zero(data.size());
    for (int j = 0; j < n; ++j)
        f_masked += (1.0 + fwd[j]) * map.evaluate(data, ens.particle(j));
    f_masked /= double(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd want =
            ens.particle(i) -
            cfg.tau * (1.0 + bwd[i]) *
                (map.jacobian(data, ens.particle(i)).transpose() * (f_masked - data.targets));
        CHECK((out.particle(i) - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
}

TEST_CASE("explicit penalty step is n-scaled GD on the penalized loss") {
    const int d = 3, n = 7;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(4, d, 307);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 311);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.penalty_beta = 0.7;
    const ParticleEnsemble out = explicit_penalty_step(map, data, ens, cfg);
    const auto objective = [&](const ParticleEnsemble& e) {
        double pen = 0;
        for (int i = 0; i < n; ++i) pen += penalty_value(map, data, e.particle(i));
        return loss(map, data, e) + cfg.penalty_beta / double(n) * pen;
    };
    const double h = 1e-6;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < map.param_dim(); ++j) {
            ParticleEnsemble ep = ens, em = ens;
            ep.positions(i, j) += h;
            em.positions(i, j) -= h;
            const double grad = (objective(ep) - objective(em)) / (2 * h);
            const double step = out.positions(i, j) - ens.positions(i, j);
            CHECK(step == doctest::Approx(-cfg.tau * double(n) * grad).epsilon(5e-5));
        }
    StepConfig plain = cfg;
    plain.penalty_beta = 0.0;
    CHECK((explicit_penalty_step(map, data, ens, plain).positions -
           plain_gd_step(map, data, ens, plain).positions)
              .norm() <= 1e-13);
}

TEST_CASE("equal-mask decomposition sums bitwise to the dropout increment") {
    const int d = 4, n = 64;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(6, d, 313);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 317);
    StepConfig cfg;
    cfg.tau = 0.25;
    cfg.keep_rate = 0.3;
    const Eigen::VectorXd eta = MaskStream(0.3, 331).row(n, 4);
    const UpdateDecomposition dec = decompose_update(map, data, ens, eta, eta, cfg);
    CHECK((dec.penalty.array() == 0.0).all());  // exact zero coefficient
    const Eigen::MatrixXd sum = ((dec.no_dropout + dec.ram) + dec.pn) + dec.penalty;
    const ParticleEnsemble out = dropout_step(map, data, ens, eta, cfg);
    const Eigen::MatrixXd expect = ens.positions + sum;
    CHECK((out.positions.array() == expect.array()).all());  // bit-identical
    // Same code path: dropout == pn_ram with identical forward/backward masks.
    const ParticleEnsemble mixed = pn_ram_step(map, data, ens, eta, eta, cfg);
    CHECK((out.positions.array() == mixed.positions.array()).all());
}

TEST_CASE("independent-mask decomposition sums to the mixed-mask increment plus penalty") {
    const int d = 3, n = 21;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 337);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 347);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 0.5;
    const MaskStream ms(0.5, 349), mst(0.5, 349, rng::Lane::MaskTilde);
    const Eigen::VectorXd eta = ms.row(n, 0), etat = mst.row(n, 0);
    const UpdateDecomposition dec = decompose_update(map, data, ens, ms, mst, 0, cfg);
    // Naive penalty oracle: tau (eta_i etat_i - eta_i^2)/n Dphi_i' phi_i.
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd want =
            cfg.tau * (eta[i] * etat[i] - eta[i] * eta[i]) / double(n) *
            (map.jacobian(data, ens.particle(i)).transpose() *
             map.evaluate(data, ens.particle(i)));
        CHECK((dec.penalty.row(i).transpose() - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
    // First three terms reproduce the forward-etat / backward-eta step.
    const ParticleEnsemble mixed = pn_ram_step(map, data, ens, etat, eta, cfg);
    const Eigen::MatrixXd three = (dec.no_dropout + dec.ram) + dec.pn;
    CHECK(((ens.positions + three).array() == mixed.positions.array()).all());
    // Shared streams are rejected.
    CHECK_THROWS(decompose_update(map, data, ens, ms, ms, 0, cfg));
}

TEST_CASE("decomposition terms vanish at q = 1 and have the stated mask means") {
    const int d = 3, n = 16;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 353);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 359);
    StepConfig cfg;
    cfg.tau = 0.2;
    cfg.keep_rate = 1.0;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    const UpdateDecomposition at_q1 = decompose_update(map, data, ens, zero, zero, cfg);
    CHECK((at_q1.ram.array() == 0.0).all());
    CHECK((at_q1.penalty.array() == 0.0).all());
    // PN at q=1: backward factor 1, forward masked mean is 0 exactly.
    CHECK(at_q1.pn.norm() <= 1e-14);

    // Monte Carlo means over independent masks: E[RaM] = E[PN] = 0 and
    // E[Penalty_i] = -tau (1-q)/(n q) Dphi_i' phi_i.
    cfg.keep_rate = 0.5;
    const double q = cfg.keep_rate;
    const MaskStream ms(q, 367), mst(q, 367, rng::Lane::MaskTilde);
    const int trials = 40000;
    Eigen::MatrixXd mram = Eigen::MatrixXd::Zero(n, map.param_dim());
    Eigen::MatrixXd mpn = mram, mpen = mram;
    for (int t = 0; t < trials; ++t) {
        const UpdateDecomposition dec = decompose_update(map, data, ens, ms, mst, t, cfg);
        mram += dec.ram;
        mpn += dec.pn;
        mpen += dec.penalty;
    }
    mram /= double(trials);
    mpn /= double(trials);
    mpen /= double(trials);
    const double mc = 5.0 * cfg.tau / std::sqrt(double(trials));
    CHECK(mram.lpNorm<Eigen::Infinity>() < mc);
    CHECK(mpn.lpNorm<Eigen::Infinity>() < mc);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd want =
            -cfg.tau * (1.0 - q) / (double(n) * q) *
            (map.jacobian(data, ens.particle(i)).transpose() *
             map.evaluate(data, ens.particle(i)));
        CHECK((mpen.row(i).transpose() - want).lpNorm<Eigen::Infinity>() < mc / double(n) * 4.0);
    }
}

TEST_CASE("runner is deterministic, respects K = 0, and plain GD descends") {
    const int d = 3, n = 24;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(6, d, 373);
    const ParticleEnsemble init = random_ensemble(n, map.param_dim(), 379);
    StepConfig cfg;
    cfg.tau = 0.05;
    cfg.keep_rate = 0.5;
    RecorderConfig rc;
    rc.stride = 3;
    rc.tracked_count = 2;

    const TrajectoryRecord a = run(map, data, init, cfg, 42, 10, rc);
    const TrajectoryRecord b = run(map, data, init, cfg, 42, 10, rc);
    REQUIRE(a.size() == b.size());
    CHECK(a.steps.front() == 0);
    CHECK(a.steps.back() == 10);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.losses[k] == b.losses[k]);
        CHECK((a.tracked[k].array() == b.tracked[k].array()).all());
        CHECK(a.times[k] == double(a.steps[k]) * cfg.tau);
    }
    CHECK((a.final_positions.array() == b.final_positions.array()).all());
    // A different mask seed gives a different dropout trajectory.
    const TrajectoryRecord c = run(map, data, init, cfg, 43, 10, rc);
    CHECK(a.losses.back() != c.losses.back());

    const TrajectoryRecord empty = run(map, data, init, cfg, 42, 0, rc);
    REQUIRE(empty.size() == 1);
    CHECK(empty.losses[0] == loss(map, data, init));
    CHECK((empty.final_positions.array() == init.positions.array()).all());

    StepConfig plain = cfg;
    plain.variant = Variant::PlainGD;
    plain.tau = 0.02;
    RecorderConfig every;
    every.stride = 1;
    const TrajectoryRecord gd = run(map, data, init, plain, 1, 100, every);
    for (std::size_t k = 1; k < gd.size(); ++k) CHECK(gd.losses[k] < gd.losses[k - 1]);
}

TEST_CASE("runner aborts with diagnostics on non-finite positions") {
    const int d = 2, n = 4;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(3, d, 383);
    ParticleEnsemble init = random_ensemble(n, map.param_dim(), 389);
    init.positions(2, 1) = std::nan("");
    StepConfig cfg;
    cfg.tau = 0.1;
    cfg.variant = Variant::PlainGD;
    RecorderConfig rc;
    CHECK_THROWS_AS(run(map, data, init, cfg, 1, 5, rc), NumericalAbort);
    try {
        run(map, data, init, cfg, 1, 5, rc);
    } catch (const NumericalAbort& e) {
        CHECK(e.step >= 1);
        CHECK(e.particle >= 0);
    }
}

TEST_CASE("variance of the decomposition terms scales as predicted in width") {
    const int d = 3;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 397);
    StepConfig cfg;
    cfg.tau = 0.3;
    cfg.keep_rate = 0.5;
    const std::vector<int> widths{64, 256, 1024};
    std::vector<double> var_ram, var_pen, var_pn;
    for (int n : widths) {
        const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 401);
        const MaskStream ms(cfg.keep_rate, 409), mst(cfg.keep_rate, 409, rng::Lane::MaskTilde);
        const int trials = 300;
        std::vector<Eigen::MatrixXd> ram, pen, pn;
        Eigen::MatrixXd mram = Eigen::MatrixXd::Zero(n, map.param_dim());
        Eigen::MatrixXd mpen = mram, mpn = mram;
        for (int t = 0; t < trials; ++t) {
            UpdateDecomposition dec = decompose_update(map, data, ens, ms, mst, t, cfg);
            mram += dec.ram; mpen += dec.penalty; mpn += dec.pn;
            ram.push_back(std::move(dec.ram));
            pen.push_back(std::move(dec.penalty));
            pn.push_back(std::move(dec.pn));
        }
        mram /= trials; mpen /= trials; mpn /= trials;
        double vr = 0, vp = 0, vn = 0;
        for (int t = 0; t < trials; ++t) {
            vr += (ram[t] - mram).squaredNorm();
            vp += (pen[t] - mpen).squaredNorm();
            vn += (pn[t] - mpn).squaredNorm();
        }
        // Mean per-particle variance.
        var_ram.push_back(vr / trials / n);
        var_pen.push_back(vp / trials / n);
        var_pn.push_back(vn / trials / n);
    }
    const auto slope = [&](const std::vector<double>& v) {
        // Least-squares slope of log v against log n over the three widths.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            const double x = std::log(double(widths[k])), y = std::log(v[k]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double nn = double(widths.size());
        return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    };
    CHECK(std::abs(slope(var_ram) - 0.0) < 0.25);   // Theta(tau^2 (1-q)/q)
    CHECK(std::abs(slope(var_pen) - (-2.0)) < 0.25);  // Theta(tau^2 / (n^2 q^3))
    CHECK(std::abs(slope(var_pn) - (-1.0)) < 0.25);   // Theta(tau^2 / (n q^2))
}

TEST_CASE("sharpness statistics: definitional identities") {
    const int d = 3, n = 12;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 419);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 421);
    const SharpnessStats st = sharpness_stats(map, data, ens, 0.5, 0.25);
    REQUIRE(st.s_defined);
    CHECK(st.a > 0.0);
    CHECK(st.b >= 0.0);
    // S = 1 exactly at the deterministic mask level eta = A/(B+C) when B+C > 0.
    if (st.b + st.c > 0) {
        const double eta_max = st.a / (st.b + st.c);
        const SharpnessStats at_max =
            sharpness_stats(map, data, ens, eta_max, eta_max * eta_max);
        CHECK(at_max.s == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Zero residual: A = 0 and S is flagged undefined.
    Dataset interp = data;
    interp.targets = predictor(map, data, ens);
    const SharpnessStats degen = sharpness_stats(map, interp, ens, 0.5, 0.25);
    CHECK(!degen.s_defined);
    CHECK(degen.a == doctest::Approx(0.0));
}

TEST_CASE("sharpness statistics: S is variance-independent when curvature vanishes") {
    // With zero outer weights the relu gradient direction v = Dphi' r has only
    // an outer-weight component, and phi is linear along it away from kinks:
    // the curvature term C vanishes and S = B E[eta]^2 / (A E[eta]) no longer
    // depends on the second mask moment.
    const int d = 3, n = 10;
    const FeatureMap map(FeatureKind::ReluStandard, d);
    const Dataset data = random_dataset(5, d, 431);
    ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 433);
    ens.positions.col(0).setZero();
    // Keep every pre-activation far from the kink so the directional finite
    // difference inside the C estimate stays on one linear piece.
    ens.positions.middleCols(1, d) *= 0.1;
    ens.positions.col(d + 1) = ens.positions.col(d + 1) * 0.1 +
                               Eigen::VectorXd::Constant(n, 2.0);
    const SharpnessStats s1 = sharpness_stats(map, data, ens, 0.5, 0.25);
    const SharpnessStats s2 = sharpness_stats(map, data, ens, 0.5, 5.0);
    REQUIRE(s1.s_defined);
    CHECK(std::abs(s1.c) <= 1e-6 * (1.0 + std::abs(s1.b)));
    CHECK(s1.s == doctest::Approx(s2.s).epsilon(1e-6));
}

TEST_CASE("sharpness statistics: quadratic loss model is third-order accurate") {
    // One plain-GD step with rate h changes the loss by -h A/2 (1 - S) + O(h^3)
    // when S is evaluated at the deterministic mask level 2h.
    const int d = 3, n = 12;
    const FeatureMap map(FeatureKind::BoundedSmooth, d);
    const Dataset data = random_dataset(5, d, 439);
    const ParticleEnsemble ens = random_ensemble(n, map.param_dim(), 443);
    const double l0 = loss(map, data, ens);
    const auto err = [&](double h) {
        StepConfig cfg;
        cfg.tau = h;
        cfg.variant = Variant::PlainGD;
        const double dl = loss(map, data, plain_gd_step(map, data, ens, cfg)) - l0;
        const SharpnessStats st = sharpness_stats(map, data, ens, 2 * h, 4 * h * h);
        return std::abs(dl - (-h * st.a / 2.0 * (1.0 - st.s)));
    };
    const double e1 = err(2e-2), e2 = err(1e-2);
    CHECK(e1 / e2 > 5.0);  // ~8 for a cubic remainder
    CHECK(e1 / e2 < 12.0);
    CHECK(e2 < 1e-5);
}

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::Dropout, Variant::RaM, Variant::PN, Variant::PNRaM,
                      Variant::PlainGD, Variant::ExplicitPenalty})
        CHECK(variant_from_string(to_string(v)) == v);
    CHECK_THROWS(variant_from_string("nonsense"));
    StepConfig bad;
    bad.tau = -1.0;
    CHECK_THROWS(bad.validate());
    bad.tau = 0.1;
    bad.keep_rate = 0.0;
    CHECK_THROWS(bad.validate());
}
