#include "dplab/limits.hpp"

#include <cmath>
#include <stdexcept>

#include "dplab/runner.hpp"

namespace dplab {

namespace {

void snapshot(TrajectoryRecord& rec, const FeatureMap& map, const Dataset& data,
              const ParticleEnsemble& ens, long step, double time,
              const RecorderConfig& rec_cfg) {
    const int m = std::min(rec_cfg.tracked_count, ens.width());
    rec.push(step, time, loss(map, data, ens), predictor(map, data, ens),
             ens.positions.topRows(m));
    if (rec_cfg.store_ensembles) rec.ensembles.push_back(ens.positions);
}

// Mean-field particle velocity field: row i is -(grad V[mu](x_i) + beta grad P(x_i)).
Eigen::MatrixXd flow_field(const FeatureMap& map, const Dataset& data,
                           const ParticleEnsemble& ens, double beta) {
    const Eigen::MatrixXd phi = features_all(map, data, ens);
    const Eigen::VectorXd r = pairwise_row_mean(phi) - data.targets;
    Eigen::MatrixXd field = -jacobian_t_apply_shared(map, data, ens, r);
    if (beta != 0.0) field -= beta * jacobian_t_apply_all(map, data, ens, phi);
    return field;
}

}  // namespace

ParticleEnsemble discrete_jump_step(const FeatureMap& map, const Dataset& data,
                                    const ParticleEnsemble& ens, double q, double alpha,
                                    std::uint64_t seed, std::uint64_t step) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("discrete_jump_step: q in (0,1]");
    if (!(alpha > 0.0)) throw std::invalid_argument("discrete_jump_step: alpha > 0");
    const Eigen::VectorXd r = residual(map, data, ens);
    const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);
    ParticleEnsemble out = ens;
    // The move/stay draws share keying with MaskStream's keep events, so a
    // finite dropout run at the same seed is coupled to this recursion.
    for (int i = 0; i < ens.width(); ++i)
        if (rng::uniform(seed, rng::Lane::Mask, static_cast<std::uint64_t>(i), step) < q)
            out.positions.row(i) -= alpha * g.row(i);
    return out;
}

ParticleEnsemble wgf_step(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens, double beta, double h) {
    if (!(h > 0.0) || beta < 0.0) throw std::invalid_argument("wgf_step: need h > 0, beta >= 0");
    ParticleEnsemble out = ens;
    out.positions += h * flow_field(map, data, ens, beta);
    return out;
}

ParticleEnsemble wgf_step_rk4(const FeatureMap& map, const Dataset& data,
                              const ParticleEnsemble& ens, double beta, double h) {
    if (!(h > 0.0) || beta < 0.0)
        throw std::invalid_argument("wgf_step_rk4: need h > 0, beta >= 0");
    ParticleEnsemble stage = ens;
    const Eigen::MatrixXd k1 = flow_field(map, data, stage, beta);
    stage.positions = ens.positions + (0.5 * h) * k1;
    const Eigen::MatrixXd k2 = flow_field(map, data, stage, beta);
    stage.positions = ens.positions + (0.5 * h) * k2;
    const Eigen::MatrixXd k3 = flow_field(map, data, stage, beta);
    stage.positions = ens.positions + h * k3;
    const Eigen::MatrixXd k4 = flow_field(map, data, stage, beta);
    ParticleEnsemble out = ens;
    out.positions += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    return out;
}

TrajectoryRecord ctsjump_simulate(const FeatureMap& map, const Dataset& data,
                                  const ParticleEnsemble& initial, double alpha,
                                  double horizon, JumpScheme scheme, double thinning_dt,
                                  std::uint64_t seed, const RecorderConfig& rec_cfg) {
    if (!(alpha > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("ctsjump_simulate: need alpha > 0, horizon > 0");
    const int n = initial.width();
    // stride plays the role of the number of uniform snapshot intervals.
    const int grid = std::max(rec_cfg.stride, 1);
    const double snap_dt = horizon / grid;

    TrajectoryRecord rec;
    ParticleEnsemble ens = initial;
    snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);

    if (scheme == JumpScheme::EventDriven) {
        // Aggregate exponential clock of rate n/alpha; one uniformly chosen
        // particle jumps per event against the pre-event ensemble.
        double t = 0.0;
        std::uint64_t event = 0;
        int next_snap = 1;
        // Running feature sum, refreshed pairwise at snapshots.
        Eigen::MatrixXd phi = features_all(map, data, ens);
        Eigen::VectorXd fsum = pairwise_row_sum(phi);
        while (true) {
            const double gap = rng::exponential(seed, rng::Lane::JumpClock, event, 0, 0,
                                                alpha / static_cast<double>(n));
            const double t_next = t + gap;
            while (next_snap <= grid && static_cast<double>(next_snap) * snap_dt <= t_next) {
                fsum = pairwise_row_sum(features_all(map, data, ens));
                snapshot(rec, map, data, ens, next_snap,
                         static_cast<double>(next_snap) * snap_dt, rec_cfg);
                ++next_snap;
            }
            if (t_next > horizon) break;
            t = t_next;
            const int i = static_cast<int>(
                rng::uniform(seed, rng::Lane::JumpSelect, event, 0) * n);
            const Eigen::VectorXd x = ens.particle(i);
            const Eigen::VectorXd phi_old = map.evaluate(data, x);
            const Eigen::VectorXd r = fsum / static_cast<double>(n) - data.targets;
            ens.positions.row(i) -=
                (alpha * (map.jacobian(data, x).transpose() * r)).transpose();
            fsum += map.evaluate(data, ens.particle(i)) - phi_old;
            ++event;
        }
    } else {
        if (!(thinning_dt > 0.0) || thinning_dt >= alpha)
            throw std::invalid_argument("ctsjump_simulate: thinning dt must be in (0, alpha)");
        const auto ticks = static_cast<long>(std::ceil(horizon / thinning_dt - 1e-12));
        const double pjump = thinning_dt / alpha;
        int next_snap = 1;
        for (long k = 0; k < ticks; ++k) {
            const Eigen::VectorXd r = residual(map, data, ens);
            const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);
            for (int i = 0; i < n; ++i)
                if (rng::uniform(seed, rng::Lane::Thinning, static_cast<std::uint64_t>(i),
                                 static_cast<std::uint64_t>(k)) < pjump)
                    ens.positions.row(i) -= alpha * g.row(i);
            const double t = std::min((static_cast<double>(k) + 1.0) * thinning_dt, horizon);
            while (next_snap <= grid && static_cast<double>(next_snap) * snap_dt <= t + 1e-12) {
                snapshot(rec, map, data, ens, next_snap,
                         static_cast<double>(next_snap) * snap_dt, rec_cfg);
                ++next_snap;
            }
        }
    }
    rec.final_positions = ens.positions;
    return rec;
}

Eigen::VectorXd ctsjump_event_counts(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& initial, double alpha,
                                     double horizon, std::uint64_t seed) {
    (void)map;
    (void)data;
    if (!(alpha > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("ctsjump_event_counts: need alpha > 0, horizon > 0");
    const int n = initial.width();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    double t = 0.0;
    std::uint64_t event = 0;
    while (true) {
        t += rng::exponential(seed, rng::Lane::JumpClock, event, 0, 0,
                              alpha / static_cast<double>(n));
        if (t > horizon) break;
        const int i =
            static_cast<int>(rng::uniform(seed, rng::Lane::JumpSelect, event, 0) * n);
        counts[i] += 1.0;
        ++event;
    }
    return counts;
}

CriticalJump critical_jump(const FeatureMap& map, const Dataset& data,
                           const ParticleEnsemble& ens, double alpha, double beta,
                           std::uint64_t seed, std::uint64_t event_index) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("critical_jump: need alpha > 0, beta > 0");
    const int n = ens.width();
    CriticalJump jump;
    jump.particle = static_cast<int>(
        rng::uniform(seed, rng::Lane::JumpSelect, event_index, 0) * n);
    jump.poisson_count =
        rng::poisson(seed, rng::Lane::CriticalPoisson, event_index, 0, 0, 1.0 / beta);

    Eigen::VectorXd f_hat = Eigen::VectorXd::Zero(data.size());
    for (long j = 0; j < jump.poisson_count; ++j) {
        const int z = static_cast<int>(rng::uniform(seed, rng::Lane::CriticalSample,
                                                    event_index,
                                                    static_cast<std::uint64_t>(j)) *
                                       n);
        f_hat += map.evaluate(data, ens.particle(z));
    }
    f_hat *= beta;  // f(M_hat) with M_hat = beta sum_i delta_{Z_i}
    jump.mhat_predictor = f_hat;

    const Eigen::VectorXd x = ens.particle(jump.particle);
    const Eigen::MatrixXd jac = map.jacobian(data, x);
    jump.new_position = x - alpha * (jac.transpose() * (f_hat - data.targets)) -
                        (alpha * beta) * (jac.transpose() * map.evaluate(data, x));
    return jump;
}

TrajectoryRecord stoch_approx_run(const FeatureMap& map, const Dataset& data,
                                  const ParticleEnsemble& initial, const DriftField& drift,
                                  const NoiseField& noise, double tau_n, long step_count,
                                  const RecorderConfig& rec_cfg) {
    if (!(tau_n > 0.0)) throw std::invalid_argument("stoch_approx_run: tau_n > 0");
    if (step_count < 0) throw std::invalid_argument("stoch_approx_run: step count >= 0");
    TrajectoryRecord rec;
    ParticleEnsemble ens = initial;
    snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);
    for (long k = 0; k < step_count; ++k) {
        // X <- X + tau_n b(mu, X), then X <- X + gamma, in this order: the
        // dropout noise instantiation is defined as the residual against the
        // first partial update, so the composition reproduces dropout_step.
        const Eigen::MatrixXd gamma = noise(ens, k);  // evaluated on the pre-step state
        ens.positions += tau_n * drift(ens);
        ens.positions += gamma;
        if (!ens.finite()) {
            int bad = 0;
            for (int i = 0; i < ens.width(); ++i)
                if (!ens.positions.row(i).allFinite()) { bad = i; break; }
            throw NumericalAbort(k + 1, bad);
        }
        const long done = k + 1;
        if (done % std::max(rec_cfg.stride, 1) == 0 || done == step_count)
            snapshot(rec, map, data, ens, done, static_cast<double>(done) * tau_n, rec_cfg);
    }
    rec.final_positions = ens.positions;
    return rec;
}

TrajectoryRecord limit_reference(const FeatureMap& map, const Dataset& data, Phase phase,
                                 const LimitParams& params, const ParticleEnsemble& initial,
                                 std::uint64_t seed, double horizon,
                                 const RecorderConfig& rec_cfg) {
    TrajectoryRecord rec;
    switch (phase) {
        case Phase::DiscreteJump: {
            const auto steps = static_cast<long>(std::llround(horizon));
            ParticleEnsemble ens = initial;
            snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);
            for (long k = 0; k < steps; ++k) {
                ens = discrete_jump_step(map, data, ens, params.q, params.alpha, seed,
                                         static_cast<std::uint64_t>(k));
                const long done = k + 1;
                if (done % std::max(rec_cfg.stride, 1) == 0 || done == steps)
                    snapshot(rec, map, data, ens, done, static_cast<double>(done), rec_cfg);
            }
            rec.final_positions = ens.positions;
            return rec;
        }
        case Phase::WGF: {
            const double h = params.euler_h;
            if (!(h > 0.0)) throw std::invalid_argument("limit_reference: euler_h > 0");
            const auto steps = static_cast<long>(std::llround(horizon / h));
            ParticleEnsemble ens = initial;
            snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);
            for (long k = 0; k < steps; ++k) {
                ens = params.rk4 ? wgf_step_rk4(map, data, ens, params.beta, h)
                                 : wgf_step(map, data, ens, params.beta, h);
                const long done = k + 1;
                if (done % std::max(rec_cfg.stride, 1) == 0 || done == steps)
                    snapshot(rec, map, data, ens, done, static_cast<double>(done) * h,
                             rec_cfg);
            }
            rec.final_positions = ens.positions;
            return rec;
        }
        case Phase::ContinuousJump:
            return ctsjump_simulate(map, data, initial, params.alpha, horizon,
                                    JumpScheme::EventDriven, 0.0, seed, rec_cfg);
        case Phase::Critical: {
            const int n = initial.width();
            const int grid = std::max(rec_cfg.stride, 1);
            const double snap_dt = horizon / grid;
            ParticleEnsemble ens = initial;
            snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);
            double t = 0.0;
            std::uint64_t event = 0;
            int next_snap = 1;
            while (true) {
                const double gap =
                    rng::exponential(seed, rng::Lane::JumpClock, event, 0, 0,
                                     params.alpha / static_cast<double>(n));
                const double t_next = t + gap;
                while (next_snap <= grid &&
                       static_cast<double>(next_snap) * snap_dt <= t_next) {
                    snapshot(rec, map, data, ens, next_snap,
                             static_cast<double>(next_snap) * snap_dt, rec_cfg);
                    ++next_snap;
                }
                if (t_next > horizon) break;
                t = t_next;
                const CriticalJump jump =
                    critical_jump(map, data, ens, params.alpha, params.beta, seed, event);
                ens.positions.row(jump.particle) = jump.new_position.transpose();
                ++event;
            }
            rec.final_positions = ens.positions;
            return rec;
        }
        case Phase::Degenerate:
            throw std::invalid_argument("limit_reference: degenerate phase has no limit");
    }
    throw std::logic_error("bad phase");
}

}  // namespace dplab
