#include "dplab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "dplab/harness.hpp"
#include "dplab/runner.hpp"

namespace dplab {

void save_table_csv(const MeasurementTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17) << "n,seed,time_or_step,metric,value\n";
    for (const auto& row : table)
        out << row.n << "," << row.seed << "," << row.time_or_step << "," << row.metric
            << "," << row.value << "\n";
}

double table_mean(const MeasurementTable& table, const std::string& metric, long n) {
    double total = 0.0;
    long count = 0;
    for (const auto& row : table) {
        if (row.n != n || row.metric != metric) continue;
        total += row.value;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("table_mean: no rows for " + metric);
    return total / static_cast<double>(count);
}

MeasurementTable couple_dropout_ram(const FeatureMap& map, const Dataset& data,
                                    const CoupleConfig& cfg, bool with_comparators) {
    MeasurementTable table;
    const RecorderConfig rec_cfg{1, cfg.tracked, false};
    for (long n : cfg.widths) {
        for (std::uint64_t seed : cfg.seeds) {
            const ParticleEnsemble init = init_ensemble(n, data.dim(), seed);
            StepConfig sc;
            sc.tau = cfg.tau;
            sc.keep_rate = cfg.q;

            sc.variant = Variant::Dropout;
            const TrajectoryRecord drop = run(map, data, init, sc, seed, cfg.steps, rec_cfg);
            sc.variant = Variant::RaM;
            const TrajectoryRecord ram = run(map, data, init, sc, seed, cfg.steps, rec_cfg);

            const auto t = static_cast<double>(cfg.steps);
            table.push_back({n, seed, t, "sup_path_ram",
                             path_sup_distance(drop, ram, cfg.tracked)});
            table.push_back({n, seed, t, "rms_param_ram",
                             rms_param_distance({drop.final_positions},
                                                {ram.final_positions})});
            if (!with_comparators) continue;

            sc.variant = Variant::PlainGD;
            const TrajectoryRecord plain = run(map, data, init, sc, seed, cfg.steps, rec_cfg);
            sc.variant = Variant::PNRaM;
            const TrajectoryRecord pnram = run(map, data, init, sc, seed, cfg.steps, rec_cfg);
            table.push_back({n, seed, t, "sup_path_plain",
                             path_sup_distance(drop, plain, cfg.tracked)});
            table.push_back({n, seed, t, "rms_param_plain",
                             rms_param_distance({drop.final_positions},
                                                {plain.final_positions})});
            table.push_back({n, seed, t, "sup_path_pnram",
                             path_sup_distance(drop, pnram, cfg.tracked)});
            table.push_back({n, seed, t, "rms_param_pnram",
                             rms_param_distance({drop.final_positions},
                                                {pnram.final_positions})});
        }
    }
    return table;
}

MeasurementTable couple_dropout_penalty(const FeatureMap& map, const Dataset& data,
                                        const PenaltyCoupleConfig& cfg) {
    if (!(cfg.a > 1.0))
        throw std::invalid_argument("couple_dropout_penalty: tau exponent must exceed 1");
    if (!(cfg.beta > 0.0))
        throw std::invalid_argument("couple_dropout_penalty: beta must be positive");
    MeasurementTable table;
    for (long n : cfg.widths) {
        const double tau_n = cfg.tau0 * std::pow(static_cast<double>(n), -cfg.a);
        const double q_n = 1.0 / (cfg.beta * static_cast<double>(n));
        if (q_n >= 1.0)
            throw std::invalid_argument("couple_dropout_penalty: q_n >= 1 at this width");
        const auto steps = static_cast<long>(std::llround(cfg.horizon / tau_n));
        const RecorderConfig rec_cfg{
            static_cast<int>(std::max<long>(1, steps / 200)), cfg.tracked, false};
        for (std::uint64_t seed : cfg.seeds) {
            const ParticleEnsemble init = init_ensemble(n, data.dim(), seed);
            StepConfig sc;
            sc.tau = tau_n;
            sc.keep_rate = q_n;
            sc.variant = Variant::Dropout;
            const TrajectoryRecord drop = run(map, data, init, sc, seed, steps, rec_cfg);
            sc.keep_rate = 1.0;
            sc.variant = Variant::ExplicitPenalty;
            sc.penalty_beta = cfg.beta;
            const TrajectoryRecord pen = run(map, data, init, sc, seed, steps, rec_cfg);
            table.push_back({n, seed, cfg.horizon, "sup_path_penalty",
                             path_sup_distance(drop, pen, cfg.tracked)});
        }
    }
    return table;
}

std::vector<GeomExpSample> couple_geom_exp(double alpha, const HyperSchedule& sched,
                                           long n, int sample_count, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw std::invalid_argument("couple_geom_exp: alpha > 0");
    const double tau_n = sched.tau(n);
    const double q_n = sched.q(n);
    if (q_n >= 1.0)
        throw std::invalid_argument("couple_geom_exp: q_n = 1 makes log(1 - q_n) diverge");
    const double log1mq = std::log1p(-q_n);
    std::vector<GeomExpSample> samples;
    samples.reserve(static_cast<std::size_t>(sample_count));
    for (int s = 0; s < sample_count; ++s) {
        const double dt = rng::exponential(seed, rng::Lane::JumpClock,
                                           static_cast<std::uint64_t>(s), 0, 0, alpha);
        // X' = -dT tau_n / (alpha log(1 - q_n)); dK = ceil(X'/tau_n).
        const double dk = std::ceil(-dt / (alpha * log1mq));
        const double tdk = tau_n * dk;
        samples.push_back({dt, tdk, std::abs(tdk - dt)});
    }
    return samples;
}

namespace {

// Index of the recorded snapshot whose time is closest to `t`.
std::size_t nearest_snapshot(const TrajectoryRecord& rec, double t) {
    std::size_t best = 0;
    double best_gap = std::abs(rec.times[0] - t);
    for (std::size_t k = 1; k < rec.size(); ++k) {
        const double gap = std::abs(rec.times[k] - t);
        if (gap < best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

double tracked_distance(const TrajectoryRecord& a, std::size_t ka,
                        const TrajectoryRecord& b, std::size_t kb, int tracked) {
    const int m = std::min({tracked, static_cast<int>(a.tracked[ka].rows()),
                            static_cast<int>(b.tracked[kb].rows())});
    double sup = 0.0;
    for (int i = 0; i < m; ++i)
        sup = std::max(sup, (a.tracked[ka].row(i) - b.tracked[kb].row(i)).norm());
    return sup;
}

ParticleEnsemble prefix(const Eigen::MatrixXd& positions, long n) {
    return {positions.topRows(n)};
}

}  // namespace

MeasurementTable couple_finite_limit(const FeatureMap& map, const Dataset& data,
                                     Phase phase, const HyperSchedule& sched,
                                     const FiniteLimitConfig& cfg) {
    if (phase == Phase::Degenerate || phase == Phase::Critical)
        throw std::invalid_argument("couple_finite_limit: phase must be I, II, or III");
    if (cfg.widths.empty() || cfg.seeds.empty())
        throw std::invalid_argument("couple_finite_limit: widths and seeds required");
    const std::vector<double> probes =
        cfg.probe_times.empty() ? std::vector<double>{1.0} : cfg.probe_times;
    MeasurementTable table;
    const long n_max = *std::max_element(cfg.widths.begin(), cfg.widths.end());

    if (phase == Phase::DiscreteJump) {
        const auto steps = static_cast<long>(std::llround(cfg.horizon));
        const long n_ref = cfg.ref_multiplier * n_max;
        const RecorderConfig rc{1, cfg.tracked, true};
        LimitParams lp;
        lp.alpha = sched.tau0 / sched.q0;
        lp.q = sched.q0;
        for (std::uint64_t seed : cfg.seeds) {
            const TrajectoryRecord ref =
                limit_reference(map, data, phase, lp, init_ensemble(n_ref, data.dim(), seed),
                                seed, static_cast<double>(steps), rc);
            for (long n : cfg.widths) {
                StepConfig sc;
                sc.tau = sched.tau0;
                sc.keep_rate = sched.q0;
                sc.variant = Variant::Dropout;
                const TrajectoryRecord fin =
                    run(map, data, init_ensemble(n, data.dim(), seed), sc, seed, steps, rc);
                for (double f : probes) {
                    const auto k = static_cast<std::size_t>(
                        std::llround(f * static_cast<double>(steps)));
                    table.push_back({n, seed, static_cast<double>(k), "w1",
                                     w1_exact({fin.ensembles[k]},
                                              prefix(ref.ensembles[k], n))});
                }
                table.push_back({n, seed, static_cast<double>(steps), "sup_path",
                                 path_sup_distance(fin, ref, cfg.tracked)});
            }
        }
        return table;
    }

    if (phase == Phase::WGF) {
        const PhaseInfo info = sched.classify();
        const long n_ref = cfg.ref_multiplier * n_max;
        const double h = cfg.euler_h_ref > 0.0 ? cfg.euler_h_ref : cfg.horizon / 1024.0;
        LimitParams lp;
        lp.beta = info.beta;
        lp.euler_h = h;
        lp.rk4 = cfg.rk4_ref;
        const auto ref_steps = static_cast<long>(std::llround(cfg.horizon / h));
        const RecorderConfig ref_rc{static_cast<int>(std::max<long>(1, ref_steps / 16)),
                                    cfg.tracked, true};
        for (std::uint64_t seed : cfg.seeds) {
            const TrajectoryRecord ref =
                limit_reference(map, data, phase, lp, init_ensemble(n_ref, data.dim(), seed),
                                seed, cfg.horizon, ref_rc);
            for (long n : cfg.widths) {
                StepConfig sc;
                sc.tau = sched.tau(n);
                sc.keep_rate = sched.q(n);
                sc.variant = Variant::Dropout;
                const auto steps = static_cast<long>(std::llround(cfg.horizon / sc.tau));
                const RecorderConfig rc{static_cast<int>(std::max<long>(1, steps / 16)),
                                        cfg.tracked, true};
                const TrajectoryRecord fin =
                    run(map, data, init_ensemble(n, data.dim(), seed), sc, seed, steps, rc);
                double sup = 0.0;
                for (double f : probes) {
                    const double t = f * cfg.horizon;
                    const std::size_t kf = nearest_snapshot(fin, t);
                    const std::size_t kr = nearest_snapshot(ref, t);
                    table.push_back({n, seed, fin.times[kf], "w1",
                                     w1_exact({fin.ensembles[kf]},
                                              prefix(ref.ensembles[kr], n))});
                    sup = std::max(sup, tracked_distance(fin, kf, ref, kr, cfg.tracked));
                }
                table.push_back({n, seed, cfg.horizon, "sup_path", sup});
            }
        }
        return table;
    }

    // Phase III: reference width scales with n; W1 only (time marginals).
    const PhaseInfo info = sched.classify();
    for (std::uint64_t seed : cfg.seeds) {
        for (long n : cfg.widths) {
            const long n_ref = cfg.ref_multiplier * n;
            const RecorderConfig ref_rc{16, cfg.tracked, true};
            const TrajectoryRecord ref = ctsjump_simulate(
                map, data, init_ensemble(n_ref, data.dim(), seed), info.alpha, cfg.horizon,
                JumpScheme::EventDriven, 0.0, seed, ref_rc);
            StepConfig sc;
            sc.tau = sched.tau(n);
            sc.keep_rate = sched.q(n);
            sc.variant = Variant::Dropout;
            const auto steps = static_cast<long>(std::llround(cfg.horizon / sc.tau));
            const RecorderConfig rc{1, cfg.tracked, true};
            const TrajectoryRecord fin =
                run(map, data, init_ensemble(n, data.dim(), seed), sc, seed, steps, rc);
            for (double f : probes) {
                const double t = f * cfg.horizon;
                const std::size_t kf = nearest_snapshot(fin, t);
                const std::size_t kr = nearest_snapshot(ref, t);
                table.push_back({n, seed, ref.times[kr], "w1",
                                 w1_exact({fin.ensembles[kf]},
                                          prefix(ref.ensembles[kr], n))});
            }
        }
    }
    return table;
}

Eigen::MatrixXd ntk_gram(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens) {
    const int n = ens.width();
    if (n == 0) throw std::invalid_argument("ntk_gram: empty ensemble");
    const int m = data.size();
    Eigen::MatrixXd rows(n, m * m);
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd jac = map.jacobian(data, ens.particle(i));
        const Eigen::MatrixXd outer = jac * jac.transpose();
        rows.row(i) = Eigen::Map<const Eigen::VectorXd>(outer.data(), m * m).transpose();
    }
    const Eigen::VectorXd mean = pairwise_row_mean(rows);
    return Eigen::Map<const Eigen::MatrixXd>(mean.data(), m, m);
}

std::vector<double> ntk_ema_residual(const FeatureMap& map, const Dataset& data,
                                     const TrajectoryRecord& rec, double alpha) {
    const std::size_t count = rec.size();
    if (count < 2 || rec.ensembles.size() != count)
        throw std::invalid_argument("ntk_ema_residual: need a recorded grid with ensembles");
    const double dt = rec.times[1] - rec.times[0];
    for (std::size_t k = 1; k < count; ++k)
        if (std::abs((rec.times[k] - rec.times[k - 1]) - dt) > 1e-9 * (1.0 + dt))
            throw std::invalid_argument("ntk_ema_residual: grid must be uniform");
    if (!(dt > 0.0) || dt > alpha / 10.0 + 1e-12)
        throw std::invalid_argument("ntk_ema_residual: grid must be finer than alpha/10");

    std::vector<Eigen::MatrixXd> gram(count), gram_pushed(count);
    for (std::size_t k = 0; k < count; ++k) {
        const ParticleEnsemble ens{rec.ensembles[k]};
        gram[k] = ntk_gram(map, data, ens);
        // T_alpha: one full-ensemble GD step with learning rate alpha.
        const Eigen::VectorXd r = residual(map, data, ens);
        ParticleEnsemble pushed = ens;
        pushed.positions -= alpha * jacobian_t_apply_shared(map, data, ens, r);
        gram_pushed[k] = ntk_gram(map, data, pushed);
    }

    std::vector<double> out(count);
    out[0] = 0.0;
    for (std::size_t k = 1; k < count; ++k) {
        const double t = rec.times[k];
        Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(gram[0].rows(), gram[0].cols());
        for (std::size_t j = 0; j <= k; ++j) {
            const double w = (j == 0 || j == k) ? 0.5 : 1.0;
            integral += (w * std::exp((rec.times[j] - t) / alpha)) * gram_pushed[j];
        }
        integral *= dt;
        const Eigen::MatrixXd model =
            std::exp(-t / alpha) * gram[0] + integral / alpha;
        out[k] = (gram[k] - model).norm() / gram[k].norm();
    }
    return out;
}

double rms_param_distance(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    if (a.width() != b.width() || a.param_dim() != b.param_dim())
        throw std::invalid_argument("rms_param_distance: shape mismatch");
    return (a.positions - b.positions).norm() / std::sqrt(static_cast<double>(a.width()));
}

}  // namespace dplab
