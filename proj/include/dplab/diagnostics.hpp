#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dplab/limits.hpp"
#include "dplab/model.hpp"
#include "dplab/record.hpp"
#include "dplab/schedule.hpp"
#include "dplab/steps.hpp"
#include "dplab/transport.hpp"

namespace dplab {

// One measurement cell of a coupled experiment; serialized as CSV rows
// (n, seed, time-or-step, metric, value).
struct MeasurementRow {
    long n;
    std::uint64_t seed;
    double time_or_step;
    std::string metric;
    double value;
};
using MeasurementTable = std::vector<MeasurementRow>;

void save_table_csv(const MeasurementTable& table, const std::string& path);

// Mean of a metric at fixed n across seeds.
double table_mean(const MeasurementTable& table, const std::string& metric, long n);

struct CoupleConfig {
    std::vector<long> widths;
    std::vector<std::uint64_t> seeds;  // one coupled pair per (width, seed)
    double tau = 0.5;
    double q = 0.5;
    long steps = 50;
    int tracked = 4;
};

// Shared-seed dropout vs RaM (and optionally PlainGD / PN+RaM comparators):
// sup-path distance over the tracked particles, one row per (n, seed, metric).
// Metrics: "sup_path_ram", "sup_path_plain", "sup_path_pnram",
// plus "rms_param_*" (whole-ensemble RMS distance at the final step).
MeasurementTable couple_dropout_ram(const FeatureMap& map, const Dataset& data,
                                    const CoupleConfig& cfg, bool with_comparators);

struct PenaltyCoupleConfig {
    std::vector<long> widths;
    std::vector<std::uint64_t> seeds;
    double beta = 1.0;    // q_n = 1/(beta n)
    double tau0 = 0.5;    // tau_n = tau0 n^{-a}
    double a = 1.25;      // must exceed 1
    double horizon = 0.5; // rescaled time T, K = T/tau_n steps
    int tracked = 4;
};

// Shared-init dropout (q_n = 1/(beta n)) vs explicit-penalty GD on the common
// rescaled-time grid; metric "sup_path_penalty".
MeasurementTable couple_dropout_penalty(const FeatureMap& map, const Dataset& data,
                                        const PenaltyCoupleConfig& cfg);

// Geometric-exponential jump-time coupling samples:
// dT ~ Exp(mean alpha), dK = ceil(X'/tau_n) with X' = -dT tau_n/(alpha log(1-q_n)).
struct GeomExpSample {
    double delta_t;
    double tau_delta_k;
    double gap;  // |tau_n dK - dT|
};

std::vector<GeomExpSample> couple_geom_exp(double alpha, const HyperSchedule& sched,
                                           long n, int sample_count, std::uint64_t seed);

struct FiniteLimitConfig {
    std::vector<long> widths;
    std::vector<std::uint64_t> seeds;
    int ref_multiplier = 8;      // reference width = ref_multiplier * max tested width (phases I, II) or 8n (III)
    double horizon = 1.0;        // steps for phase I, time for II/III
    int tracked = 4;
    std::vector<double> probe_times;  // W1 measurement times (fractions of horizon if empty: {1.0})
    double euler_h_ref = 0.0;    // phase II reference step (0: horizon/1024)
    bool rk4_ref = false;        // phase II reference integrates with RK4
};

// Finite dropout dynamics vs the matched limit simulator with shared
// initialization prefix (and shared masks in phase I). W1 rows use metric
// "w1"; pathwise rows (phases I, II only) use "sup_path".
MeasurementTable couple_finite_limit(const FeatureMap& map, const Dataset& data,
                                     Phase phase, const HyperSchedule& sched,
                                     const FiniteLimitConfig& cfg);

// NTK Gram matrix: ensemble average of Dphi(x) Dphi(x)', m x m.
Eigen::MatrixXd ntk_gram(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens);

// Relative Frobenius residual of the NTK exponential-moving-average identity
//   NTK(rho_t) = e^{-t/alpha} NTK(rho_0)
//              + (1/alpha) int_0^t e^{(s-t)/alpha} NTK(T_alpha(rho_s)) ds
// on a uniformly recorded trajectory with stored ensembles (trapezoid
// quadrature; T_alpha is the one-GD-step pushforward). Grid must be finer
// than alpha/10. Returns one residual per grid time (R(0) = 0).
std::vector<double> ntk_ema_residual(const FeatureMap& map, const Dataset& data,
                                     const TrajectoryRecord& rec, double alpha);

// ||A - B||_F / sqrt(n): the RMS parameter-space distance between two
// equal-width ensembles under the identity particle coupling.
double rms_param_distance(const ParticleEnsemble& a, const ParticleEnsemble& b);

}  // namespace dplab
