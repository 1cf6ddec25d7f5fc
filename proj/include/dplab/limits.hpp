#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>

#include "dplab/model.hpp"
#include "dplab/record.hpp"
#include "dplab/schedule.hpp"

namespace dplab {

// One step of the phase-I limit recursion
//   rho_{k+1} = q (Id - alpha grad V[rho_k])_# rho_k + (1-q) rho_k :
// each particle moves with probability q, with grad V frozen at the pre-step
// ensemble. The Bernoulli draws come from (seed, particle id, step) so a
// finite-width dropout run with the same mask seed shares them.
ParticleEnsemble discrete_jump_step(const FeatureMap& map, const Dataset& data,
                                    const ParticleEnsemble& ens, double q, double alpha,
                                    std::uint64_t seed, std::uint64_t step);

// Explicit Euler step of the (penalized) Wasserstein gradient flow field
//   x <- x - h (grad V[mu](x) + beta grad P(x)).
ParticleEnsemble wgf_step(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens, double beta, double h);

// Classical RK4 on the same particle ODE (each stage re-evaluates the field at
// the stage state's own empirical measure). Oracle use only.
ParticleEnsemble wgf_step_rk4(const FeatureMap& map, const Dataset& data,
                              const ParticleEnsemble& ens, double beta, double h);

enum class JumpScheme { EventDriven, Thinning };

// Continuous-time jump process over [0, T]: particles jump by
// -alpha grad V[mu_{t^-}](x) on a rate-1/alpha Poisson clock each.
// EventDriven: aggregate exponential clock of rate n/alpha, one particle per
// event, interaction state immediately before the jump. Thinning: ticks of
// size dt, each particle jumps independently with probability dt/alpha.
TrajectoryRecord ctsjump_simulate(const FeatureMap& map, const Dataset& data,
                                  const ParticleEnsemble& initial, double alpha,
                                  double horizon, JumpScheme scheme, double thinning_dt,
                                  std::uint64_t seed, const RecorderConfig& rec_cfg);

// Per-particle jump counts over the simulated horizon (EventDriven).
Eigen::VectorXd ctsjump_event_counts(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& initial, double alpha,
                                     double horizon, std::uint64_t seed);

// One critical-phase (case IV ansatz) jump: picks the jumping particle
// uniformly, draws N ~ Poisson(1/beta) samples Z_1..Z_N from the ensemble with
// replacement, forms M_hat = beta sum_i delta_{Z_i}, and moves
//   x <- x - alpha grad V[M_hat](x) - alpha beta grad P(x).
// N = 0 gives the zero measure (f = 0); still well-defined.
struct CriticalJump {
    int particle;
    Eigen::VectorXd new_position;
    long poisson_count;
    Eigen::VectorXd mhat_predictor;  // f(M_hat) = beta sum_i phi(Z_i)
};

CriticalJump critical_jump(const FeatureMap& map, const Dataset& data,
                           const ParticleEnsemble& ens, double alpha, double beta,
                           std::uint64_t seed, std::uint64_t event_index);

// Generic stochastic-approximation runner:
//   X_{k+1} = X_k + tau_n * drift(mu_k)_i + noise(ens_k, k)_i.
// drift returns an n x p matrix (row i is b_n(mu, x^i)); noise likewise.
using DriftField = std::function<Eigen::MatrixXd(const ParticleEnsemble&)>;
using NoiseField = std::function<Eigen::MatrixXd(const ParticleEnsemble&, long step)>;

TrajectoryRecord stoch_approx_run(const FeatureMap& map, const Dataset& data,
                                  const ParticleEnsemble& initial, const DriftField& drift,
                                  const NoiseField& noise, double tau_n, long step_count,
                                  const RecorderConfig& rec_cfg);

// Runs the phase's limit simulator at a large reference width to stand in for
// the true limit measure. `horizon` is steps for phase I and time otherwise.
struct LimitParams {
    double alpha = 1.0;
    double beta = 0.0;
    double q = 1.0;
    double euler_h = 1e-2;  // phase II step
    bool rk4 = false;       // phase II: integrate with RK4 instead of Euler
};

TrajectoryRecord limit_reference(const FeatureMap& map, const Dataset& data, Phase phase,
                                 const LimitParams& params, const ParticleEnsemble& initial,
                                 std::uint64_t seed, double horizon,
                                 const RecorderConfig& rec_cfg);

}  // namespace dplab
