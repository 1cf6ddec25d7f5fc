#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dplab/dataset.hpp"
#include "dplab/ensemble.hpp"
#include "dplab/feature_map.hpp"

namespace dplab {

// Feature matrix of an ensemble: row i holds phi(x^i), n x m.
Eigen::MatrixXd features_all(const FeatureMap& map, const Dataset& data,
                             const ParticleEnsemble& ens);

// Row i of the result is Dphi(x^i)' * r_i where r_i is row i of `rhs` (n x m).
// Batched so the training loops are matrix products instead of per-particle
// Jacobian assemblies.
Eigen::MatrixXd jacobian_t_apply_all(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const Eigen::MatrixXd& rhs);

// As above with a single shared right-hand side vector r in R^m.
Eigen::MatrixXd jacobian_t_apply_shared(const FeatureMap& map, const Dataset& data,
                                        const ParticleEnsemble& ens,
                                        const Eigen::VectorXd& r);

// f(mu) = (1/n) sum_i phi(x^i), pairwise-summed.
Eigen::VectorXd predictor(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens);

// r = f(mu) - y.
Eigen::VectorXd residual(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens);

// L(mu) = (1/2) ||f(mu) - y||^2.
double loss(const FeatureMap& map, const Dataset& data, const ParticleEnsemble& ens);

// grad V[mu](x) = Dphi(x)' (f(mu) - y).
Eigen::VectorXd potential_grad(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens, const Eigen::VectorXd& x);

// grad P(x) = Dphi(x)' phi(x), with P(x) = (1/2)||phi(x)||^2.
Eigen::VectorXd penalty_grad(const FeatureMap& map, const Dataset& data,
                             const Eigen::VectorXd& x);

double penalty_value(const FeatureMap& map, const Dataset& data, const Eigen::VectorXd& x);

struct LipschitzEstimate {
    double empirical;  // max sampled ratio, lower estimate of the constant
    double analytic;   // Lip(Dphi) (||phi||_inf + ||y||) + Lip(phi)^2
};

// Monte Carlo maximization of
//   ||grad V[mu](x) - grad V[mu'](x')|| / (||x - x'|| + W1(mu, mu'))
// over sampled pairs (smooth map only).
LipschitzEstimate lipschitz_certificate(const FeatureMap& map, const Dataset& data,
                                        int sample_count, double radius,
                                        std::uint64_t seed);

}  // namespace dplab
