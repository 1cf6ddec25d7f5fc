#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "dplab/dataset.hpp"
#include "dplab/ensemble.hpp"
#include "dplab/feature_map.hpp"
#include "dplab/masks.hpp"

namespace dplab {

enum class Variant { Dropout, RaM, PN, PNRaM, PlainGD, ExplicitPenalty };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct StepConfig {
    double tau;               // master learning rate
    double keep_rate = 1.0;   // q
    Variant variant = Variant::Dropout;
    double penalty_beta = 0;  // only for ExplicitPenalty

    void validate() const;
};

// One GD-dropout step:
//   x^i <- x^i - tau (1+eta^i) Dphi(x^i)' ((1/n) sum_j (1+eta^j) phi(x^j) - y).
// The masked predictor is a single pairwise reduction shared by all particles.
ParticleEnsemble dropout_step(const FeatureMap& map, const Dataset& data,
                              const ParticleEnsemble& ens,
                              const Eigen::VectorXd& masks, const StepConfig& cfg);

// Random-metric step: masks applied only after the unmasked forward pass.
ParticleEnsemble ram_step(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens,
                          const Eigen::VectorXd& masks, const StepConfig& cfg);

// Propagation-noise step: masked forward pass, every particle moves.
ParticleEnsemble pn_step(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens,
                         const Eigen::VectorXd& masks, const StepConfig& cfg);

// Independent forward/backward masks. With masks_forward == masks_backward
// this is bitwise identical to dropout_step (same code path).
ParticleEnsemble pn_ram_step(const FeatureMap& map, const Dataset& data,
                             const ParticleEnsemble& ens,
                             const Eigen::VectorXd& masks_forward,
                             const Eigen::VectorXd& masks_backward,
                             const StepConfig& cfg);

ParticleEnsemble plain_gd_step(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens, const StepConfig& cfg);

// GD on the penalized loss L + (beta/n) sum_i P(x^i), gradient scaled by n.
ParticleEnsemble explicit_penalty_step(const FeatureMap& map, const Dataset& data,
                                       const ParticleEnsemble& ens,
                                       const StepConfig& cfg);

// Four-term decomposition of the dropout update with an independent mask copy:
// NoDropout, PN, RaM, Penalty (one n x p matrix each). The PN term is computed
// as the independent-mask update minus the other three, which makes the sum of
// the four terms reproduce the mixed-mask increment exactly; with
// masks_tilde == masks the sum equals the dropout_step increment bitwise.
struct UpdateDecomposition {
    Eigen::MatrixXd no_dropout;
    Eigen::MatrixXd pn;
    Eigen::MatrixXd ram;
    Eigen::MatrixXd penalty;
};

UpdateDecomposition decompose_update(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const Eigen::VectorXd& masks,
                                     const Eigen::VectorXd& masks_tilde,
                                     const StepConfig& cfg);

// Stream-checked variant: rejects masks and masks_tilde drawn from the same
// stream (coupling would silently destroy the independence the terms assume).
UpdateDecomposition decompose_update(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const MaskStream& masks,
                                     const MaskStream& masks_tilde,
                                     std::uint64_t step, const StepConfig& cfg);

// Sharpness statistics of one random-metric step:
//   A = 2 r' E[Dphi Dphi'] r,  B = (1/2) ||E[Dphi Dphi' r]||^2,
//   C = (1/2) r' E[D^2phi[Dphi' r, Dphi' r]],
//   S = (B E[eta]^2 + C E[eta^2]) / (A E[eta]).
// The D^2phi action is a directional finite difference of the Jacobian.
struct SharpnessStats {
    double a, b, c, s;
    bool s_defined;  // false when A == 0 (zero residual / degenerate Jacobians)
};

SharpnessStats sharpness_stats(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens,
                               double eta_mean, double eta_second_moment);

}  // namespace dplab
