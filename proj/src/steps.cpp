#include "dplab/steps.hpp"

#include <cmath>
#include <limits>

#include "dplab/model.hpp"

namespace dplab {

Variant variant_from_string(const std::string& name) {
    if (name == "dropout") return Variant::Dropout;
    if (name == "ram") return Variant::RaM;
    if (name == "pn") return Variant::PN;
    if (name == "pn_ram") return Variant::PNRaM;
    if (name == "plain_gd") return Variant::PlainGD;
    if (name == "explicit_penalty") return Variant::ExplicitPenalty;
    throw std::invalid_argument("unknown variant: " + name);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Dropout: return "dropout";
        case Variant::RaM: return "ram";
        case Variant::PN: return "pn";
        case Variant::PNRaM: return "pn_ram";
        case Variant::PlainGD: return "plain_gd";
        case Variant::ExplicitPenalty: return "explicit_penalty";
    }
    throw std::logic_error("bad variant");
}

void StepConfig::validate() const {
    if (!(tau > 0) || !std::isfinite(tau))
        throw std::invalid_argument("StepConfig: tau must be finite positive");
    if (!(keep_rate > 0.0 && keep_rate <= 1.0))
        throw std::invalid_argument("StepConfig: keep rate must be in (0,1]");
    if (penalty_beta < 0 || !std::isfinite(penalty_beta))
        throw std::invalid_argument("StepConfig: penalty beta must be finite nonnegative");
}

namespace {

void check_masks(const ParticleEnsemble& ens, const Eigen::VectorXd& masks) {
    if (masks.size() != ens.width())
        throw std::invalid_argument("mask row length must equal ensemble width");
}

// The three mask-free / mask-linear pieces of the update with independent
// forward copy eta_tilde (backward masks eta):
//   NoDropout_i = -tau Dphi_i' (f - y)
//   RaM_i       = -tau eta_i Dphi_i' (f - y)
//   PN_i        = -tau (1 + eta_i) Dphi_i' ((1/n) sum_j eta_tilde_j phi_j)
// Their sum is exactly the forward-masked, backward-masked increment, so the
// PN+RaM step and the decomposition share one algebraic form.
struct ThreeTerms {
    Eigen::MatrixXd no_dropout, ram, pn;
};

ThreeTerms three_terms(const FeatureMap& map, const Dataset& data,
                       const ParticleEnsemble& ens, const Eigen::VectorXd& masks_backward,
                       const Eigen::VectorXd& masks_forward, double tau,
                       const Eigen::MatrixXd& phi) {
    const Eigen::VectorXd f = pairwise_row_mean(phi);
    const Eigen::VectorXd r = f - data.targets;
    const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);

    // (1/n) sum_j eta_tilde_j phi_j, pairwise-summed like the predictor.
    const Eigen::VectorXd s =
        pairwise_row_mean(masks_forward.asDiagonal() * phi);
    const Eigen::MatrixXd gs = jacobian_t_apply_shared(map, data, ens, s);

    ThreeTerms t;
    t.no_dropout = -tau * g;
    t.ram = (-tau * masks_backward.array()).matrix().asDiagonal() * g;
    t.pn = (-tau * (1.0 + masks_backward.array())).matrix().asDiagonal() * gs;
    return t;
}

// Canonical left-to-right sum; the bitwise step identities are stated in
// exactly this order.
Eigen::MatrixXd canonical_sum(const UpdateDecomposition& d) {
    return ((d.no_dropout + d.ram) + d.pn) + d.penalty;
}

}  // namespace

UpdateDecomposition decompose_update(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const Eigen::VectorXd& masks,
                                     const Eigen::VectorXd& masks_tilde,
                                     const StepConfig& cfg) {
    cfg.validate();
    check_masks(ens, masks);
    check_masks(ens, masks_tilde);
    const int n = ens.width();
    const Eigen::MatrixXd phi = features_all(map, data, ens);
    const ThreeTerms t = three_terms(map, data, ens, masks, masks_tilde, cfg.tau, phi);

    // Penalty_i = tau (eta_i eta_tilde_i - eta_i^2)/n Dphi_i' phi_i. The
    // coefficient is an exact 0.0 whenever masks_tilde == masks, keeping the
    // four-term sum bit-identical to the dropout increment in that case.
    const Eigen::MatrixXd self = jacobian_t_apply_all(map, data, ens, phi);
    const Eigen::ArrayXd coef =
        cfg.tau *
        (masks.array() * masks_tilde.array() - masks.array() * masks.array()) /
        static_cast<double>(n);

    UpdateDecomposition d;
    d.no_dropout = std::move(t.no_dropout);
    d.ram = std::move(t.ram);
    d.pn = std::move(t.pn);
    d.penalty = coef.matrix().asDiagonal() * self;
    return d;
}

UpdateDecomposition decompose_update(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const MaskStream& masks,
                                     const MaskStream& masks_tilde,
                                     std::uint64_t step, const StepConfig& cfg) {
    if (masks.same_stream(masks_tilde))
        throw std::invalid_argument(
            "decompose_update: masks and masks_tilde share a stream; the terms "
            "require independent copies");
    const int n = ens.width();
    return decompose_update(map, data, ens, masks.row(n, step), masks_tilde.row(n, step),
                            cfg);
}

ParticleEnsemble pn_ram_step(const FeatureMap& map, const Dataset& data,
                             const ParticleEnsemble& ens,
                             const Eigen::VectorXd& masks_forward,
                             const Eigen::VectorXd& masks_backward,
                             const StepConfig& cfg) {
    cfg.validate();
    check_masks(ens, masks_forward);
    check_masks(ens, masks_backward);
    const Eigen::MatrixXd phi = features_all(map, data, ens);
    const ThreeTerms t =
        three_terms(map, data, ens, masks_backward, masks_forward, cfg.tau, phi);
    ParticleEnsemble out = ens;
    out.positions += (t.no_dropout + t.ram) + t.pn;
    return out;
}

ParticleEnsemble dropout_step(const FeatureMap& map, const Dataset& data,
                              const ParticleEnsemble& ens,
                              const Eigen::VectorXd& masks, const StepConfig& cfg) {
    const UpdateDecomposition d = decompose_update(map, data, ens, masks, masks, cfg);
    ParticleEnsemble out = ens;
    out.positions += canonical_sum(d);
    return out;
}

ParticleEnsemble ram_step(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens,
                          const Eigen::VectorXd& masks, const StepConfig& cfg) {
    cfg.validate();
    check_masks(ens, masks);
    const Eigen::VectorXd r = residual(map, data, ens);
    const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);
    ParticleEnsemble out = ens;
    out.positions += (-cfg.tau * (1.0 + masks.array())).matrix().asDiagonal() * g;
    return out;
}

ParticleEnsemble pn_step(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens,
                         const Eigen::VectorXd& masks, const StepConfig& cfg) {
    cfg.validate();
    check_masks(ens, masks);
    const Eigen::MatrixXd phi = features_all(map, data, ens);
    const Eigen::VectorXd f_masked =
        pairwise_row_mean((1.0 + masks.array()).matrix().asDiagonal() * phi);
    const Eigen::MatrixXd g =
        jacobian_t_apply_shared(map, data, ens, f_masked - data.targets);
    ParticleEnsemble out = ens;
    out.positions += -cfg.tau * g;
    return out;
}

ParticleEnsemble plain_gd_step(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens, const StepConfig& cfg) {
    cfg.validate();
    const Eigen::VectorXd r = residual(map, data, ens);
    const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);
    ParticleEnsemble out = ens;
    out.positions += -cfg.tau * g;
    return out;
}

ParticleEnsemble explicit_penalty_step(const FeatureMap& map, const Dataset& data,
                                       const ParticleEnsemble& ens,
                                       const StepConfig& cfg) {
    cfg.validate();
    const Eigen::MatrixXd phi = features_all(map, data, ens);
    const Eigen::VectorXd r = pairwise_row_mean(phi) - data.targets;
    const Eigen::MatrixXd g = jacobian_t_apply_shared(map, data, ens, r);
    // grad P rows: Dphi_i' phi_i.
    const Eigen::MatrixXd pg = jacobian_t_apply_all(map, data, ens, phi);
    ParticleEnsemble out = ens;
    out.positions += -cfg.tau * (g + cfg.penalty_beta * pg);
    return out;
}

SharpnessStats sharpness_stats(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens,
                               double eta_mean, double eta_second_moment) {
    const int n = ens.width();
    const int m = data.size();
    const Eigen::VectorXd r = residual(map, data, ens);

    Eigen::MatrixXd ntk_r_rows(n, m);      // row i: Dphi_i Dphi_i' r
    Eigen::MatrixXd second_rows(n, m);     // row i: D^2phi_i[v_i, v_i]
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = ens.particle(i);
        const Eigen::MatrixXd jac = map.jacobian(data, x);
        const Eigen::VectorXd v = jac.transpose() * r;
        ntk_r_rows.row(i) = (jac * v).transpose();

        const double eps = 1e-4 * (1.0 + x.norm());
        const Eigen::MatrixXd jac_plus = map.jacobian(data, x + eps * v);
        const Eigen::MatrixXd jac_minus = map.jacobian(data, x - eps * v);
        second_rows.row(i) = (((jac_plus - jac_minus) / (2.0 * eps)) * v).transpose();
    }
    const Eigen::VectorXd ntk_r = pairwise_row_mean(ntk_r_rows);
    const Eigen::VectorXd second = pairwise_row_mean(second_rows);

    SharpnessStats st;
    st.a = 2.0 * r.dot(ntk_r);
    st.b = 0.5 * ntk_r.squaredNorm();
    st.c = 0.5 * r.dot(second);
    const double denom = st.a * eta_mean;
    st.s_defined = denom != 0.0;
    st.s = st.s_defined
               ? (st.b * eta_mean * eta_mean + st.c * eta_second_moment) / denom
               : std::numeric_limits<double>::quiet_NaN();
    return st;
}

}  // namespace dplab
