#include "dplab/feature_map.hpp"

#include <cmath>
#include <limits>

namespace dplab {

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "bounded_smooth") return FeatureKind::BoundedSmooth;
    if (name == "relu") return FeatureKind::ReluStandard;
    throw std::invalid_argument("unknown feature map kind: " + name);
}

std::string to_string(FeatureKind kind) {
    return kind == FeatureKind::BoundedSmooth ? "bounded_smooth" : "relu";
}

FeatureMap::FeatureMap(FeatureKind kind, int input_dim) : kind_(kind), d_(input_dim) {
    if (input_dim < 1) throw std::invalid_argument("FeatureMap: input_dim must be >= 1");
}

Eigen::VectorXd FeatureMap::evaluate(const Dataset& data, const Eigen::VectorXd& x) const {
    check_point(x);
    check_data(data);
    const double a = x[0];
    const Eigen::VectorXd b = x.segment(1, d_);
    const double c = x[d_ + 1];
    Eigen::VectorXd s = data.inputs * b;
    s.array() += c;
    if (kind_ == FeatureKind::BoundedSmooth)
        return std::tanh(a) * s.array().tanh().matrix();
    return a * s.cwiseMax(0.0);
}

Eigen::MatrixXd FeatureMap::jacobian(const Dataset& data, const Eigen::VectorXd& x) const {
    check_point(x);
    check_data(data);
    const int m = data.size();
    const double a = x[0];
    const Eigen::VectorXd b = x.segment(1, d_);
    const double c = x[d_ + 1];
    Eigen::VectorXd s = data.inputs * b;
    s.array() += c;

    Eigen::MatrixXd jac(m, param_dim());
    if (kind_ == FeatureKind::BoundedSmooth) {
        const double ta = std::tanh(a);
        const double da = 1.0 - ta * ta;
        for (int j = 0; j < m; ++j) {
            const double ts = std::tanh(s[j]);
            const double ds = 1.0 - ts * ts;
            jac(j, 0) = da * ts;
            jac.block(j, 1, 1, d_) = (ta * ds) * data.inputs.row(j);
            jac(j, d_ + 1) = ta * ds;
        }
    } else {
        // Dsigma(0) = 0 subgradient at the kink (strict inequality).
        for (int j = 0; j < m; ++j) {
            const double active = s[j] > 0.0 ? 1.0 : 0.0;
            jac(j, 0) = active * s[j];
            jac.block(j, 1, 1, d_) = (a * active) * data.inputs.row(j);
            jac(j, d_ + 1) = a * active;
        }
    }
    return jac;
}

BoundCertificate FeatureMap::certificate(const Dataset& data) const {
    check_data(data);
    if (kind_ != FeatureKind::BoundedSmooth) {
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, inf, inf};
    }
    // |phi_j| <= 1. Row j of Dphi: |d/da| <= 1, ||d/d(b,c)|| <= sqrt(||z_j||^2+1),
    // so ||Dphi||_F^2 <= sum_j (2 + ||z_j||^2). Hessian of phi_j bounded
    // entrywise via |tanh''| <= c2 = 4/(3 sqrt(3)):
    //   ||H_j||_F <= sqrt(c2^2 + 2(||z_j||^2+1) + c2^2 (||z_j||^2+1)^2).
    const double c2 = 4.0 / (3.0 * std::sqrt(3.0));
    double jac_sq = 0.0;
    double lip_sq = 0.0;
    for (int j = 0; j < data.size(); ++j) {
        const double w = data.inputs.row(j).squaredNorm() + 1.0;
        jac_sq += 1.0 + w;
        lip_sq += c2 * c2 + 2.0 * w + c2 * c2 * w * w;
    }
    return {1.0, std::sqrt(jac_sq), std::sqrt(lip_sq)};
}

}  // namespace dplab
