#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "dplab/dataset.hpp"

namespace dplab {

enum class FeatureKind {
    BoundedSmooth,  // phi(x,z) = tanh(a) * tanh(b'z + c), x = (a, b, c)
    ReluStandard,   // phi(x,z) = a * max(b'z + c, 0); outside the smoothness assumption
};

FeatureKind feature_kind_from_string(const std::string& name);
std::string to_string(FeatureKind kind);

// Sup-norm / Lipschitz certificates for the smooth map, relative to a dataset.
// All three are +inf for ReluStandard.
struct BoundCertificate {
    double feature_bound;    // sup_x |phi_j(x)| per entry
    double jacobian_bound;   // sup_x ||Dphi(x)||_{2->2} (via Frobenius)
    double jacobian_lip;     // Lipschitz constant of x -> Dphi(x)
};

// The map phi: R^p -> R^m evaluated against a fixed dataset, with its Jacobian.
class FeatureMap {
  public:
    FeatureMap(FeatureKind kind, int input_dim);

    FeatureKind kind() const { return kind_; }
    int input_dim() const { return d_; }
    int param_dim() const { return d_ + 2; }  // x = (a, b, c)
    bool smooth() const { return kind_ == FeatureKind::BoundedSmooth; }

    // (phi(x, z_1), ..., phi(x, z_m))
    Eigen::VectorXd evaluate(const Dataset& data, const Eigen::VectorXd& x) const;
    // Exact closed-form Jacobian, m x p. ReLU uses the 0 subgradient at the kink.
    Eigen::MatrixXd jacobian(const Dataset& data, const Eigen::VectorXd& x) const;

    BoundCertificate certificate(const Dataset& data) const;

    void check_point(const Eigen::VectorXd& x) const {
        if (x.size() != param_dim())
            throw std::invalid_argument("FeatureMap: point dimension mismatch");
    }
    void check_data(const Dataset& data) const {
        if (data.dim() != d_)
            throw std::invalid_argument("FeatureMap: dataset dimension mismatch");
    }

  private:
    FeatureKind kind_;
    int d_;
};

}  // namespace dplab
