#include "dplab/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dplab/rng.hpp"
#include "dplab/transport.hpp"

namespace dplab {

namespace {

void check_ensemble(const FeatureMap& map, const ParticleEnsemble& ens) {
    if (ens.width() < 1) throw std::invalid_argument("ensemble must be nonempty");
    if (ens.param_dim() != map.param_dim())
        throw std::invalid_argument("ensemble parameter dimension mismatch");
}

}  // namespace

Eigen::MatrixXd features_all(const FeatureMap& map, const Dataset& data,
                             const ParticleEnsemble& ens) {
    check_ensemble(map, ens);
    map.check_data(data);
    const int d = map.input_dim();
    const auto& X = ens.positions;
    // S(i, j) = b_i' z_j + c_i
    Eigen::MatrixXd S = X.middleCols(1, d) * data.inputs.transpose();
    S.colwise() += X.col(d + 1);
    if (map.kind() == FeatureKind::BoundedSmooth)
        return X.col(0).array().tanh().matrix().asDiagonal() * S.array().tanh().matrix();
    return X.col(0).asDiagonal() * S.cwiseMax(0.0);
}

Eigen::MatrixXd jacobian_t_apply_all(const FeatureMap& map, const Dataset& data,
                                     const ParticleEnsemble& ens,
                                     const Eigen::MatrixXd& rhs) {
    check_ensemble(map, ens);
    map.check_data(data);
    const int n = ens.width();
    const int d = map.input_dim();
    if (rhs.rows() != n || rhs.cols() != data.size())
        throw std::invalid_argument("jacobian_t_apply_all: rhs must be n x m");

    const auto& X = ens.positions;
    Eigen::MatrixXd S = X.middleCols(1, d) * data.inputs.transpose();
    S.colwise() += X.col(d + 1);

    Eigen::MatrixXd out(n, map.param_dim());
    if (map.kind() == FeatureKind::BoundedSmooth) {
        const Eigen::ArrayXd ta = X.col(0).array().tanh();
        const Eigen::ArrayXXd ts = S.array().tanh();
        const Eigen::ArrayXXd ds = 1.0 - ts.square();       // n x m
        // d/da: (1 - tanh(a)^2) sum_j r_j tanh(s_j)
        out.col(0) = ((1.0 - ta.square()) * (ts * rhs.array()).rowwise().sum()).matrix();
        // d/db, d/dc: tanh(a) sum_j r_j (1 - tanh(s_j)^2) [z_j; 1]
        const Eigen::MatrixXd u = (ds * rhs.array()).matrix();  // n x m
        out.middleCols(1, d) = ta.matrix().asDiagonal() * (u * data.inputs);
        out.col(d + 1) = ta.matrix().asDiagonal() * u.rowwise().sum();
    } else {
        const Eigen::ArrayXXd active = (S.array() > 0.0).cast<double>();
        out.col(0) = (S.array().max(0.0) * rhs.array()).rowwise().sum().matrix();
        const Eigen::MatrixXd u = (active * rhs.array()).matrix();
        out.middleCols(1, d) = X.col(0).asDiagonal() * (u * data.inputs);
        out.col(d + 1) = X.col(0).asDiagonal() * u.rowwise().sum();
    }
    return out;
}

Eigen::MatrixXd jacobian_t_apply_shared(const FeatureMap& map, const Dataset& data,
                                        const ParticleEnsemble& ens,
                                        const Eigen::VectorXd& r) {
    if (r.size() != data.size())
        throw std::invalid_argument("jacobian_t_apply_shared: residual size mismatch");
    Eigen::MatrixXd rhs = r.transpose().replicate(ens.width(), 1);
    return jacobian_t_apply_all(map, data, ens, rhs);
}

Eigen::VectorXd predictor(const FeatureMap& map, const Dataset& data,
                          const ParticleEnsemble& ens) {
    return pairwise_row_mean(features_all(map, data, ens));
}

Eigen::VectorXd residual(const FeatureMap& map, const Dataset& data,
                         const ParticleEnsemble& ens) {
    return predictor(map, data, ens) - data.targets;
}

double loss(const FeatureMap& map, const Dataset& data, const ParticleEnsemble& ens) {
    return 0.5 * residual(map, data, ens).squaredNorm();
}

Eigen::VectorXd potential_grad(const FeatureMap& map, const Dataset& data,
                               const ParticleEnsemble& ens, const Eigen::VectorXd& x) {
    return map.jacobian(data, x).transpose() * residual(map, data, ens);
}

Eigen::VectorXd penalty_grad(const FeatureMap& map, const Dataset& data,
                             const Eigen::VectorXd& x) {
    return map.jacobian(data, x).transpose() * map.evaluate(data, x);
}

double penalty_value(const FeatureMap& map, const Dataset& data, const Eigen::VectorXd& x) {
    return 0.5 * map.evaluate(data, x).squaredNorm();
}

LipschitzEstimate lipschitz_certificate(const FeatureMap& map, const Dataset& data,
                                        int sample_count, double radius,
                                        std::uint64_t seed) {
    if (!map.smooth())
        throw std::invalid_argument("lipschitz_certificate: smooth feature map required");
    if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
    const int p = map.param_dim();
    const int m = data.size();

    const auto cert = map.certificate(data);
    const double analytic =
        cert.jacobian_lip * (cert.feature_bound * std::sqrt(static_cast<double>(m)) +
                             data.targets.norm()) +
        cert.jacobian_bound * cert.jacobian_bound;

    const int ens_size = 16;
    auto sample_point = [&](std::uint64_t pair, std::uint64_t which, std::uint64_t idx) {
        Eigen::VectorXd x(p);
        for (int k = 0; k < p; ++k)
            x[k] = radius * rng::gaussian(seed, rng::Lane::Sampling, pair,
                                          (which << 32) | idx, static_cast<std::uint64_t>(k));
        return x;
    };

    double best = 0.0;
    for (int t = 0; t < sample_count; ++t) {
        const auto pair = static_cast<std::uint64_t>(t);
        ParticleEnsemble mu, nu;
        mu.positions.resize(ens_size, p);
        nu.positions.resize(ens_size, p);
        for (int i = 0; i < ens_size; ++i) {
            mu.positions.row(i) = sample_point(pair, 1, static_cast<std::uint64_t>(i)).transpose();
            nu.positions.row(i) = sample_point(pair, 2, static_cast<std::uint64_t>(i)).transpose();
        }
        const Eigen::VectorXd x = sample_point(pair, 3, 0);
        const Eigen::VectorXd xp = sample_point(pair, 4, 0);

        const double denom = (x - xp).norm() + w1_exact(mu, nu);
        if (denom <= 0.0) continue;  // degenerate pair, ratio is 0/0
        const double num = (potential_grad(map, data, mu, x) -
                            potential_grad(map, data, nu, xp)).norm();
        best = std::max(best, num / denom);
    }
    return {best, analytic};
}

}  // namespace dplab
