#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace dplab {

// n particle positions in R^p, interpreted as the uniform empirical measure
// (1/n) sum_i delta_{x^i}. Row i is particle i.
struct ParticleEnsemble {
    Eigen::MatrixXd positions;  // n x p

    int width() const { return static_cast<int>(positions.rows()); }
    int param_dim() const { return static_cast<int>(positions.cols()); }

    Eigen::VectorXd particle(int i) const { return positions.row(i).transpose(); }

    bool finite() const { return positions.allFinite(); }
};

// Pairwise (cascade) sum of the rows of a matrix; reassociation-stable so that
// results do not depend on evaluation order or worker count.
inline Eigen::VectorXd pairwise_row_sum(const Eigen::MatrixXd& rows, int lo, int hi) {
    if (hi - lo <= 8) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows.cols());
        for (int i = lo; i < hi; ++i) acc += rows.row(i).transpose();
        return acc;
    }
    const int mid = lo + (hi - lo) / 2;
    return pairwise_row_sum(rows, lo, mid) + pairwise_row_sum(rows, mid, hi);
}

inline Eigen::VectorXd pairwise_row_sum(const Eigen::MatrixXd& rows) {
    if (rows.rows() == 0) return Eigen::VectorXd::Zero(rows.cols());
    return pairwise_row_sum(rows, 0, static_cast<int>(rows.rows()));
}

// Pairwise mean of rows.
inline Eigen::VectorXd pairwise_row_mean(const Eigen::MatrixXd& rows) {
    if (rows.rows() == 0) throw std::invalid_argument("pairwise_row_mean: empty");
    return pairwise_row_sum(rows) / static_cast<double>(rows.rows());
}

}  // namespace dplab
