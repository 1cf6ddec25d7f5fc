#pragma once

#include <Eigen/Dense>
#include <string>

namespace dplab {

// Training set (z_1,y_1),...,(z_m,y_m). Inputs are rows of `inputs`.
struct Dataset {
    Eigen::MatrixXd inputs;   // m x d
    Eigen::VectorXd targets;  // m

    int size() const { return static_cast<int>(inputs.rows()); }
    int dim() const { return static_cast<int>(inputs.cols()); }

    void validate() const;
};

// CSV schema: header "z0,...,z{d-1},y", one row per sample.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace dplab
