#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"

namespace dplab {

// Time-stamped snapshots of a training run: loss, predictor, tracked particle
// positions, and (optionally) full ensembles for post-hoc measure analysis.
struct TrajectoryRecord {
    std::vector<long> steps;
    std::vector<double> times;
    std::vector<double> losses;
    std::vector<Eigen::VectorXd> predictors;        // one m-vector per snapshot
    std::vector<Eigen::MatrixXd> tracked;           // tracked_count x p per snapshot
    std::vector<Eigen::MatrixXd> ensembles;         // full n x p, only if requested
    Eigen::MatrixXd final_positions;                // full ensemble at the last step
    nlohmann::json sidecar;                         // config + seeds echo

    std::size_t size() const { return steps.size(); }

    void push(long step, double time, double loss_value,
              const Eigen::VectorXd& predictor_value,
              const Eigen::MatrixXd& tracked_positions) {
        steps.push_back(step);
        times.push_back(time);
        losses.push_back(loss_value);
        predictors.push_back(predictor_value);
        tracked.push_back(tracked_positions);
    }
};

struct RecorderConfig {
    int stride = 10;          // snapshot every `stride` steps (first and last always kept)
    int tracked_count = 0;    // leading particles whose positions are stored
    bool store_ensembles = false;
};

// CSV columns: step, time, loss, f0..f{m-1}, then tracked coordinates
// x{i}_{j} in particle-major order. JSON sidecar written next to it.
void save_record_csv(const TrajectoryRecord& rec, const std::string& csv_path);
void save_record_sidecar(const TrajectoryRecord& rec, const std::string& json_path);

}  // namespace dplab
