#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dplab/ensemble.hpp"
#include "dplab/record.hpp"

namespace dplab {

// Exact W1 between equal-size 1-D empirical measures: mean absolute
// difference of sorted samples.
double w1_exact_1d(std::vector<double> a, std::vector<double> b);

inline constexpr int kW1ExactGuard = 2048;

// Exact W1 between equal-size equal-weight empirical measures: optimal
// assignment under the Euclidean ground metric divided by n
// (Jonker-Volgenant shortest augmenting path, O(n^3)).
// Sizes above kW1ExactGuard are rejected; use w1_sliced instead.
double w1_exact(const ParticleEnsemble& a, const ParticleEnsemble& b);

// Sliced-W1 estimator: average over L random unit directions of the exact 1-D
// distance of the projections. A lower-bound-flavored surrogate, NOT equal to
// W1; acceptance measurements that need true W1 use w1_exact.
double w1_sliced(const ParticleEnsemble& a, const ParticleEnsemble& b,
                 int projection_count, std::uint64_t seed);

// max over shared snapshots and tracked particles of the position distance.
double path_sup_distance(const TrajectoryRecord& ta, const TrajectoryRecord& tb,
                         int tracked_count);

// Assignment cost for a dense square cost matrix (exposed for oracles).
double assignment_cost(const Eigen::MatrixXd& cost);

}  // namespace dplab
