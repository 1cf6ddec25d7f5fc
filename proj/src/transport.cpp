#include "dplab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dplab/rng.hpp"

namespace dplab {

double w1_exact_1d(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("w1_exact_1d: sample counts must match");
    if (a.empty()) throw std::invalid_argument("w1_exact_1d: empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

namespace {

// Shortest-augmenting-path assignment (Jonker-Volgenant style) with dual
// potentials; 1-indexed internally, column 0 is the virtual root. Returns
// match[j] = 1-based row assigned to column j.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw std::invalid_argument("assignment_cost: square matrix required");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    return match;
}

}  // namespace

double assignment_cost(const Eigen::MatrixXd& cost) {
    const std::vector<int> match = solve_assignment(cost);
    const int n = static_cast<int>(cost.rows());
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
    return total;
}

double w1_exact(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    const int n = a.width();
    if (b.width() != n || a.param_dim() != b.param_dim())
        throw std::invalid_argument("w1_exact: ensembles must have equal shapes");
    if (n == 0) throw std::invalid_argument("w1_exact: empty ensembles");
    if (n > kW1ExactGuard)
        throw std::invalid_argument(
            "w1_exact: width exceeds the exact-solver guard; use w1_sliced");
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
        cost.row(i) =
            (b.positions.rowwise() - a.positions.row(i)).rowwise().norm().transpose();
    const std::vector<int> match = solve_assignment(cost);
    // Sum the matched distances in sorted order: the total is then invariant
    // under swapping the arguments, making symmetry exact.
    std::vector<double> matched(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j)
        matched[static_cast<std::size_t>(j - 1)] = cost(match[j] - 1, j - 1);
    std::sort(matched.begin(), matched.end());
    double total = 0.0;
    for (double v : matched) total += v;
    return total / static_cast<double>(n);
}

double w1_sliced(const ParticleEnsemble& a, const ParticleEnsemble& b,
                 int projection_count, std::uint64_t seed) {
    const int n = a.width();
    if (b.width() != n || a.param_dim() != b.param_dim())
        throw std::invalid_argument("w1_sliced: ensembles must have equal shapes");
    if (projection_count < 1) throw std::invalid_argument("w1_sliced: need L >= 1");
    const int p = a.param_dim();
    double total = 0.0;
    for (int l = 0; l < projection_count; ++l) {
        Eigen::VectorXd dir(p);
        for (int k = 0; k < p; ++k)
            dir[k] = rng::gaussian(seed, rng::Lane::SlicedDirection,
                                   static_cast<std::uint64_t>(l), 0,
                                   static_cast<std::uint64_t>(k));
        const double norm = dir.norm();
        if (norm == 0.0) continue;  // essentially impossible; skip the direction
        dir /= norm;
        const Eigen::VectorXd pa = a.positions * dir;
        const Eigen::VectorXd pb = b.positions * dir;
        total += w1_exact_1d(std::vector<double>(pa.data(), pa.data() + n),
                             std::vector<double>(pb.data(), pb.data() + n));
    }
    return total / static_cast<double>(projection_count);
}

double path_sup_distance(const TrajectoryRecord& ta, const TrajectoryRecord& tb,
                         int tracked_count) {
    if (ta.steps != tb.steps)
        throw std::invalid_argument("path_sup_distance: snapshot grids differ");
    double sup = 0.0;
    for (std::size_t k = 0; k < ta.size(); ++k) {
        const auto& xa = ta.tracked[k];
        const auto& xb = tb.tracked[k];
        const int m = std::min({tracked_count, static_cast<int>(xa.rows()),
                                static_cast<int>(xb.rows())});
        for (int i = 0; i < m; ++i)
            sup = std::max(sup, (xa.row(i) - xb.row(i)).norm());
    }
    return sup;
}

}  // namespace dplab
