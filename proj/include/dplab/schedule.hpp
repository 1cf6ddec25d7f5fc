#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dplab {

enum class Phase {
    DiscreteJump,   // I:   tau, q constant
    WGF,            // II:  tau_n -> 0 faster than q_n (alpha = 0), penalized if beta > 0
    ContinuousJump, // III: alpha > 0, beta = 0
    Critical,       // IV:  alpha > 0, beta > 0
    Degenerate,
};

std::string to_string(Phase phase);

struct PhaseInfo {
    Phase phase;
    double alpha;        // lim tau_n / q_n
    double beta;         // lim 1/(n q_n)
    std::string reason;  // set for Degenerate
};

// Width-indexed hyperparameter sequences tau_n = tau0 n^{-a},
// q_n = min(q0 n^{-b}, 1), with the derived alpha_n, beta_n.
struct HyperSchedule {
    double tau0;
    double q0;
    double a = 0;  // learning-rate exponent
    double b = 0;  // keep-rate exponent

    void validate() const {
        if (!(tau0 > 0) || !(q0 > 0) || q0 > 1.0 || a < 0 || b < 0)
            throw std::invalid_argument("HyperSchedule: need tau0 > 0, q0 in (0,1], a,b >= 0");
    }

    double tau(long n) const { return tau0 * std::pow(static_cast<double>(n), -a); }
    double q(long n) const { return std::min(q0 * std::pow(static_cast<double>(n), -b), 1.0); }
    double alpha(long n) const { return tau(n) / q(n); }
    double beta(long n) const { return 1.0 / (static_cast<double>(n) * q(n)); }

    PhaseInfo classify() const;
};

}  // namespace dplab
