#include "dplab/schedule.hpp"

namespace dplab {

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::DiscreteJump: return "I-DiscreteJump";
        case Phase::WGF: return "II-WGF";
        case Phase::ContinuousJump: return "III-CtsJump";
        case Phase::Critical: return "IV-Critical";
        case Phase::Degenerate: return "Degenerate";
    }
    throw std::logic_error("bad phase");
}

PhaseInfo HyperSchedule::classify() const {
    validate();
    if (a < b) return {Phase::Degenerate, std::numeric_limits<double>::infinity(), 0.0,
                       "alpha_n = tau_n/q_n diverges (a < b)"};
    if (b > 1.0) return {Phase::Degenerate, 0.0, std::numeric_limits<double>::infinity(),
                         "beta_n = 1/(n q_n) diverges (b > 1)"};
    if (a == 0.0 && b == 0.0) return {Phase::DiscreteJump, tau0 / q0, 0.0, ""};
    if (a > b) return {Phase::WGF, 0.0, b < 1.0 ? 0.0 : 1.0 / q0, ""};
    // a == b > 0 from here on.
    if (b < 1.0) return {Phase::ContinuousJump, tau0 / q0, 0.0, ""};
    return {Phase::Critical, tau0 / q0, 1.0 / q0, ""};
}

}  // namespace dplab
