#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>

#include "dplab/rng.hpp"

namespace dplab {

// Dropout mask variables eta_k^i taking (1-q)/q with probability q and -1
// otherwise, so (1+eta) is the usual 1/q-or-0 rescaling. Draws are a pure
// function of (seed, lane, particle id, step): replayable, order-independent,
// and shareable across coupled runs of different widths.
class MaskStream {
  public:
    MaskStream(double keep_rate, std::uint64_t seed, rng::Lane lane = rng::Lane::Mask)
        : q_(keep_rate), seed_(seed), lane_(lane) {
        if (!(q_ > 0.0 && q_ <= 1.0))
            throw std::invalid_argument("MaskStream: keep rate must be in (0,1]");
    }

    double keep_rate() const { return q_; }
    std::uint64_t seed() const { return seed_; }
    rng::Lane lane() const { return lane_; }

    double draw(std::uint64_t particle, std::uint64_t step) const {
        const double u = rng::uniform(seed_, lane_, particle, step);
        return u < q_ ? (1.0 - q_) / q_ : -1.0;
    }

    Eigen::VectorXd row(int n, std::uint64_t step) const {
        Eigen::VectorXd eta(n);
        for (int i = 0; i < n; ++i) eta[i] = draw(static_cast<std::uint64_t>(i), step);
        return eta;
    }

    bool same_stream(const MaskStream& other) const {
        return seed_ == other.seed_ && lane_ == other.lane_;
    }

  private:
    double q_;
    std::uint64_t seed_;
    rng::Lane lane_;
};

}  // namespace dplab
