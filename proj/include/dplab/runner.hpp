#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dplab/record.hpp"
#include "dplab/steps.hpp"

namespace dplab {

// Thrown when a particle position goes NaN/Inf mid-run; carries diagnostics.
struct NumericalAbort : std::runtime_error {
    long step;
    int particle;
    NumericalAbort(long step_, int particle_)
        : std::runtime_error("non-finite particle position at step " + std::to_string(step_) +
                             ", particle " + std::to_string(particle_)),
          step(step_), particle(particle_) {}
};

// Iterates the configured variant for K steps, recording snapshots on the
// recorder stride. Deterministic given (initial ensemble, mask_seed).
// Variants with a backward mask draw from Lane::Mask; PNRaM draws its forward
// mask from Lane::Mask and its backward mask from Lane::MaskTilde.
TrajectoryRecord run(const FeatureMap& map, const Dataset& data,
                     const ParticleEnsemble& initial, const StepConfig& cfg,
                     std::uint64_t mask_seed, long step_count,
                     const RecorderConfig& rec_cfg);

}  // namespace dplab
