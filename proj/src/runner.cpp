#include "dplab/runner.hpp"

#include "dplab/masks.hpp"
#include "dplab/model.hpp"

namespace dplab {

namespace {

int first_nonfinite_particle(const ParticleEnsemble& ens) {
    for (int i = 0; i < ens.width(); ++i)
        if (!ens.positions.row(i).allFinite()) return i;
    return -1;
}

void snapshot(TrajectoryRecord& rec, const FeatureMap& map, const Dataset& data,
              const ParticleEnsemble& ens, long step, double time,
              const RecorderConfig& rec_cfg) {
    const int m = std::min(rec_cfg.tracked_count, ens.width());
    rec.push(step, time, loss(map, data, ens), predictor(map, data, ens),
             ens.positions.topRows(m));
    if (rec_cfg.store_ensembles) rec.ensembles.push_back(ens.positions);
}

}  // namespace

TrajectoryRecord run(const FeatureMap& map, const Dataset& data,
                     const ParticleEnsemble& initial, const StepConfig& cfg,
                     std::uint64_t mask_seed, long step_count,
                     const RecorderConfig& rec_cfg) {
    cfg.validate();
    if (step_count < 0) throw std::invalid_argument("run: step count must be >= 0");
    if (rec_cfg.stride < 1) throw std::invalid_argument("run: stride must be >= 1");

    const MaskStream masks(cfg.keep_rate, mask_seed, rng::Lane::Mask);
    const MaskStream masks_tilde(cfg.keep_rate, mask_seed, rng::Lane::MaskTilde);
    const int n = initial.width();

    TrajectoryRecord rec;
    ParticleEnsemble ens = initial;
    snapshot(rec, map, data, ens, 0, 0.0, rec_cfg);

    for (long k = 0; k < step_count; ++k) {
        const auto step = static_cast<std::uint64_t>(k);
        switch (cfg.variant) {
            case Variant::Dropout:
                ens = dropout_step(map, data, ens, masks.row(n, step), cfg);
                break;
            case Variant::RaM:
                ens = ram_step(map, data, ens, masks.row(n, step), cfg);
                break;
            case Variant::PN:
                ens = pn_step(map, data, ens, masks.row(n, step), cfg);
                break;
            case Variant::PNRaM:
                ens = pn_ram_step(map, data, ens, masks.row(n, step),
                                  masks_tilde.row(n, step), cfg);
                break;
            case Variant::PlainGD:
                ens = plain_gd_step(map, data, ens, cfg);
                break;
            case Variant::ExplicitPenalty:
                ens = explicit_penalty_step(map, data, ens, cfg);
                break;
        }
        if (!ens.finite()) throw NumericalAbort(k + 1, first_nonfinite_particle(ens));
        const long done = k + 1;
        if (done % rec_cfg.stride == 0 || done == step_count)
            snapshot(rec, map, data, ens, done, static_cast<double>(done) * cfg.tau,
                     rec_cfg);
    }
    rec.final_positions = ens.positions;
    return rec;
}

}  // namespace dplab
