#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dplab/dataset.hpp"
#include "dplab/ensemble.hpp"
#include "dplab/feature_map.hpp"
#include "dplab/schedule.hpp"
#include "dplab/steps.hpp"

namespace dplab {

// Synthetic teacher-student regression: Gaussian inputs, targets from a fixed
// randomly initialized teacher of the same family with 1/width output scaling.
struct TeacherSpec {
    int input_dim = 20;
    int teacher_width = 15;
    int sample_count = 500;
    double noise_level = 0.0;
};

Dataset gen_teacher_student(const FeatureMap& map, const TeacherSpec& spec,
                            std::uint64_t seed);

// i.i.d. draws from mu0: outer weight a ~ N(0,1), inner weights (b, c) ~
// N(0, 1/d). Nested: the first n draws for width n are a prefix of the draws
// for any larger width at the same seed.
ParticleEnsemble init_ensemble(long n, int input_dim, std::uint64_t seed);

struct ExperimentConfig {
    std::string feature_kind = "bounded_smooth";
    std::optional<std::string> dataset_csv;  // otherwise teacher-student
    TeacherSpec teacher;
    HyperSchedule schedule{0.5, 0.7, 0.0, 0.0};
    std::vector<long> widths{256};
    std::string variant = "dropout";
    double horizon_steps = 100;  // steps (finite runs) or time (limit runs)
    int tracked = 4;
    int record_stride = 10;
    std::uint64_t seed = 1;
    std::string out_dir = ".";

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
void to_json(nlohmann::json& j, const TeacherSpec& spec);
void from_json(const nlohmann::json& j, TeacherSpec& spec);
void to_json(nlohmann::json& j, const HyperSchedule& sched);
void from_json(const nlohmann::json& j, HyperSchedule& sched);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Ensemble positions as CSV (header x0..x{p-1}); used by the distance command.
void save_ensemble_csv(const ParticleEnsemble& ens, const std::string& path);
ParticleEnsemble load_ensemble_csv(const std::string& path);

// Phase-diagram sweep: one finite run + phase-appropriate measurement per
// (schedule, n, seed) cell, appended to sweep.csv under out_dir. Resumable:
// completed cells are recorded (with config hashes) in manifest.json and
// skipped on rerun. Cell failures are logged and the sweep continues.
struct SweepConfig {
    ExperimentConfig base;
    std::vector<HyperSchedule> schedules;
    std::vector<std::uint64_t> seeds{1};
    int threads = 1;
};

std::string sweep(const SweepConfig& cfg);

// CLI entry point (subcommands: simulate, couple, sweep, classify, distance,
// report). Exit codes: 0 success, 2 config error, 3 numerical abort.
int run_cli(const std::vector<std::string>& args);

}  // namespace dplab
