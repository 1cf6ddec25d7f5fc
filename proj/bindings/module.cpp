// Python bindings for the dropout-dynamics laboratory core.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dplab/diagnostics.hpp"
#include "dplab/harness.hpp"
#include "dplab/limits.hpp"
#include "dplab/masks.hpp"
#include "dplab/model.hpp"
#include "dplab/runner.hpp"
#include "dplab/steps.hpp"
#include "dplab/transport.hpp"

namespace py = pybind11;
using namespace dplab;

namespace {

Phase phase_from_string(const std::string& name) {
    if (name == "I" || name == "discrete_jump") return Phase::DiscreteJump;
    if (name == "II" || name == "wgf") return Phase::WGF;
    if (name == "III" || name == "continuous_jump") return Phase::ContinuousJump;
    if (name == "IV" || name == "critical") return Phase::Critical;
    if (name == "degenerate") return Phase::Degenerate;
    throw std::invalid_argument("unknown phase: " + name);
}

StepConfig make_step_config(double tau, double keep_rate, const std::string& variant,
                            double penalty_beta) {
    StepConfig cfg;
    cfg.tau = tau;
    cfg.keep_rate = keep_rate;
    cfg.variant = variant_from_string(variant);
    cfg.penalty_beta = penalty_beta;
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_dplab, mod) {
    mod.doc() = "finite-width dropout dynamics and their large-width limits";

    py::class_<Dataset>(mod, "Dataset")
        .def(py::init<>())
        .def_readwrite("inputs", &Dataset::inputs)
        .def_readwrite("targets", &Dataset::targets)
        .def_property_readonly("size", &Dataset::size)
        .def_property_readonly("dim", &Dataset::dim)
        .def("validate", &Dataset::validate);
    mod.def("load_dataset_csv", &load_dataset_csv, py::arg("path"));
    mod.def("save_dataset_csv", &save_dataset_csv, py::arg("data"), py::arg("path"));

    py::class_<ParticleEnsemble>(mod, "ParticleEnsemble")
        .def(py::init<>())
        .def(py::init([](const Eigen::MatrixXd& positions) {
                 ParticleEnsemble e;
                 e.positions = positions;
                 return e;
             }),
             py::arg("positions"))
        .def_readwrite("positions", &ParticleEnsemble::positions)
        .def_property_readonly("width", &ParticleEnsemble::width)
        .def_property_readonly("param_dim", &ParticleEnsemble::param_dim);

    py::class_<FeatureMap>(mod, "FeatureMap")
        .def(py::init([](const std::string& kind, int input_dim) {
                 return FeatureMap(feature_kind_from_string(kind), input_dim);
             }),
             py::arg("kind"), py::arg("input_dim"))
        .def_property_readonly("kind",
                               [](const FeatureMap& m) { return to_string(m.kind()); })
        .def_property_readonly("input_dim", &FeatureMap::input_dim)
        .def_property_readonly("param_dim", &FeatureMap::param_dim)
        .def_property_readonly("smooth", &FeatureMap::smooth)
        .def("evaluate", &FeatureMap::evaluate, py::arg("data"), py::arg("x"))
        .def("jacobian", &FeatureMap::jacobian, py::arg("data"), py::arg("x"));

    py::class_<MaskStream>(mod, "MaskStream")
        .def(py::init<double, std::uint64_t>(), py::arg("keep_rate"), py::arg("seed"))
        .def("draw", &MaskStream::draw, py::arg("particle"), py::arg("step"))
        .def("row", &MaskStream::row, py::arg("n"), py::arg("step"));

    py::class_<StepConfig>(mod, "StepConfig")
        .def(py::init(&make_step_config), py::arg("tau"), py::arg("keep_rate") = 1.0,
             py::arg("variant") = "dropout", py::arg("penalty_beta") = 0.0)
        .def_readwrite("tau", &StepConfig::tau)
        .def_readwrite("keep_rate", &StepConfig::keep_rate)
        .def_readwrite("penalty_beta", &StepConfig::penalty_beta);

    py::class_<RecorderConfig>(mod, "RecorderConfig")
        .def(py::init([](int stride, int tracked_count, bool store_ensembles) {
                 return RecorderConfig{stride, tracked_count, store_ensembles};
             }),
             py::arg("stride") = 10, py::arg("tracked_count") = 0,
             py::arg("store_ensembles") = false)
        .def_readwrite("stride", &RecorderConfig::stride)
        .def_readwrite("tracked_count", &RecorderConfig::tracked_count)
        .def_readwrite("store_ensembles", &RecorderConfig::store_ensembles);

    py::class_<TrajectoryRecord>(mod, "TrajectoryRecord")
        .def_readonly("steps", &TrajectoryRecord::steps)
        .def_readonly("times", &TrajectoryRecord::times)
        .def_readonly("losses", &TrajectoryRecord::losses)
        .def_readonly("predictors", &TrajectoryRecord::predictors)
        .def_readonly("tracked", &TrajectoryRecord::tracked)
        .def_readonly("ensembles", &TrajectoryRecord::ensembles)
        .def_readonly("final_positions", &TrajectoryRecord::final_positions)
        .def("__len__", &TrajectoryRecord::size);
    mod.def("save_record_csv", &save_record_csv, py::arg("record"), py::arg("path"));

    // Model quantities.
    mod.def("features_all", &features_all);
    mod.def("predictor", &predictor);
    mod.def("residual", &residual);
    mod.def("loss", &loss);
    mod.def("potential_grad", &potential_grad);
    mod.def("penalty_grad", &penalty_grad);
    mod.def("penalty_value", &penalty_value);

    // Finite-width update variants.
    mod.def("dropout_step", &dropout_step);
    mod.def("ram_step", &ram_step);
    mod.def("pn_step", &pn_step);
    mod.def("pn_ram_step", &pn_ram_step);
    mod.def("plain_gd_step", &plain_gd_step);
    mod.def("explicit_penalty_step", &explicit_penalty_step);

    py::class_<UpdateDecomposition>(mod, "UpdateDecomposition")
        .def_readonly("no_dropout", &UpdateDecomposition::no_dropout)
        .def_readonly("pn", &UpdateDecomposition::pn)
        .def_readonly("ram", &UpdateDecomposition::ram)
        .def_readonly("penalty", &UpdateDecomposition::penalty);
    mod.def("decompose_update",
            py::overload_cast<const FeatureMap&, const Dataset&, const ParticleEnsemble&,
                              const Eigen::VectorXd&, const Eigen::VectorXd&,
                              const StepConfig&>(&decompose_update),
            py::arg("map"), py::arg("data"), py::arg("ensemble"), py::arg("masks"),
            py::arg("masks_tilde"), py::arg("config"));

    py::class_<SharpnessStats>(mod, "SharpnessStats")
        .def_readonly("a", &SharpnessStats::a)
        .def_readonly("b", &SharpnessStats::b)
        .def_readonly("c", &SharpnessStats::c)
        .def_readonly("s", &SharpnessStats::s)
        .def_readonly("s_defined", &SharpnessStats::s_defined);
    mod.def("sharpness_stats", &sharpness_stats, py::arg("map"), py::arg("data"),
            py::arg("ensemble"), py::arg("eta_mean"), py::arg("eta_second_moment"));

    mod.def("run", &run, py::arg("map"), py::arg("data"), py::arg("initial"),
            py::arg("config"), py::arg("mask_seed"), py::arg("step_count"),
            py::arg("recorder") = RecorderConfig{});

    // Schedules and phases.
    py::class_<HyperSchedule>(mod, "HyperSchedule")
        .def(py::init([](double tau0, double q0, double a, double b) {
                 HyperSchedule s{tau0, q0, a, b};
                 s.validate();
                 return s;
             }),
             py::arg("tau0"), py::arg("q0"), py::arg("a") = 0.0, py::arg("b") = 0.0)
        .def_readwrite("tau0", &HyperSchedule::tau0)
        .def_readwrite("q0", &HyperSchedule::q0)
        .def_readwrite("a", &HyperSchedule::a)
        .def_readwrite("b", &HyperSchedule::b)
        .def("tau", &HyperSchedule::tau, py::arg("n"))
        .def("q", &HyperSchedule::q, py::arg("n"))
        .def("alpha", &HyperSchedule::alpha, py::arg("n"))
        .def("beta", &HyperSchedule::beta, py::arg("n"))
        .def("classify", &HyperSchedule::classify);
    py::class_<PhaseInfo>(mod, "PhaseInfo")
        .def_property_readonly("phase",
                               [](const PhaseInfo& p) { return to_string(p.phase); })
        .def_readonly("alpha", &PhaseInfo::alpha)
        .def_readonly("beta", &PhaseInfo::beta)
        .def_readonly("reason", &PhaseInfo::reason);

    // Large-width limit simulators.
    mod.def("discrete_jump_step", &discrete_jump_step, py::arg("map"), py::arg("data"),
            py::arg("ensemble"), py::arg("q"), py::arg("alpha"), py::arg("seed"),
            py::arg("step"));
    mod.def("wgf_step", &wgf_step, py::arg("map"), py::arg("data"), py::arg("ensemble"),
            py::arg("beta"), py::arg("h"));
    mod.def("wgf_step_rk4", &wgf_step_rk4, py::arg("map"), py::arg("data"),
            py::arg("ensemble"), py::arg("beta"), py::arg("h"));
    mod.def(
        "ctsjump_simulate",
        [](const FeatureMap& map, const Dataset& data, const ParticleEnsemble& init,
           double alpha, double horizon, const std::string& scheme, double thinning_dt,
           std::uint64_t seed, const RecorderConfig& rc) {
            const JumpScheme s = scheme == "thinning" ? JumpScheme::Thinning
                                                      : JumpScheme::EventDriven;
            return ctsjump_simulate(map, data, init, alpha, horizon, s, thinning_dt,
                                    seed, rc);
        },
        py::arg("map"), py::arg("data"), py::arg("initial"), py::arg("alpha"),
        py::arg("horizon"), py::arg("scheme") = "event_driven",
        py::arg("thinning_dt") = 0.0, py::arg("seed") = 1,
        py::arg("recorder") = RecorderConfig{});
    mod.def("ctsjump_event_counts", &ctsjump_event_counts);

    py::class_<CriticalJump>(mod, "CriticalJump")
        .def_readonly("particle", &CriticalJump::particle)
        .def_readonly("new_position", &CriticalJump::new_position)
        .def_readonly("poisson_count", &CriticalJump::poisson_count)
        .def_readonly("mhat_predictor", &CriticalJump::mhat_predictor);
    mod.def("critical_jump", &critical_jump, py::arg("map"), py::arg("data"),
            py::arg("ensemble"), py::arg("alpha"), py::arg("beta"), py::arg("seed"),
            py::arg("event_index"));

    mod.def(
        "limit_reference",
        [](const FeatureMap& map, const Dataset& data, const std::string& phase,
           double alpha, double beta, double q, double euler_h, bool rk4,
           const ParticleEnsemble& init, std::uint64_t seed, double horizon,
           const RecorderConfig& rc) {
            LimitParams lp;
            lp.alpha = alpha;
            lp.beta = beta;
            lp.q = q;
            lp.euler_h = euler_h;
            lp.rk4 = rk4;
            return limit_reference(map, data, phase_from_string(phase), lp, init, seed,
                                   horizon, rc);
        },
        py::arg("map"), py::arg("data"), py::arg("phase"), py::arg("alpha") = 1.0,
        py::arg("beta") = 0.0, py::arg("q") = 1.0, py::arg("euler_h") = 1e-2,
        py::arg("rk4") = false, py::arg("initial") = ParticleEnsemble{},
        py::arg("seed") = 1, py::arg("horizon") = 1.0,
        py::arg("recorder") = RecorderConfig{});

    // Transport distances.
    mod.def("w1_exact", &w1_exact);
    mod.def("w1_exact_1d", &w1_exact_1d);
    mod.def("w1_sliced", &w1_sliced, py::arg("a"), py::arg("b"),
            py::arg("projection_count") = 64, py::arg("seed") = 1);
    mod.def("path_sup_distance", &path_sup_distance);
    mod.def("assignment_cost", &assignment_cost);

    // Coupled experiments and diagnostics.
    py::class_<MeasurementRow>(mod, "MeasurementRow")
        .def_readonly("n", &MeasurementRow::n)
        .def_readonly("seed", &MeasurementRow::seed)
        .def_readonly("time_or_step", &MeasurementRow::time_or_step)
        .def_readonly("metric", &MeasurementRow::metric)
        .def_readonly("value", &MeasurementRow::value);
    mod.def("save_table_csv", &save_table_csv);
    mod.def("table_mean", &table_mean);

    py::class_<CoupleConfig>(mod, "CoupleConfig")
        .def(py::init<>())
        .def_readwrite("widths", &CoupleConfig::widths)
        .def_readwrite("seeds", &CoupleConfig::seeds)
        .def_readwrite("tau", &CoupleConfig::tau)
        .def_readwrite("q", &CoupleConfig::q)
        .def_readwrite("steps", &CoupleConfig::steps)
        .def_readwrite("tracked", &CoupleConfig::tracked);
    mod.def("couple_dropout_ram", &couple_dropout_ram, py::arg("map"), py::arg("data"),
            py::arg("config"), py::arg("with_comparators") = false);

    py::class_<PenaltyCoupleConfig>(mod, "PenaltyCoupleConfig")
        .def(py::init<>())
        .def_readwrite("widths", &PenaltyCoupleConfig::widths)
        .def_readwrite("seeds", &PenaltyCoupleConfig::seeds)
        .def_readwrite("beta", &PenaltyCoupleConfig::beta)
        .def_readwrite("tau0", &PenaltyCoupleConfig::tau0)
        .def_readwrite("a", &PenaltyCoupleConfig::a)
        .def_readwrite("horizon", &PenaltyCoupleConfig::horizon)
        .def_readwrite("tracked", &PenaltyCoupleConfig::tracked);
    mod.def("couple_dropout_penalty", &couple_dropout_penalty);

    py::class_<GeomExpSample>(mod, "GeomExpSample")
        .def_readonly("delta_t", &GeomExpSample::delta_t)
        .def_readonly("tau_delta_k", &GeomExpSample::tau_delta_k)
        .def_readonly("gap", &GeomExpSample::gap);
    mod.def("couple_geom_exp", &couple_geom_exp, py::arg("alpha"), py::arg("schedule"),
            py::arg("n"), py::arg("sample_count"), py::arg("seed"));

    py::class_<FiniteLimitConfig>(mod, "FiniteLimitConfig")
        .def(py::init<>())
        .def_readwrite("widths", &FiniteLimitConfig::widths)
        .def_readwrite("seeds", &FiniteLimitConfig::seeds)
        .def_readwrite("ref_multiplier", &FiniteLimitConfig::ref_multiplier)
        .def_readwrite("horizon", &FiniteLimitConfig::horizon)
        .def_readwrite("tracked", &FiniteLimitConfig::tracked)
        .def_readwrite("probe_times", &FiniteLimitConfig::probe_times)
        .def_readwrite("euler_h_ref", &FiniteLimitConfig::euler_h_ref)
        .def_readwrite("rk4_ref", &FiniteLimitConfig::rk4_ref);
    mod.def(
        "couple_finite_limit",
        [](const FeatureMap& map, const Dataset& data, const std::string& phase,
           const HyperSchedule& sched, const FiniteLimitConfig& cfg) {
            return couple_finite_limit(map, data, phase_from_string(phase), sched, cfg);
        },
        py::arg("map"), py::arg("data"), py::arg("phase"), py::arg("schedule"),
        py::arg("config"));

    mod.def("ntk_gram", &ntk_gram);
    mod.def("ntk_ema_residual", &ntk_ema_residual);
    mod.def("rms_param_distance", &rms_param_distance);

    // Harness.
    py::class_<TeacherSpec>(mod, "TeacherSpec")
        .def(py::init<>())
        .def_readwrite("input_dim", &TeacherSpec::input_dim)
        .def_readwrite("teacher_width", &TeacherSpec::teacher_width)
        .def_readwrite("sample_count", &TeacherSpec::sample_count)
        .def_readwrite("noise_level", &TeacherSpec::noise_level);
    mod.def("gen_teacher_student", &gen_teacher_student);
    mod.def("init_ensemble", &init_ensemble, py::arg("n"), py::arg("input_dim"),
            py::arg("seed"));
    mod.def("save_ensemble_csv", &save_ensemble_csv);
    mod.def("load_ensemble_csv", &load_ensemble_csv);
    mod.def("run_cli", &run_cli, py::arg("args"));
}
