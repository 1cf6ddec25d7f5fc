#include "dplab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dplab/diagnostics.hpp"
#include "dplab/limits.hpp"
#include "dplab/runner.hpp"
#include "dplab/transport.hpp"

namespace fs = std::filesystem;

namespace dplab {

Dataset gen_teacher_student(const FeatureMap& map, const TeacherSpec& spec,
                            std::uint64_t seed) {
    if (spec.input_dim < 1 || spec.teacher_width < 1 || spec.sample_count < 1 ||
        spec.noise_level < 0)
        throw std::invalid_argument("gen_teacher_student: invalid teacher spec");
    if (map.input_dim() != spec.input_dim)
        throw std::invalid_argument("gen_teacher_student: feature map dimension mismatch");
    const int d = spec.input_dim;

    Dataset data;
    data.inputs.resize(spec.sample_count, d);
    for (int i = 0; i < spec.sample_count; ++i)
        for (int j = 0; j < d; ++j)
            data.inputs(i, j) = rng::gaussian(seed, rng::Lane::TeacherData,
                                              static_cast<std::uint64_t>(i), 0,
                                              static_cast<std::uint64_t>(j));

    ParticleEnsemble teacher;
    teacher.positions.resize(spec.teacher_width, d + 2);
    const double inner_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < spec.teacher_width; ++i) {
        teacher.positions(i, 0) = rng::gaussian(seed, rng::Lane::TeacherWeights,
                                                static_cast<std::uint64_t>(i), 0, 0);
        for (int j = 0; j <= d; ++j)
            teacher.positions(i, 1 + j) =
                inner_scale * rng::gaussian(seed, rng::Lane::TeacherWeights,
                                            static_cast<std::uint64_t>(i), 1,
                                            static_cast<std::uint64_t>(j));
    }

    // Mean-field teacher: the 1/width output scaling is the predictor's mean.
    data.targets = predictor(map, data, teacher);
    if (spec.noise_level > 0.0)
        for (int i = 0; i < spec.sample_count; ++i)
            data.targets[i] += spec.noise_level *
                               rng::gaussian(seed, rng::Lane::TeacherData,
                                             static_cast<std::uint64_t>(i), 1, 0);
    data.validate();
    return data;
}

ParticleEnsemble init_ensemble(long n, int input_dim, std::uint64_t seed) {
    if (n < 1 || input_dim < 1)
        throw std::invalid_argument("init_ensemble: need n >= 1, input_dim >= 1");
    ParticleEnsemble ens;
    ens.positions.resize(n, input_dim + 2);
    const double inner_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (long i = 0; i < n; ++i) {
        ens.positions(i, 0) = rng::gaussian(seed, rng::Lane::Init,
                                            static_cast<std::uint64_t>(i), 0, 0);
        for (int j = 0; j <= input_dim; ++j)
            ens.positions(i, 1 + j) =
                inner_scale * rng::gaussian(seed, rng::Lane::Init,
                                            static_cast<std::uint64_t>(i), 1,
                                            static_cast<std::uint64_t>(j));
    }
    return ens;
}

void ExperimentConfig::validate() const {
    feature_kind_from_string(feature_kind);
    variant_from_string(variant);
    schedule.validate();
    if (widths.empty()) throw std::invalid_argument("config: width list empty");
    for (std::size_t i = 1; i < widths.size(); ++i)
        if (widths[i] <= widths[i - 1])
            throw std::invalid_argument("config: width list must be strictly increasing");
    if (widths.front() < 1) throw std::invalid_argument("config: widths must be >= 1");
    if (!(horizon_steps > 0)) throw std::invalid_argument("config: horizon must be positive");
    if (tracked < 0) throw std::invalid_argument("config: tracked count must be >= 0");
    if (record_stride < 1) throw std::invalid_argument("config: record stride must be >= 1");
    if (!dataset_csv) {
        if (teacher.input_dim < 1 || teacher.teacher_width < 1 || teacher.sample_count < 1)
            throw std::invalid_argument("config: invalid teacher spec");
    }
}

void to_json(nlohmann::json& j, const TeacherSpec& spec) {
    j = {{"input_dim", spec.input_dim},
         {"teacher_width", spec.teacher_width},
         {"sample_count", spec.sample_count},
         {"noise_level", spec.noise_level}};
}

void from_json(const nlohmann::json& j, TeacherSpec& spec) {
    spec.input_dim = j.value("input_dim", 20);
    spec.teacher_width = j.value("teacher_width", 15);
    spec.sample_count = j.value("sample_count", 500);
    spec.noise_level = j.value("noise_level", 0.0);
}

void to_json(nlohmann::json& j, const HyperSchedule& sched) {
    j = {{"tau0", sched.tau0}, {"q0", sched.q0}, {"a", sched.a}, {"b", sched.b}};
}

void from_json(const nlohmann::json& j, HyperSchedule& sched) {
    sched.tau0 = j.value("tau0", 0.5);
    sched.q0 = j.value("q0", 0.7);
    sched.a = j.value("a", 0.0);
    sched.b = j.value("b", 0.0);
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
    j = {{"feature_kind", cfg.feature_kind},
         {"teacher", cfg.teacher},
         {"schedule", cfg.schedule},
         {"widths", cfg.widths},
         {"variant", cfg.variant},
         {"horizon_steps", cfg.horizon_steps},
         {"tracked", cfg.tracked},
         {"record_stride", cfg.record_stride},
         {"seed", cfg.seed},
         {"out_dir", cfg.out_dir}};
    j["dataset_csv"] = cfg.dataset_csv ? nlohmann::json(*cfg.dataset_csv)
                                       : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
    cfg = ExperimentConfig{};
    cfg.feature_kind = j.value("feature_kind", cfg.feature_kind);
    if (j.contains("dataset_csv") && !j.at("dataset_csv").is_null())
        cfg.dataset_csv = j.at("dataset_csv").get<std::string>();
    if (j.contains("teacher")) j.at("teacher").get_to(cfg.teacher);
    if (j.contains("schedule")) j.at("schedule").get_to(cfg.schedule);
    if (j.contains("widths")) j.at("widths").get_to(cfg.widths);
    cfg.variant = j.value("variant", cfg.variant);
    cfg.horizon_steps = j.value("horizon_steps", cfg.horizon_steps);
    cfg.tracked = j.value("tracked", cfg.tracked);
    cfg.record_stride = j.value("record_stride", cfg.record_stride);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path);
    nlohmann::json j;
    in >> j;
    ExperimentConfig cfg = j.get<ExperimentConfig>();
    cfg.validate();
    return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << nlohmann::json(cfg).dump(2) << "\n";
}

void save_ensemble_csv(const ParticleEnsemble& ens, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    const int p = ens.param_dim();
    for (int j = 0; j < p; ++j) out << (j ? ",x" : "x") << j;
    out << "\n";
    for (int i = 0; i < ens.width(); ++i) {
        for (int j = 0; j < p; ++j) out << (j ? "," : "") << ens.positions(i, j);
        out << "\n";
    }
}

ParticleEnsemble load_ensemble_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open ensemble " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty ensemble file " + path);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::invalid_argument("ragged ensemble csv " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("ensemble csv has no rows: " + path);
    ParticleEnsemble ens;
    ens.positions.resize(static_cast<long>(rows.size()),
                         static_cast<long>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ens.positions(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    return ens;
}

namespace {

std::string resolve_out_dir(const std::string& out_dir) {
    fs::path p(out_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("DPLAB_OUT_ROOT")) p = fs::path(root) / p;
    }
    fs::create_directories(p);
    return p.string();
}

Dataset build_dataset(const FeatureMap& map, const ExperimentConfig& cfg) {
    if (cfg.dataset_csv) {
        Dataset data = load_dataset_csv(*cfg.dataset_csv);
        map.check_data(data);
        return data;
    }
    return gen_teacher_student(map, cfg.teacher, cfg.seed);
}

struct SweepCell {
    std::size_t schedule_index;
    long n;
    std::uint64_t seed;
};

std::string cell_key(const SweepCell& cell) {
    return "s" + std::to_string(cell.schedule_index) + "_n" + std::to_string(cell.n) +
           "_seed" + std::to_string(cell.seed);
}

std::string cell_hash(const SweepConfig& cfg, const SweepCell& cell) {
    nlohmann::json j = {{"base", cfg.base},
                        {"schedule", cfg.schedules[cell.schedule_index]},
                        {"n", cell.n},
                        {"seed", cell.seed}};
    std::ostringstream os;
    os << std::hex << std::hash<std::string>{}(j.dump());
    return os.str();
}

// One sweep cell: classify, run the finite dynamics and the width-matched
// limit simulator from a shared initialization, report losses and the final
// identity-coupling transport distance.
MeasurementTable run_cell(const FeatureMap& map, const Dataset& data,
                          const SweepConfig& cfg, const SweepCell& cell) {
    const HyperSchedule& sched = cfg.schedules[cell.schedule_index];
    const PhaseInfo info = sched.classify();
    MeasurementTable rows;
    if (info.phase == Phase::Degenerate) {
        rows.push_back({cell.n, cell.seed, 0.0, "degenerate", 1.0});
        return rows;
    }
    const long n = cell.n;
    const double tau_n = sched.tau(n);
    const auto steps = static_cast<long>(std::llround(cfg.base.horizon_steps));
    const ParticleEnsemble init = init_ensemble(n, data.dim(), cell.seed);
    const RecorderConfig rc{cfg.base.record_stride, cfg.base.tracked, false};

    StepConfig sc;
    sc.tau = tau_n;
    sc.keep_rate = sched.q(n);
    sc.variant = Variant::Dropout;
    const TrajectoryRecord fin = run(map, data, init, sc, cell.seed, steps, rc);

    LimitParams lp;
    lp.alpha = info.alpha > 0 ? info.alpha : 1.0;
    lp.beta = info.beta;
    lp.q = sched.q0;
    const double horizon = info.phase == Phase::DiscreteJump
                               ? static_cast<double>(steps)
                               : static_cast<double>(steps) * tau_n;
    lp.euler_h = horizon / 256.0;
    const TrajectoryRecord lim =
        limit_reference(map, data, info.phase, lp, init, cell.seed, horizon, rc);

    rows.push_back({n, cell.seed, static_cast<double>(steps), "loss_finite",
                    fin.losses.back()});
    rows.push_back({n, cell.seed, static_cast<double>(steps), "loss_limit",
                    lim.losses.back()});
    const ParticleEnsemble fa{fin.final_positions}, fb{lim.final_positions};
    if (n <= kW1ExactGuard)
        rows.push_back({n, cell.seed, static_cast<double>(steps), "w1_final",
                        w1_exact(fa, fb)});
    else
        rows.push_back({n, cell.seed, static_cast<double>(steps), "w1_sliced_final",
                        w1_sliced(fa, fb, 64, cell.seed)});
    rows.push_back({n, cell.seed, 0.0, "phase_code", static_cast<double>(info.phase)});
    return rows;
}

void append_rows(std::ofstream& out, const MeasurementTable& rows) {
    out << std::setprecision(17);
    for (const auto& row : rows)
        out << row.n << "," << row.seed << "," << row.time_or_step << "," << row.metric
            << "," << row.value << "\n";
}

}  // namespace

std::string sweep(const SweepConfig& cfg) {
    cfg.base.validate();
    for (const auto& sched : cfg.schedules) sched.validate();
    const std::string out_dir = resolve_out_dir(cfg.base.out_dir);
    const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    const std::string log_path = (fs::path(out_dir) / "failures.log").string();

    nlohmann::json manifest = {{"cells", nlohmann::json::object()}};
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        in >> manifest;
        if (!manifest.contains("cells")) manifest["cells"] = nlohmann::json::object();
    }

    std::vector<SweepCell> cells;
    for (std::size_t s = 0; s < cfg.schedules.size(); ++s)
        for (long n : cfg.base.widths)
            for (std::uint64_t seed : cfg.seeds) cells.push_back({s, n, seed});

    const bool fresh = !fs::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    if (fresh) csv << "n,seed,time_or_step,metric,value\n";

    const FeatureMap map(feature_kind_from_string(cfg.base.feature_kind),
                         cfg.base.dataset_csv ? load_dataset_csv(*cfg.base.dataset_csv).dim()
                                              : cfg.base.teacher.input_dim);
    const Dataset data = build_dataset(map, cfg.base);

    std::ofstream log(log_path, std::ios::app);
    const int threads = std::max(cfg.threads, 1);

    // Waves of `threads` cells; results merged in deterministic cell order.
    for (std::size_t base = 0; base < cells.size(); base += threads) {
        const std::size_t hi = std::min(cells.size(), base + threads);
        std::vector<std::future<MeasurementTable>> futures;
        std::vector<std::size_t> pending;
        for (std::size_t c = base; c < hi; ++c) {
            const std::string key = cell_key(cells[c]);
            const std::string hash = cell_hash(cfg, cells[c]);
            if (manifest["cells"].contains(key) && manifest["cells"][key] == hash)
                continue;  // already complete
            pending.push_back(c);
            futures.push_back(std::async(std::launch::async, [&, c] {
                return run_cell(map, data, cfg, cells[c]);
            }));
        }
        for (std::size_t k = 0; k < pending.size(); ++k) {
            const std::size_t c = pending[k];
            const std::string key = cell_key(cells[c]);
            try {
                append_rows(csv, futures[k].get());
                manifest["cells"][key] = cell_hash(cfg, cells[c]);
                csv.flush();
                std::ofstream mout(manifest_path);
                mout << manifest.dump(2) << "\n";
            } catch (const std::exception& e) {
                log << key << ": " << e.what() << " config="
                    << nlohmann::json(cfg.schedules[cells[c].schedule_index]).dump()
                    << "\n";
            }
        }
    }
    return csv_path;
}

namespace {

int cli_simulate(const ExperimentConfig& cfg) {
    const std::string out_dir = resolve_out_dir(cfg.out_dir);
    const FeatureMap map(feature_kind_from_string(cfg.feature_kind),
                         cfg.dataset_csv ? load_dataset_csv(*cfg.dataset_csv).dim()
                                         : cfg.teacher.input_dim);
    const Dataset data = build_dataset(map, cfg);
    const auto steps = static_cast<long>(std::llround(cfg.horizon_steps));
    for (long n : cfg.widths) {
        StepConfig sc;
        sc.tau = cfg.schedule.tau(n);
        sc.keep_rate = cfg.schedule.q(n);
        sc.variant = variant_from_string(cfg.variant);
        if (sc.variant == Variant::ExplicitPenalty) {
            sc.penalty_beta = cfg.schedule.beta(n);
            sc.keep_rate = 1.0;
        }
        const RecorderConfig rc{cfg.record_stride, cfg.tracked, false};
        TrajectoryRecord rec =
            run(map, data, init_ensemble(n, data.dim(), cfg.seed), sc, cfg.seed, steps, rc);
        rec.sidecar = {{"config", cfg}, {"n", n}, {"mask_seed", cfg.seed},
                       {"tau_n", sc.tau}, {"q_n", sc.keep_rate}};
        const std::string stem = (fs::path(out_dir) / ("record_n" + std::to_string(n))).string();
        save_record_csv(rec, stem + ".csv");
        save_record_sidecar(rec, stem + ".json");
        ParticleEnsemble fin{rec.final_positions};
        save_ensemble_csv(fin, stem + "_final_ensemble.csv");
        std::cout << "n=" << n << " steps=" << steps << " final_loss=" << rec.losses.back()
                  << " -> " << stem << ".csv\n";
    }
    return 0;
}

int cli_couple(const ExperimentConfig& cfg, const std::string& mode, int seed_count) {
    const std::string out_dir = resolve_out_dir(cfg.out_dir);
    const FeatureMap map(feature_kind_from_string(cfg.feature_kind),
                         cfg.dataset_csv ? load_dataset_csv(*cfg.dataset_csv).dim()
                                         : cfg.teacher.input_dim);
    const Dataset data = build_dataset(map, cfg);
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < std::max(seed_count, 1); ++s)
        seeds.push_back(cfg.seed + static_cast<std::uint64_t>(s));

    MeasurementTable table;
    std::string name;
    if (mode == "dropout-ram") {
        CoupleConfig cc;
        cc.widths = cfg.widths;
        cc.seeds = seeds;
        cc.tau = cfg.schedule.tau0;
        cc.q = cfg.schedule.q0;
        cc.steps = static_cast<long>(std::llround(cfg.horizon_steps));
        cc.tracked = cfg.tracked;
        table = couple_dropout_ram(map, data, cc, true);
        name = "couple_dropout_ram.csv";
    } else if (mode == "dropout-penalty") {
        const PhaseInfo info = cfg.schedule.classify();
        if (!(info.beta > 0.0) || !(cfg.schedule.a > 1.0))
            throw std::invalid_argument(
                "dropout-penalty coupling needs b = 1 (beta > 0) and a > 1");
        PenaltyCoupleConfig pc;
        pc.widths = cfg.widths;
        pc.seeds = seeds;
        pc.beta = info.beta;
        pc.tau0 = cfg.schedule.tau0;
        pc.a = cfg.schedule.a;
        pc.horizon = cfg.horizon_steps;
        pc.tracked = cfg.tracked;
        table = couple_dropout_penalty(map, data, pc);
        name = "couple_dropout_penalty.csv";
    } else if (mode == "finite-limit") {
        const PhaseInfo info = cfg.schedule.classify();
        FiniteLimitConfig fc;
        fc.widths = cfg.widths;
        fc.seeds = seeds;
        fc.horizon = cfg.horizon_steps;
        fc.tracked = cfg.tracked;
        table = couple_finite_limit(map, data, info.phase, cfg.schedule, fc);
        name = "couple_finite_limit.csv";
    } else if (mode == "geom-exp") {
        const PhaseInfo info = cfg.schedule.classify();
        const double alpha = info.alpha > 0 ? info.alpha : 1.0;
        for (long n : cfg.widths) {
            for (std::uint64_t seed : seeds) {
                const auto samples = couple_geom_exp(alpha, cfg.schedule, n, 10000, seed);
                double mean_gap = 0.0;
                for (const auto& s : samples) mean_gap += s.gap;
                mean_gap /= static_cast<double>(samples.size());
                table.push_back({n, seed, 0.0, "mean_gap", mean_gap});
            }
        }
        name = "couple_geom_exp.csv";
    } else {
        throw std::invalid_argument("unknown couple mode: " + mode);
    }
    const std::string path = (fs::path(out_dir) / name).string();
    save_table_csv(table, path);
    std::cout << "wrote " << table.size() << " rows -> " << path << "\n";
    return 0;
}

int cli_report(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw std::invalid_argument("cannot open " + in_path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty table " + in_path);
    struct Agg {
        double sum = 0, sumsq = 0;
        long count = 0;
    };
    std::map<std::pair<std::string, long>, Agg> groups;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string n_s, seed_s, t_s, metric, value_s;
        std::getline(ss, n_s, ',');
        std::getline(ss, seed_s, ',');
        std::getline(ss, t_s, ',');
        std::getline(ss, metric, ',');
        std::getline(ss, value_s, ',');
        const double v = std::stod(value_s);
        auto& g = groups[{metric, std::stol(n_s)}];
        g.sum += v;
        g.sumsq += v * v;
        g.count += 1;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
    out << std::setprecision(17) << "metric,n,mean,stderr,count\n";
    for (const auto& [key, g] : groups) {
        const double mean = g.sum / static_cast<double>(g.count);
        const double var = std::max(0.0, g.sumsq / static_cast<double>(g.count) - mean * mean);
        const double se =
            g.count > 1 ? std::sqrt(var / static_cast<double>(g.count - 1)) : 0.0;
        out << key.first << "," << key.second << "," << mean << "," << se << ","
            << g.count << "\n";
    }
    std::cout << "wrote " << groups.size() << " aggregate rows -> " << out_path << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"dropout phase-diagram simulation lab"};
    app.require_subcommand(1);

    std::string config_path, out_override, mode = "dropout-ram";
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads = 1, seed_count = 1;

    auto* sim = app.add_subcommand("simulate", "run one configured experiment");
    sim->add_option("--config", config_path)->required();
    sim->add_option("--seed", seed_override);
    sim->add_option("--out", out_override);
    sim->add_option("--threads", threads);

    auto* couple = app.add_subcommand("couple", "coupled-pair experiments");
    couple->add_option("--config", config_path)->required();
    couple->add_option("--mode", mode)
        ->check(CLI::IsMember({"dropout-ram", "dropout-penalty", "finite-limit", "geom-exp"}));
    couple->add_option("--seed", seed_override);
    couple->add_option("--seeds", seed_count);
    couple->add_option("--out", out_override);
    couple->add_option("--threads", threads);

    auto* sweep_cmd = app.add_subcommand("sweep", "phase-diagram grid sweep");
    sweep_cmd->add_option("--config", config_path)->required();
    sweep_cmd->add_option("--out", out_override);
    sweep_cmd->add_option("--threads", threads);

    double tau0 = 0.5, q0 = 0.7, exp_a = 0.0, exp_b = 0.0;
    auto* classify_cmd = app.add_subcommand("classify", "print the phase of a schedule");
    classify_cmd->add_option("--tau0", tau0);
    classify_cmd->add_option("--q0", q0);
    classify_cmd->add_option("--a", exp_a);
    classify_cmd->add_option("--b", exp_b);

    std::string path_a, path_b;
    auto* dist = app.add_subcommand("distance", "W1 between two stored ensembles");
    dist->add_option("--a", path_a)->required();
    dist->add_option("--b", path_b)->required();

    std::string report_in, report_out = "report.csv";
    auto* report = app.add_subcommand("report", "aggregate a measurement CSV");
    report->add_option("--in", report_in)->required();
    report->add_option("--out", report_out);

    std::vector<const char*> argv;
    argv.push_back("dplab");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    seed_set = sim->count("--seed") > 0 || couple->count("--seed") > 0;

    try {
        if (app.got_subcommand(classify_cmd)) {
            const HyperSchedule sched{tau0, q0, exp_a, exp_b};
            const PhaseInfo info = sched.classify();
            std::cout << "Phase " << to_string(info.phase) << ", alpha=" << info.alpha
                      << ", beta=" << info.beta;
            if (!info.reason.empty()) std::cout << " (" << info.reason << ")";
            std::cout << "\n";
            return 0;
        }
        if (app.got_subcommand(dist)) {
            const ParticleEnsemble a = load_ensemble_csv(path_a);
            const ParticleEnsemble b = load_ensemble_csv(path_b);
            if (a.width() <= kW1ExactGuard)
                std::cout << "w1_exact=" << w1_exact(a, b) << "\n";
            else
                std::cout << "w1_sliced=" << w1_sliced(a, b, 128, 1) << "\n";
            return 0;
        }
        if (app.got_subcommand(report)) return cli_report(report_in, report_out);

        if (app.got_subcommand(sweep_cmd)) {
            std::ifstream in(config_path);
            if (!in) throw std::invalid_argument("cannot open config " + config_path);
            nlohmann::json j;
            in >> j;
            SweepConfig sc;
            j.at("base").get_to(sc.base);
            for (const auto& js : j.value("schedules", nlohmann::json::array()))
                sc.schedules.push_back(js.get<HyperSchedule>());
            if (j.contains("seeds")) j.at("seeds").get_to(sc.seeds);
            sc.threads = j.value("threads", 1);
            if (sweep_cmd->count("--threads")) sc.threads = threads;
            if (!out_override.empty()) sc.base.out_dir = out_override;
            const std::string csv = sweep(sc);
            std::cout << "sweep complete -> " << csv << "\n";
            return 0;
        }

        ExperimentConfig cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed_override;
        if (!out_override.empty()) cfg.out_dir = out_override;
        cfg.validate();
        if (app.got_subcommand(sim)) return cli_simulate(cfg);
        return cli_couple(cfg, mode, seed_count);
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace dplab
