// Command-line surface: binds the network model, calibration store, SDF
// engine, performance model, simulator and optimiser into reproducible
// workflows. Every command writes a run manifest (inputs, hashes, seed) and
// embeds its fingerprint into each artifact; reruns with identical inputs
// produce bit-identical outputs.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exitdse/calibration.hpp"
#include "exitdse/csv.hpp"
#include "exitdse/design.hpp"
#include "exitdse/hash.hpp"
#include "exitdse/log.hpp"
#include "exitdse/network.hpp"
#include "exitdse/optimizer.hpp"
#include "exitdse/perf.hpp"
#include "exitdse/sdf.hpp"
#include "exitdse/simulator.hpp"
#include "exitdse/transform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace exitdse;

namespace {

constexpr const char* kVersion = "0.1.0";

// numbers rounded to the serialisation precision before they enter JSON, so
// reloading an artifact reproduces the recorded values exactly
json num9(double v) { return json::parse(format_g9(v)); }

struct CommonArgs {
    std::string network_path;
    std::string trace_path;
    std::string profile_path;
    std::string device;
    std::string thr_grid = "0.4,0.6,0.8";
    std::string out_dir = ".";
    double wlat = 1.0;
    std::string wlat_grid;
    std::optional<double> eps_ms;
    std::optional<double> mem_max;
    std::string latency_mode = "expected";
    std::uint64_t seed = 1;
    int iters = 50;
    std::size_t budget_evals = 0;
    double t0 = 0.0;
    double cooling = 0.95;
    double tmin = 1e-4;
    int jobs = 1;
    bool no_prior = false;
};

class Manifest {
public:
    Manifest(const std::string& command, const CommonArgs& args) {
        j_["tool"] = "exitdse";
        j_["version"] = kVersion;
        j_["command"] = command;
        j_["seed"] = args.seed;
        j_["inputs"] = json::object();
        j_["args"] = json::object();
    }
    void input(const std::string& name, const std::string& path) {
        if (path.empty()) return;
        j_["inputs"][name] = {{"path", path}, {"fnv64", hash_file(path)}};
    }
    void arg(const std::string& name, const json& value) { j_["args"][name] = value; }
    std::string hash() const { return fnv1a64_hex(j_.dump()); }
    void write(const fs::path& out_dir) const {
        json full = j_;
        full["manifest"] = hash();
        write_text_file(out_dir / "manifest.json", full.dump(2) + "\n");
    }

private:
    json j_;
};

Objective::LatencyMode parse_latency_mode(const std::string& mode) {
    if (mode == "expected") return Objective::LatencyMode::Expected;
    if (mode == "worst-case") return Objective::LatencyMode::WorstCase;
    throw std::runtime_error("--latency-mode: expected 'expected' or 'worst-case', got '" +
                             mode + "'");
}

SaConfig sa_config(const CommonArgs& a) {
    SaConfig cfg;
    cfg.t_initial = a.t0;
    cfg.cooling = a.cooling;
    cfg.iters_per_temp = a.iters;
    cfg.t_min = a.tmin;
    cfg.seed = a.seed;
    cfg.eval_budget = a.budget_evals;
    cfg.adjacency_prior = !a.no_prior;
    return cfg;
}

json metrics_json(const DesignMetrics& m) {
    json j;
    j["accuracy"] = num9(m.accuracy);
    j["expected_latency_ms"] = num9(m.expected_latency_ms);
    j["worst_case_latency_ms"] = num9(m.worst_case_latency_ms);
    j["mem_bytes"] = num9(m.memory_bytes);
    return j;
}

json design_json(const EvaluatedDesign& e, const std::string& network_name,
                 const std::string& manifest_hash) {
    json j;
    j["p_exit"] = json::array();
    for (auto b : e.design.p_exit) j["p_exit"].push_back(b ? 1 : 0);
    j["c_thr"] = e.design.c_thr_label;
    j["network"] = network_name;
    j["metrics"] = metrics_json(e.metrics);
    j["score"] = e.feasible ? num9(e.score) : json();
    j["feasible"] = e.feasible;
    if (!e.feasible) j["constraint_violation"] = num9(e.violation);
    j["manifest"] = manifest_hash;
    return j;
}

void write_pareto_csv(const ParetoFront& front, const fs::path& path,
                      const std::string& manifest_hash) {
    std::ostringstream out;
    out << "# manifest=" << manifest_hash << "\n";
    out << "p_exit,c_thr,accuracy,exp_latency_ms,wc_latency_ms,mem_bytes,score\n";
    for (const auto& e : front.points()) {
        out << e.design.bits() << "," << e.design.c_thr_label << ","
            << format_g9(e.metrics.accuracy) << ","
            << format_g9(e.metrics.expected_latency_ms) << ","
            << format_g9(e.metrics.worst_case_latency_ms) << ","
            << format_g9(e.metrics.memory_bytes) << "," << format_g9(e.score) << "\n";
    }
    write_text_file(path, out.str());
}

void write_search_log(const std::vector<SearchLogEntry>& log, const fs::path& path,
                      const std::string& manifest_hash) {
    std::ostringstream out;
    for (const auto& entry : log) {
        json j;
        j["iter"] = entry.iteration;
        j["t"] = num9(entry.temperature);
        j["design"] = entry.design.key();
        j["score"] = std::isfinite(entry.score) ? num9(entry.score) : json();
        j["accepted"] = entry.accepted;
        j["manifest"] = manifest_hash;
        out << j.dump() << "\n";
    }
    write_text_file(path, out.str());
}

struct LoadedInputs {
    NetworkSpec net;
    CalibrationTrace trace;
    DeviceProfile profile;
    ThresholdGrid grid;
};

LoadedInputs load_inputs(const CommonArgs& a) {
    NetworkSpec net = NetworkSpec::load(a.network_path);
    CalibrationTrace trace = CalibrationTrace::load(a.trace_path);
    DeviceProfile profile = DeviceProfile::load(a.profile_path, net, a.device);
    ThresholdGrid grid = ThresholdGrid::parse(a.thr_grid);
    return {std::move(net), std::move(trace), std::move(profile), std::move(grid)};
}

Objective objective_for(const LoadedInputs& in, const CommonArgs& a, double wlat) {
    return make_objective(in.net, in.trace, in.profile, wlat, a.eps_ms, a.mem_max,
                          parse_latency_mode(a.latency_mode));
}

int cmd_optimize(const CommonArgs& a) {
    LoadedInputs in = load_inputs(a);
    Manifest manifest("optimize", a);
    manifest.input("network", a.network_path);
    manifest.input("trace", a.trace_path);
    manifest.input("profile", a.profile_path);
    manifest.arg("thr_grid", a.thr_grid);
    manifest.arg("wlat", a.wlat_grid.empty() ? json(a.wlat) : json(a.wlat_grid));
    manifest.arg("latency_mode", a.latency_mode);
    if (a.eps_ms) manifest.arg("eps_ms", *a.eps_ms);
    if (a.mem_max) manifest.arg("mem_max_bytes", *a.mem_max);
    manifest.arg("iters", a.iters);
    manifest.arg("budget_evals", a.budget_evals);
    manifest.arg("adjacency_prior", !a.no_prior);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);
    const std::string h = manifest.hash();

    const SaConfig cfg = sa_config(a);
    double wlat = a.wlat;
    if (!a.wlat_grid.empty()) {
        std::vector<double> weights;
        std::stringstream ss(a.wlat_grid);
        std::string item;
        while (std::getline(ss, item, ','))
            weights.push_back(parse_double(item, "--wlat-grid"));
        const Objective base = objective_for(in, a, 1.0);
        const WlatChoice choice = tune_wlat(in.net, in.trace, in.profile, in.grid, base,
                                            weights, cfg, a.jobs);
        std::ostringstream table;
        table << "# manifest=" << h << "\n";
        table << "w_lat,feasible,p_exit,c_thr,accuracy,exp_latency_ms,score\n";
        for (const auto& row : choice.table) {
            table << format_g9(row.w_lat) << "," << (row.feasible ? 1 : 0) << ","
                  << row.best.design.bits() << "," << row.best.design.c_thr_label << ","
                  << format_g9(row.best.metrics.accuracy) << ","
                  << format_g9(row.best.metrics.expected_latency_ms) << ","
                  << format_g9(row.best.score) << "\n";
        }
        write_text_file(fs::path(a.out_dir) / "wlat_table.csv", table.str());
        if (!choice.feasible) {
            std::fprintf(stderr, "infeasible: no weight produced a feasible design\n");
            return 1;
        }
        wlat = choice.chosen_w_lat;
        logf(LogLevel::Info, "tune_wlat: chose w_lat=%g", wlat);
    }

    const Objective obj = objective_for(in, a, wlat);
    const OptimizeResult r = optimize(in.net, in.trace, in.profile, in.grid, obj, cfg);
    json best = design_json(r.best, in.net.name(), h);
    best["w_lat"] = num9(wlat);
    best["evaluations"] = r.evaluations;
    write_text_file(fs::path(a.out_dir) / "best_design.json", best.dump(2) + "\n");
    write_pareto_csv(r.front, fs::path(a.out_dir) / "pareto.csv", h);
    write_search_log(r.log, fs::path(a.out_dir) / "search_log.jsonl", h);
    if (!r.feasible) {
        std::fprintf(stderr,
                     "infeasible: every design violates a constraint; least-violating "
                     "design written to best_design.json (violation %s)\n",
                     format_g9(r.best.violation).c_str());
        return 1;
    }
    std::printf("best %s score %s accuracy %s latency %s ms (%zu evaluations)\n",
                r.best.design.key().c_str(), format_g9(r.best.score).c_str(),
                format_g9(r.best.metrics.accuracy).c_str(),
                format_g9(r.best.metrics.expected_latency_ms).c_str(), r.evaluations);
    return 0;
}

int cmd_enumerate(const CommonArgs& a, std::size_t cap) {
    LoadedInputs in = load_inputs(a);
    Manifest manifest("enumerate", a);
    manifest.input("network", a.network_path);
    manifest.input("trace", a.trace_path);
    manifest.input("profile", a.profile_path);
    manifest.arg("thr_grid", a.thr_grid);
    manifest.arg("wlat", a.wlat);
    manifest.arg("cap", cap);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);
    const std::string h = manifest.hash();

    const Objective obj = objective_for(in, a, a.wlat);
    const BruteForceResult r = brute_force(in.net, in.trace, in.profile, in.grid, obj, cap);

    json summary;
    summary["space"] = enumerate_designs(in.net, in.grid);
    summary["evaluated"] = r.evaluated;
    summary["feasible"] = r.feasible;
    summary["manifest"] = h;
    write_text_file(fs::path(a.out_dir) / "enumerate.json", summary.dump(2) + "\n");
    write_text_file(fs::path(a.out_dir) / "best_design.json",
                    design_json(r.best, in.net.name(), h).dump(2) + "\n");
    write_pareto_csv(r.front, fs::path(a.out_dir) / "pareto.csv", h);
    std::printf("evaluated %zu designs, best %s\n", r.evaluated,
                r.best.design.key().c_str());
    return r.feasible ? 0 : 1;
}

int cmd_evaluate(const CommonArgs& a, const std::string& design_path) {
    LoadedInputs in = load_inputs(a);
    const DesignPoint design = DesignPoint::load(design_path, in.net.name());
    Manifest manifest("evaluate", a);
    manifest.input("network", a.network_path);
    manifest.input("trace", a.trace_path);
    manifest.input("profile", a.profile_path);
    manifest.input("design", design_path);
    manifest.arg("wlat", a.wlat);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);

    const Objective obj = objective_for(in, a, a.wlat);
    DesignEvaluator evaluator(in.net, in.trace, in.profile, obj);
    const EvaluatedDesign& e = evaluator.eval(design);

    json j = metrics_json(e.metrics);
    j["score"] = e.feasible ? num9(e.score) : json();
    j["feasible"] = e.feasible;
    j["design"] = design.key();
    j["manifest"] = manifest.hash();
    write_text_file(fs::path(a.out_dir) / "metrics.json", j.dump(2) + "\n");
    std::printf("%s accuracy %s latency %s ms memory %s bytes\n", design.key().c_str(),
                format_g9(e.metrics.accuracy).c_str(),
                format_g9(e.metrics.expected_latency_ms).c_str(),
                format_g9(e.metrics.memory_bytes).c_str());
    return 0;
}

int cmd_simulate(const CommonArgs& a, const std::string& design_path,
                 std::optional<double> budget_ms) {
    LoadedInputs in = load_inputs(a);
    DesignPoint design = DesignPoint::load(design_path, in.net.name());
    Manifest manifest("simulate", a);
    manifest.input("network", a.network_path);
    manifest.input("trace", a.trace_path);
    manifest.input("profile", a.profile_path);
    manifest.input("design", design_path);
    if (budget_ms) manifest.arg("budget_ms", *budget_ms);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);
    const std::string h = manifest.hash();

    const NetworkSpec* net = &in.net;
    const CalibrationTrace* trace = &in.trace;
    DeviceProfile profile = in.profile;
    std::optional<NetworkSpec> cut_net;
    std::optional<CalibrationTrace> cut_trace;
    if (budget_ms) {
        const TruncationResult cut = truncate_for_budget(in.net, design, in.profile,
                                                         *budget_ms);
        if (!cut.feasible) {
            std::fprintf(stderr, "infeasible: %s\n", cut.reason.c_str());
            return 1;
        }
        cut_net = cut.network;
        cut_trace = cut.project_trace(in.net, in.trace);
        net = &*cut_net;
        trace = &*cut_trace;
        profile = in.profile.rebind(*net);
        design = cut.design;
        net->store(fs::path(a.out_dir) / "truncated_network.json");
        design.store(fs::path(a.out_dir) / "truncated_design.json", net->name());
    }

    const SimulationResult sim = simulate(*net, design, *trace, profile);
    write_outcomes_csv(sim.outcomes, fs::path(a.out_dir) / "outcomes.csv",
                       "manifest=" + h);

    json j = metrics_json(sim.aggregate);
    j["fallback_fraction"] = num9(sim.rates.fallback_fraction);
    j["final_fraction"] = num9(sim.rates.final_fraction);
    j["design"] = design.key();
    j["manifest"] = h;
    write_text_file(fs::path(a.out_dir) / "sim_metrics.json", j.dump(2) + "\n");
    std::printf("simulated %d samples: accuracy %s mean latency %s ms\n",
                trace->sample_count(), format_g9(sim.aggregate.accuracy).c_str(),
                format_g9(sim.aggregate.expected_latency_ms).c_str());
    return 0;
}

int cmd_gen_trace(const CommonArgs& a, const std::string& gen_spec_path) {
    const NetworkSpec net = NetworkSpec::load(a.network_path);
    const TraceGenSpec spec = TraceGenSpec::load(gen_spec_path);
    Manifest manifest("gen-trace", a);
    manifest.input("network", a.network_path);
    manifest.input("gen_spec", gen_spec_path);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);

    const CalibrationTrace trace = generate_trace(spec, net);
    trace.store(fs::path(a.out_dir) / "trace.csv", "manifest=" + manifest.hash());
    std::printf("generated %d samples x %d classifiers\n", trace.sample_count(),
                trace.classifier_count());
    return 0;
}

int cmd_export_sdf(const CommonArgs& a, const std::string& design_path) {
    const NetworkSpec net = NetworkSpec::load(a.network_path);
    const CalibrationTrace trace = CalibrationTrace::load(a.trace_path);
    const DesignPoint design = DesignPoint::load(design_path, net.name());
    Manifest manifest("export-sdf", a);
    manifest.input("network", a.network_path);
    manifest.input("trace", a.trace_path);
    manifest.input("design", design_path);
    fs::create_directories(a.out_dir);
    manifest.write(a.out_dir);

    const ThresholdGrid grid = ThresholdGrid::parse(a.thr_grid);
    const TransformEngine engine(net, trace, grid, false);
    const TopologyMatrix topo = engine.build(design);
    const Eigen::VectorXd q = propagate_rates(topo);
    export_sdf_csv(topo, q, a.out_dir, "manifest=" + manifest.hash());
    std::printf("wrote gamma.csv c.csv r.csv q.csv (%d edges x %d nodes)\n",
                topo.edge_count(), topo.node_count());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"design-space exploration for hardware-aware early-exit networks"};
    app.require_subcommand(1);

    CommonArgs a;
    std::string design_path;
    std::string gen_spec_path;
    std::size_t cap = 1000000;
    std::optional<double> budget_ms;

    const auto add_common = [&](CLI::App* cmd, bool needs_trace, bool needs_profile) {
        cmd->add_option("--network", a.network_path, "network description JSON")
            ->required();
        if (needs_trace)
            cmd->add_option("--trace", a.trace_path, "calibration trace CSV")->required();
        if (needs_profile) {
            cmd->add_option("--profile", a.profile_path, "device profile CSV")->required();
            cmd->add_option("--device", a.device, "device column of a multi-device profile");
        }
        cmd->add_option("--thr-grid", a.thr_grid, "confidence threshold grid");
        cmd->add_option("--out-dir", a.out_dir, "artifact output directory");
        cmd->add_option("--seed", a.seed, "random seed");
        cmd->add_option("--jobs", a.jobs, "worker cap for parallel sections")
            ->check(CLI::PositiveNumber);
    };
    const auto optional_double = [](std::optional<double>& slot) {
        return [&slot](const CLI::results_t& res) {
            try {
                slot = std::stod(res[0]);
            } catch (const std::exception&) {
                return false;
            }
            return true;
        };
    };
    const auto add_objective = [&](CLI::App* cmd) {
        cmd->add_option("--wlat", a.wlat, "latency weight");
        cmd->add_option("--eps-ms", optional_double(a.eps_ms), "latency upper bound (ms)");
        cmd->add_option("--mem-max-bytes", optional_double(a.mem_max), "memory cap (bytes)");
        cmd->add_option("--latency-mode", a.latency_mode,
                        "latency the eps constraint gates on: expected|worst-case");
    };

    CLI::App* optimize_cmd = app.add_subcommand("optimize", "annealing search");
    add_common(optimize_cmd, true, true);
    add_objective(optimize_cmd);
    optimize_cmd->add_option("--wlat-grid", a.wlat_grid,
                             "comma-separated latency weights to grid-search");
    optimize_cmd->add_option("--iters", a.iters, "iterations per temperature");
    optimize_cmd->add_option("--budget-evals", a.budget_evals,
                             "cap on distinct design evaluations (0 = one schedule)");
    optimize_cmd->add_option("--t0", a.t0, "initial temperature (0 = auto)");
    optimize_cmd->add_option("--cooling", a.cooling, "geometric cooling factor");
    optimize_cmd->add_option("--tmin", a.tmin, "temperature floor");
    optimize_cmd->add_flag("--no-adjacency-prior", a.no_prior,
                           "allow exits at adjacent candidate positions");

    CLI::App* enumerate_cmd = app.add_subcommand("enumerate", "exhaustive evaluation");
    add_common(enumerate_cmd, true, true);
    add_objective(enumerate_cmd);
    enumerate_cmd->add_option("--cap", cap, "largest space to enumerate");

    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "metrics of one design");
    add_common(evaluate_cmd, true, true);
    add_objective(evaluate_cmd);
    evaluate_cmd->add_option("--design", design_path, "design JSON")->required();

    CLI::App* simulate_cmd = app.add_subcommand("simulate", "per-sample replay");
    add_common(simulate_cmd, true, true);
    simulate_cmd->add_option("--design", design_path, "design JSON")->required();
    simulate_cmd->add_option("--budget-ms", optional_double(budget_ms),
                             "run-time latency budget: truncate before simulating");

    CLI::App* gen_cmd = app.add_subcommand("gen-trace", "synthesise a calibration trace");
    add_common(gen_cmd, false, false);
    gen_cmd->add_option("--gen-spec", gen_spec_path, "generator spec JSON")->required();

    CLI::App* export_cmd = app.add_subcommand("export-sdf", "emit gamma/C/R/q as CSV");
    add_common(export_cmd, true, false);
    export_cmd->add_option("--design", design_path, "design JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // flag/usage problems are input errors; --help keeps its clean exit
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(optimize_cmd)) return cmd_optimize(a);
        if (app.got_subcommand(enumerate_cmd)) return cmd_enumerate(a, cap);
        if (app.got_subcommand(evaluate_cmd)) return cmd_evaluate(a, design_path);
        if (app.got_subcommand(simulate_cmd)) return cmd_simulate(a, design_path, budget_ms);
        if (app.got_subcommand(gen_cmd)) return cmd_gen_trace(a, gen_spec_path);
        if (app.got_subcommand(export_cmd)) return cmd_export_sdf(a, design_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
