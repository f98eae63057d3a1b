#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "exitdse/calibration.hpp"
#include "exitdse/design.hpp"
#include "exitdse/network.hpp"
#include "exitdse/perf.hpp"
#include "exitdse/sdf.hpp"
#include "exitdse/transform.hpp"

namespace exitdse {

// Weighted-sum objective with optional epsilon-style constraints:
//   accuracy/a_max - w_lat * ln(latency/l_max + 1),
// designs violating a constraint score -inf and can never win.
struct Objective {
    double w_lat = 1.0;
    double a_max = 1.0;  // reference accuracy: the original network's
    double l_max = 1.0;  // reference latency: full network, no early exits
    std::optional<double> eps_ms;
    std::optional<double> mem_max_bytes;
    enum class LatencyMode { Expected, WorstCase };
    LatencyMode latency_mode = LatencyMode::Expected;  // which latency eps gates on
};

Objective make_objective(const NetworkSpec& net, const CalibrationTrace& trace,
                         const DeviceProfile& profile, double w_lat,
                         std::optional<double> eps_ms = std::nullopt,
                         std::optional<double> mem_max_bytes = std::nullopt,
                         Objective::LatencyMode mode = Objective::LatencyMode::Expected);

double score(const Objective& obj, const DesignMetrics& metrics);
// > 0 when a constraint is violated; used to report the least-violating design
double constraint_violation(const Objective& obj, const DesignMetrics& metrics);

struct EvaluatedDesign {
    DesignPoint design;
    DesignMetrics metrics;
    double score = -std::numeric_limits<double>::infinity();
    bool feasible = false;
    double violation = 0.0;
};

// true when a is a strictly better search outcome (score, then latency,
// memory, design key as deterministic tie-breakers)
bool better_outcome(const EvaluatedDesign& a, const EvaluatedDesign& b);

// Non-dominated set in (accuracy up, expected latency down, memory down),
// kept sorted by latency. Only feasible designs are admitted by the searches.
class ParetoFront {
public:
    void insert(const EvaluatedDesign& e);
    const std::vector<EvaluatedDesign>& points() const { return points_; }
    bool empty() const { return points_.empty(); }

    static bool dominates(const DesignMetrics& a, const DesignMetrics& b);
    // every point of `other` is matched or beaten by some point of this front
    bool covers(const ParetoFront& other) const;

private:
    std::vector<EvaluatedDesign> points_;
};

// Full evaluation pipeline with memoisation: policy evaluation over the trace,
// rate propagation, analytical metrics, objective score. Keyed by design.
class DesignEvaluator {
public:
    DesignEvaluator(const NetworkSpec& net, const CalibrationTrace& trace,
                    const DeviceProfile& profile, const Objective& obj);

    const EvaluatedDesign& eval(const DesignPoint& design);
    bool cached(const DesignPoint& design) const;
    std::size_t evaluations() const { return misses_; }
    std::size_t cache_hits() const { return hits_; }

private:
    const NetworkSpec& net_;
    const CalibrationTrace& trace_;
    const DeviceProfile& profile_;
    Objective obj_;
    std::unordered_map<std::string, EvaluatedDesign> cache_;
    std::size_t misses_ = 0;
    std::size_t hits_ = 0;
};

struct SaConfig {
    double t_initial = 0.0;  // 0: calibrate so initial acceptance is ~80%
    double cooling = 0.95;
    int iters_per_temp = 50;
    double t_min = 1e-4;
    std::uint64_t seed = 1;
    // cap on distinct design evaluations, 0 = one full annealing schedule;
    // when a schedule converges with budget left, the search reheats
    std::size_t eval_budget = 0;
    bool adjacency_prior = true;
};

struct SearchLogEntry {
    std::size_t iteration;
    double temperature;
    DesignPoint design;
    double score;
    bool accepted;
};

struct OptimizeResult {
    bool feasible = false;
    EvaluatedDesign best;  // least-violating design when infeasible
    ParetoFront front;
    std::vector<SearchLogEntry> log;
    std::size_t evaluations = 0;
    std::size_t cache_hits = 0;
};

// Simulated-annealing search over the transformation neighbourhood, with a
// memoised evaluation cache, an incrementally maintained Pareto front of all
// feasible evaluated designs, and a final refinement pass that tries adjacent
// positions for each selected exit. Deterministic under a fixed seed.
OptimizeResult optimize(const NetworkSpec& net, const CalibrationTrace& trace,
                        const DeviceProfile& profile, const ThresholdGrid& grid,
                        const Objective& obj, const SaConfig& cfg);

struct BruteForceResult {
    bool feasible = false;
    EvaluatedDesign best;
    ParetoFront front;
    std::size_t evaluated = 0;
};

// Exhaustive enumeration of the N_conf * 2^N - 1 design space (the no-exit
// placement is enumerated once less, at the lowest grid threshold).
BruteForceResult brute_force(const NetworkSpec& net, const CalibrationTrace& trace,
                             const DeviceProfile& profile, const ThresholdGrid& grid,
                             const Objective& obj, std::size_t cap);

// Memory-less baseline: uniform draws, every draw costs one evaluation even
// when it repeats an earlier design. adjacency_prior restricts the draws to
// the same pruned space the annealer navigates, isolating search-policy
// quality from the prior itself.
OptimizeResult random_search(const NetworkSpec& net, const CalibrationTrace& trace,
                             const DeviceProfile& profile, const ThresholdGrid& grid,
                             const Objective& obj, std::size_t draws, std::uint64_t seed,
                             bool adjacency_prior = false);

struct WlatRow {
    double w_lat;
    bool feasible;
    EvaluatedDesign best;
};

struct WlatChoice {
    double chosen_w_lat = 0.0;
    bool feasible = false;
    std::vector<WlatRow> table;  // sorted by descending weight
};

// Grid search over the latency weight. The knee rule: walking from the
// fastest choice (largest weight) toward slower ones, stop charging latency
// once the next step gains less than 0.5 accuracy points; the chosen weight
// maximises accuracy within that latency.
WlatChoice tune_wlat(const NetworkSpec& net, const CalibrationTrace& trace,
                     const DeviceProfile& profile, const ThresholdGrid& grid,
                     const Objective& base, const std::vector<double>& w_grid,
                     const SaConfig& cfg, int jobs = 1);

}  // namespace exitdse
