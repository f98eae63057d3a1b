#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "exitdse/calibration.hpp"
#include "exitdse/design.hpp"
#include "exitdse/network.hpp"
#include "exitdse/perf.hpp"

namespace exitdse {

struct SampleOutcome {
    int sample_id;
    int stop_pos;            // backbone index whose prefix executed
    std::string classifier;  // node id of the classifier the label came from
    bool correct;
    double latency_ms;
};

struct SimulationResult {
    std::vector<SampleOutcome> outcomes;
    DesignMetrics aggregate;  // mean latency in expected_latency_ms, max in worst_case
    EvalResult rates;         // aggregate policy outcome, for cross-checking evaluate()
};

// Replays every calibration sample through the network: walk the backbone in
// node order, run each instantiated head as it is reached, stop at the first
// confident classifier. Ground truth for the memoised evaluator and for q^T l.
SimulationResult simulate(const NetworkSpec& net, const DesignPoint& design,
                          const CalibrationTrace& trace, const DeviceProfile& profile);

void write_outcomes_csv(const std::vector<SampleOutcome>& outcomes,
                        const std::filesystem::path& path, const std::string& comment = "");

// Run-time latency budgeting: keep the deepest classifier whose never-exits
// worst case fits the budget, drop every node beyond it, and promote that
// classifier to terminal. Candidate exits past the cut can never fire and are
// dropped with it.
struct TruncationResult {
    bool feasible = false;
    std::string reason;
    std::optional<NetworkSpec> network;
    DesignPoint design;
    // original trace/profile adapted to the truncated network
    CalibrationTrace project_trace(const NetworkSpec& original,
                                   const CalibrationTrace& trace) const;
};

TruncationResult truncate_for_budget(const NetworkSpec& net, const DesignPoint& design,
                                     const DeviceProfile& profile, double budget_ms);

// Synthetic calibration traces: per-classifier Beta-distributed confidences
// around a mean curve, correctness Bernoulli with a logistic link to the
// sampled confidence. difficulty_sigma adds a per-sample shift shared by all
// classifiers, so easy samples are confident everywhere and consecutive exits
// see overlapping, not independent, confident sets. Confidences are quantised
// to 6 decimals at generation so traces round-trip the CSV format bit-exactly.
struct TraceGenSpec {
    int sample_count = 0;
    std::uint64_t seed = 1;
    std::vector<double> confidence_mean;  // one per classifier, final last
    std::vector<double> accuracy;         // standalone accuracy targets
    double concentration = 20.0;          // Beta concentration
    double conf_correct_correlation = 0.0;
    double difficulty_sigma = 0.0;  // stddev of the shared per-sample shift

    static TraceGenSpec load(const std::filesystem::path& path);
    void store(const std::filesystem::path& path) const;
};

CalibrationTrace generate_trace(const TraceGenSpec& spec, const NetworkSpec& net);

}  // namespace exitdse
