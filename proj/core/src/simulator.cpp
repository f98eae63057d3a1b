#include "exitdse/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "exitdse/csv.hpp"
#include "exitdse/rng.hpp"

namespace exitdse {

using nlohmann::json;

SimulationResult simulate(const NetworkSpec& net, const DesignPoint& design,
                          const CalibrationTrace& trace, const DeviceProfile& profile) {
    const int n = net.exit_count();
    const int nb = net.backbone_count();
    if (trace.classifier_count() != n + 1)
        throw std::runtime_error("simulate: trace bound to a different network shape");
    if (static_cast<int>(design.p_exit.size()) != n)
        throw std::runtime_error("simulate: design bound to a different network shape");
    if (profile.latency().size() != net.node_count())
        throw std::runtime_error("simulate: profile bound to a different network shape");

    // live exit per backbone index, -1 if none
    std::vector<int> head_at(nb, -1);
    for (int k = 0; k < n; ++k)
        if (design.p_exit[k]) head_at[net.attach_index(k)] = k;
    const double thr = design.c_thr;
    const int final_col = n;

    SimulationResult result;
    result.outcomes.reserve(trace.sample_count());
    result.rates.exit_rates.assign(n, 0.0);
    std::vector<long> stops(n, 0);
    long final_stops = 0, fallbacks = 0, hits = 0;
    double lat_sum = 0.0, lat_max = 0.0;

    for (int s = 0; s < trace.sample_count(); ++s) {
        double lat = 0.0;
        int stop_pos = -1;
        int chosen = -1;  // classifier the label comes from
        for (int j = 0; j < nb; ++j) {
            lat += profile.latency()(j);
            const int k = head_at[j];
            if (k >= 0) {
                lat += profile.latency()(nb + k);
                if (trace.conf(s, k) >= thr) {
                    stop_pos = j;
                    chosen = k;
                    ++stops[k];
                    break;
                }
            }
        }
        if (chosen < 0) {
            // ran the whole network: counts as a final-position stop even when
            // the label is resolved by the max-confidence rule
            stop_pos = net.terminal_index();
            ++final_stops;
            if (trace.conf(s, final_col) >= thr) {
                chosen = final_col;
            } else {
                ++fallbacks;
                double best = trace.conf(s, final_col);
                for (int j = 0; j < nb; ++j)
                    if (head_at[j] >= 0) best = std::max(best, trace.conf(s, head_at[j]));
                chosen = final_col;
                for (int j = 0; j < nb; ++j) {
                    const int k = head_at[j];
                    if (k >= 0 && trace.conf(s, k) == best) {
                        chosen = k;
                        break;
                    }
                }
            }
        }
        const bool ok = trace.correct(s, chosen);
        hits += ok ? 1 : 0;
        lat_sum += lat;
        lat_max = std::max(lat_max, lat);
        const std::string& cls =
            chosen == final_col ? net.backbone()[net.terminal_index()].id : net.exits()[chosen].id;
        result.outcomes.push_back({s, stop_pos, cls, ok, lat});
    }

    const int d = trace.sample_count();
    result.rates.accuracy = static_cast<double>(hits) / d;
    for (int k = 0; k < n; ++k)
        result.rates.exit_rates[k] = static_cast<double>(stops[k]) / d;
    result.rates.final_fraction = static_cast<double>(final_stops) / d;
    result.rates.fallback_fraction = static_cast<double>(fallbacks) / d;
    result.aggregate.expected_latency_ms = lat_sum / d;
    result.aggregate.worst_case_latency_ms = lat_max;
    result.aggregate.accuracy = result.rates.accuracy;
    result.aggregate.memory_bytes = 0.0;
    {
        // nodes that ran for at least one sample
        std::vector<bool> used(net.node_count(), false);
        for (const auto& o : result.outcomes) {
            for (int j = 0; j <= o.stop_pos; ++j) {
                used[j] = true;
                if (head_at[j] >= 0) used[nb + head_at[j]] = true;
            }
        }
        for (int v = 0; v < net.node_count(); ++v)
            if (used[v]) result.aggregate.memory_bytes += profile.memory()(v);
    }
    return result;
}

void write_outcomes_csv(const std::vector<SampleOutcome>& outcomes,
                        const std::filesystem::path& path, const std::string& comment) {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "sample_id,stop_pos,classifier,correct,latency_ms\n";
    for (const auto& o : outcomes)
        out << o.sample_id << "," << o.stop_pos << "," << o.classifier << ","
            << (o.correct ? 1 : 0) << "," << format_g9(o.latency_ms) << "\n";
    write_text_file(path, out.str());
}

TruncationResult truncate_for_budget(const NetworkSpec& net, const DesignPoint& design,
                                     const DeviceProfile& profile, double budget_ms) {
    if (budget_ms <= 0.0) throw std::runtime_error("truncate: budget must be positive");
    const int nb = net.backbone_count();

    // classifiers by depth: live exits, then the final classifier
    struct Classifier {
        int backbone_idx;
        int exit_k;  // -1 for the final classifier
    };
    std::vector<Classifier> classifiers;
    for (int k : net.exits_by_depth())
        if (design.p_exit[k]) classifiers.push_back({net.attach_index(k), k});
    classifiers.push_back({net.terminal_index(), -1});

    // worst-case cost of running up to and including each classifier
    auto cost_through = [&](int backbone_idx) {
        double c = 0.0;
        for (int j = 0; j <= backbone_idx; ++j) c += profile.latency()(j);
        for (int k = 0; k < net.exit_count(); ++k)
            if (design.p_exit[k] && net.attach_index(k) <= backbone_idx)
                c += profile.latency()(nb + k);
        return c;
    };

    int deepest = -1;
    for (std::size_t i = 0; i < classifiers.size(); ++i)
        if (cost_through(classifiers[i].backbone_idx) <= budget_ms)
            deepest = static_cast<int>(i);

    TruncationResult result;
    if (deepest < 0) {
        result.feasible = false;
        result.reason = "budget " + format_g9(budget_ms) +
                        " ms is below the cheapest classifier's worst-case latency";
        return result;
    }
    result.feasible = true;
    const Classifier& cls = classifiers[deepest];
    if (cls.exit_k < 0) {
        result.network = net;
        result.design = design;
        return result;
    }

    // promote the exit head to terminal classifier of a prefix network
    const int cut = cls.backbone_idx;
    std::vector<LayerDecl> backbone(net.backbone().begin(), net.backbone().begin() + cut + 1);
    // the promoted head consumes the attach layer; any other dangling prefix
    // sink is wired in as a formal predecessor to keep the terminal unique
    std::vector<bool> has_succ(cut + 1, false);
    for (int v = 0; v <= cut; ++v)
        for (int u : net.backbone_preds()[v]) has_succ[u] = true;
    LayerDecl head;
    head.id = net.exits()[cls.exit_k].id;
    head.preds.push_back(net.backbone()[cut].id);
    for (int v = 0; v < cut; ++v)
        if (!has_succ[v]) head.preds.push_back(net.backbone()[v].id);
    backbone.push_back(head);

    std::vector<ExitDecl> exits;
    std::vector<std::uint8_t> p;
    for (int k = 0; k < net.exit_count(); ++k) {
        if (k == cls.exit_k || net.attach_index(k) > cut) continue;
        exits.push_back(net.exits()[k]);
        p.push_back(design.p_exit[k]);
    }
    result.network = NetworkSpec(net.name() + "@" + format_g9(budget_ms) + "ms",
                                 std::move(backbone), std::move(exits),
                                 /*require_candidates=*/false);
    result.design.p_exit = std::move(p);
    result.design.c_thr = design.c_thr;
    result.design.c_thr_label = design.c_thr_label;
    return result;
}

CalibrationTrace TruncationResult::project_trace(const NetworkSpec& original,
                                                 const CalibrationTrace& trace) const {
    if (!feasible || !network)
        throw std::runtime_error("truncate: cannot project a trace for an infeasible budget");
    const NetworkSpec& cut = *network;
    // column per truncated-network classifier, in the original trace
    std::vector<int> cols;
    for (const auto& e : cut.exits()) {
        for (int k = 0; k < original.exit_count(); ++k)
            if (original.exits()[k].id == e.id) cols.push_back(k);
    }
    const std::string& terminal_id = cut.backbone()[cut.terminal_index()].id;
    if (terminal_id == original.backbone()[original.terminal_index()].id) {
        cols.push_back(original.exit_count());
    } else {
        for (int k = 0; k < original.exit_count(); ++k)
            if (original.exits()[k].id == terminal_id) cols.push_back(k);
    }
    if (static_cast<int>(cols.size()) != cut.exit_count() + 1)
        throw std::runtime_error("truncate: trace projection failed to resolve classifiers");

    std::vector<double> conf;
    std::vector<std::uint8_t> correct;
    conf.reserve(static_cast<std::size_t>(trace.sample_count()) * cols.size());
    correct.reserve(conf.capacity());
    for (int s = 0; s < trace.sample_count(); ++s) {
        for (int c : cols) {
            conf.push_back(trace.conf(s, c));
            correct.push_back(trace.correct(s, c) ? 1 : 0);
        }
    }
    return CalibrationTrace(std::move(conf), std::move(correct), trace.sample_count(),
                            static_cast<int>(cols.size()));
}

TraceGenSpec TraceGenSpec::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": gen-spec: invalid JSON: " + e.what());
    }
    TraceGenSpec spec;
    try {
        spec.sample_count = j.at("sample_count").get<int>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.confidence_mean = j.at("confidence_mean").get<std::vector<double>>();
        spec.accuracy = j.at("accuracy").get<std::vector<double>>();
        if (j.contains("concentration")) spec.concentration = j.at("concentration").get<double>();
        if (j.contains("conf_correct_correlation"))
            spec.conf_correct_correlation = j.at("conf_correct_correlation").get<double>();
        if (j.contains("difficulty_sigma"))
            spec.difficulty_sigma = j.at("difficulty_sigma").get<double>();
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": gen-spec: " + e.what());
    }
    return spec;
}

void TraceGenSpec::store(const std::filesystem::path& path) const {
    json j;
    j["sample_count"] = sample_count;
    j["seed"] = seed;
    j["confidence_mean"] = confidence_mean;
    j["accuracy"] = accuracy;
    j["concentration"] = concentration;
    j["conf_correct_correlation"] = conf_correct_correlation;
    j["difficulty_sigma"] = difficulty_sigma;
    write_text_file(path, j.dump(2) + "\n");
}

static double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

CalibrationTrace generate_trace(const TraceGenSpec& spec, const NetworkSpec& net) {
    const int classifiers = net.exit_count() + 1;
    if (static_cast<int>(spec.confidence_mean.size()) != classifiers ||
        static_cast<int>(spec.accuracy.size()) != classifiers)
        throw std::runtime_error("gen-spec: curves must have one entry per classifier (" +
                                 std::to_string(classifiers) + ")");
    if (spec.sample_count <= 0)
        throw std::runtime_error("gen-spec.sample_count: must be positive");
    if (spec.concentration <= 0.0)
        throw std::runtime_error("gen-spec.concentration: must be positive");
    for (double v : spec.confidence_mean)
        if (v < 0.0 || v > 1.0)
            throw std::runtime_error("gen-spec.confidence_mean: out of [0,1]");
    for (double v : spec.accuracy)
        if (v < 0.0 || v > 1.0) throw std::runtime_error("gen-spec.accuracy: out of [0,1]");

    Rng rng(spec.seed);
    std::vector<double> conf;
    std::vector<std::uint8_t> correct;
    conf.reserve(static_cast<std::size_t>(spec.sample_count) * classifiers);
    correct.reserve(conf.capacity());
    for (int s = 0; s < spec.sample_count; ++s) {
        const double shift =
            spec.difficulty_sigma != 0.0 ? spec.difficulty_sigma * rng.normal() : 0.0;
        for (int c = 0; c < classifiers; ++c) {
            const double curve = spec.confidence_mean[c];
            double x;
            if (curve >= 1.0 - 1e-9) {
                x = 1.0;
            } else if (curve <= 1e-9) {
                x = 0.0;
            } else {
                const double mu = std::clamp(curve + shift, 0.01, 0.99);
                x = rng.beta(mu * spec.concentration, (1.0 - mu) * spec.concentration);
            }
            conf.push_back(quantize6(x));

            const double acc = spec.accuracy[c];
            double p;
            if (acc >= 1.0 - 1e-12) {
                p = 1.0;
            } else if (acc <= 1e-12) {
                p = 0.0;
            } else if (spec.conf_correct_correlation == 0.0) {
                p = acc;
            } else {
                const double logit = std::log(acc / (1.0 - acc));
                const double z = logit + spec.conf_correct_correlation * (x - curve);
                p = 1.0 / (1.0 + std::exp(-z));
            }
            correct.push_back(rng.bernoulli(p) ? 1 : 0);
        }
    }
    return CalibrationTrace(std::move(conf), std::move(correct), spec.sample_count, classifiers);
}

}  // namespace exitdse
