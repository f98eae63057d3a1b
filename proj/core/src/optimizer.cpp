#include "exitdse/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

#include "exitdse/log.hpp"
#include "exitdse/rng.hpp"

namespace exitdse {

Objective make_objective(const NetworkSpec& net, const CalibrationTrace& trace,
                         const DeviceProfile& profile, double w_lat,
                         std::optional<double> eps_ms, std::optional<double> mem_max_bytes,
                         Objective::LatencyMode mode) {
    if (w_lat <= 0.0) throw std::runtime_error("objective.w_lat: must be positive");
    Objective obj;
    obj.w_lat = w_lat;
    obj.a_max = trace.standalone_accuracy(net.exit_count());
    if (obj.a_max <= 0.0)
        throw std::runtime_error("objective.a_max: final classifier never correct on this trace");
    double l = 0.0;
    for (int v = 0; v < net.backbone_count(); ++v) l += profile.latency()(v);
    obj.l_max = l;
    if (obj.l_max <= 0.0)
        throw std::runtime_error("objective.l_max: backbone latency must be positive");
    obj.eps_ms = eps_ms;
    obj.mem_max_bytes = mem_max_bytes;
    obj.latency_mode = mode;
    return obj;
}

double constraint_violation(const Objective& obj, const DesignMetrics& m) {
    double v = 0.0;
    const double lat = obj.latency_mode == Objective::LatencyMode::WorstCase
                           ? m.worst_case_latency_ms
                           : m.expected_latency_ms;
    if (obj.eps_ms && lat > *obj.eps_ms) v += (lat - *obj.eps_ms) / *obj.eps_ms;
    if (obj.mem_max_bytes && m.memory_bytes > *obj.mem_max_bytes)
        v += (m.memory_bytes - *obj.mem_max_bytes) / *obj.mem_max_bytes;
    return v;
}

double score(const Objective& obj, const DesignMetrics& m) {
    if (constraint_violation(obj, m) > 0.0)
        return -std::numeric_limits<double>::infinity();
    return m.accuracy / obj.a_max - obj.w_lat * std::log(m.expected_latency_ms / obj.l_max + 1.0);
}

bool better_outcome(const EvaluatedDesign& a, const EvaluatedDesign& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.metrics.expected_latency_ms != b.metrics.expected_latency_ms)
        return a.metrics.expected_latency_ms < b.metrics.expected_latency_ms;
    if (a.metrics.memory_bytes != b.metrics.memory_bytes)
        return a.metrics.memory_bytes < b.metrics.memory_bytes;
    return a.design.key() < b.design.key();
}

bool ParetoFront::dominates(const DesignMetrics& a, const DesignMetrics& b) {
    const bool no_worse = a.accuracy >= b.accuracy &&
                          a.expected_latency_ms <= b.expected_latency_ms &&
                          a.memory_bytes <= b.memory_bytes;
    const bool strictly = a.accuracy > b.accuracy ||
                          a.expected_latency_ms < b.expected_latency_ms ||
                          a.memory_bytes < b.memory_bytes;
    return no_worse && strictly;
}

static bool weakly_dominates(const DesignMetrics& a, const DesignMetrics& b) {
    return a.accuracy >= b.accuracy && a.expected_latency_ms <= b.expected_latency_ms &&
           a.memory_bytes <= b.memory_bytes;
}

void ParetoFront::insert(const EvaluatedDesign& e) {
    for (const auto& p : points_)
        if (weakly_dominates(p.metrics, e.metrics)) return;
    std::erase_if(points_, [&](const EvaluatedDesign& p) {
        return dominates(e.metrics, p.metrics);
    });
    auto pos = std::lower_bound(points_.begin(), points_.end(), e,
                                [](const EvaluatedDesign& a, const EvaluatedDesign& b) {
                                    return a.metrics.expected_latency_ms <
                                           b.metrics.expected_latency_ms;
                                });
    points_.insert(pos, e);
}

bool ParetoFront::covers(const ParetoFront& other) const {
    for (const auto& theirs : other.points_) {
        bool matched = false;
        for (const auto& ours : points_) {
            if (weakly_dominates(ours.metrics, theirs.metrics)) {
                matched = true;
                break;
            }
        }
        if (!matched) return false;
    }
    return true;
}

DesignEvaluator::DesignEvaluator(const NetworkSpec& net, const CalibrationTrace& trace,
                                 const DeviceProfile& profile, const Objective& obj)
    : net_(net), trace_(trace), profile_(profile), obj_(obj) {}

bool DesignEvaluator::cached(const DesignPoint& design) const {
    return cache_.count(design.key()) != 0;
}

const EvaluatedDesign& DesignEvaluator::eval(const DesignPoint& design) {
    const std::string key = design.key();
    auto it = cache_.find(key);
    if (it != cache_.end()) {
        ++hits_;
        return it->second;
    }
    ++misses_;

    EvaluatedDesign out;
    out.design = design;
    const EvalResult er = evaluate(net_, trace_, design);
    const SdfGraph graph = build_graph(net_, design);
    Eigen::VectorXd marginals(net_.exit_count());
    for (int k = 0; k < net_.exit_count(); ++k) marginals(k) = er.exit_rates[k];
    const TopologyMatrix topo =
        build_matrices(graph, ExitRateVector::from_marginals(graph, marginals,
                                                             er.final_fraction));
    const Eigen::VectorXd q = propagate_rates(topo);
    out.metrics.expected_latency_ms = expected_latency(profile_, q);
    out.metrics.worst_case_latency_ms = worst_case_latency(net_, design, profile_);
    out.metrics.memory_bytes = memory_footprint(profile_, q);
    out.metrics.accuracy = er.accuracy;
    out.violation = constraint_violation(obj_, out.metrics);
    out.feasible = out.violation == 0.0;
    out.score = score(obj_, out.metrics);
    return cache_.emplace(key, std::move(out)).first->second;
}

namespace {

// feasible designs compare by score; infeasible ones by how close to feasible
bool search_better(const EvaluatedDesign& a, const EvaluatedDesign& b) {
    if (a.feasible != b.feasible) return a.feasible;
    if (!a.feasible) return a.violation < b.violation;
    return better_outcome(a, b);
}

double acceptance_delta(const EvaluatedDesign& next, const EvaluatedDesign& cur) {
    if (next.feasible && cur.feasible) return next.score - cur.score;
    if (next.feasible != cur.feasible)
        return next.feasible ? 1.0 : -std::numeric_limits<double>::infinity();
    return cur.violation - next.violation;
}

std::vector<std::uint8_t> random_bits(Rng& rng, int n, bool prior) {
    std::vector<std::uint8_t> p(n, 0);
    for (int k = 0; k < n; ++k) {
        if (rng.bernoulli(0.5)) {
            if (prior && k > 0 && p[k - 1]) continue;
            p[k] = 1;
        }
    }
    return p;
}

DesignPoint initial_design(const NetworkSpec& net, const ThresholdGrid& grid, bool prior) {
    // start near the overprovisioned end of the space: everything on, or every
    // other position when adjacency is disallowed
    std::vector<std::uint8_t> p(net.exit_count(), 1);
    if (prior)
        for (int k = 1; k < net.exit_count(); k += 2) p[k] = 0;
    return DesignPoint::from_grid(std::move(p), grid, grid.size() / 2);
}

}  // namespace

OptimizeResult optimize(const NetworkSpec& net, const CalibrationTrace& trace,
                        const DeviceProfile& profile, const ThresholdGrid& grid,
                        const Objective& obj, const SaConfig& cfg) {
    if (cfg.cooling <= 0.0 || cfg.cooling >= 1.0)
        throw std::runtime_error("sa.cooling: must be in (0,1)");
    if (cfg.iters_per_temp < 1) throw std::runtime_error("sa.iters_per_temp: must be >= 1");
    if (cfg.t_min <= 0.0) throw std::runtime_error("sa.t_min: must be positive");

    TransformEngine engine(net, trace, grid, cfg.adjacency_prior);
    DesignEvaluator evaluator(net, trace, profile, obj);
    Rng rng(cfg.seed);

    OptimizeResult result;
    auto budget_left = [&] {
        return cfg.eval_budget == 0 || evaluator.evaluations() < cfg.eval_budget;
    };
    auto track = [&](const EvaluatedDesign& e) {
        if (e.feasible) result.front.insert(e);
    };
    auto eval_tracked = [&](const DesignPoint& d) -> const EvaluatedDesign& {
        const bool fresh = !evaluator.cached(d);
        const EvaluatedDesign& e = evaluator.eval(d);
        if (fresh) track(e);
        return e;
    };

    EvaluatedDesign current = eval_tracked(initial_design(net, grid, cfg.adjacency_prior));
    EvaluatedDesign best = current;

    // temperature calibration: sample objective deltas between random designs
    // and pick T0 so a typical worsening move starts ~80% acceptable
    double t0 = cfg.t_initial;
    if (t0 <= 0.0) {
        std::vector<double> scores;
        for (int i = 0; i < 100 && budget_left(); ++i) {
            DesignPoint d = DesignPoint::from_grid(
                random_bits(rng, net.exit_count(), cfg.adjacency_prior), grid,
                static_cast<int>(rng.uniform_index(grid.size())));
            const EvaluatedDesign& e = eval_tracked(d);
            if (search_better(e, best)) best = e;
            if (e.feasible) scores.push_back(e.score);
        }
        double mean_delta = 0.0;
        int count = 0;
        for (std::size_t i = 1; i < scores.size(); ++i) {
            mean_delta += std::abs(scores[i] - scores[i - 1]);
            ++count;
        }
        mean_delta = count ? mean_delta / count : 0.0;
        t0 = mean_delta > 0.0 ? mean_delta / std::log(1.0 / 0.8) : 0.05;
        t0 = std::clamp(t0, 1e-3, 10.0);
        logf(LogLevel::Debug, "sa: calibrated t0 = %g from %d deltas", t0, count);
    }

    std::size_t iteration = 0;
    int restarts = 0;
    bool exhausted = false;
    while (!exhausted) {
        const std::size_t evals_before = evaluator.evaluations();
        double t = t0;
        while (t >= cfg.t_min) {
            for (int i = 0; i < cfg.iters_per_temp; ++i) {
                const auto moves = engine.neighbours(current.design);
                if (moves.empty()) break;
                const DesignPoint& proposal = moves[rng.uniform_index(moves.size())];
                if (!evaluator.cached(proposal) && !budget_left()) {
                    exhausted = true;
                    break;
                }
                const EvaluatedDesign& cand = eval_tracked(proposal);
                const double delta = acceptance_delta(cand, current);
                const bool accept = delta >= 0.0 || rng.uniform() < std::exp(delta / t);
                result.log.push_back({iteration++, t, cand.design, cand.score, accept});
                if (accept) current = cand;
                if (search_better(cand, best)) best = cand;
            }
            if (exhausted) break;
            t *= cfg.cooling;
        }
        // reheat only when an explicit budget leaves room to keep exploring; a
        // schedule that discovered nothing new means the reachable space is
        // spent and further restarts would only replay cached designs
        if (exhausted || cfg.eval_budget == 0 || !budget_left()) break;
        if (evaluator.evaluations() == evals_before || ++restarts > 64) break;
        DesignPoint restart = DesignPoint::from_grid(
            random_bits(rng, net.exit_count(), cfg.adjacency_prior), grid,
            static_cast<int>(rng.uniform_index(grid.size())));
        current = eval_tracked(restart);
        if (search_better(current, best)) best = current;
    }

    // refinement: steepest move of one selected exit to an adjacent candidate
    // position, prior lifted, to a fixed point
    for (int sweep = 0; sweep < 3; ++sweep) {
        const EvaluatedDesign before = best;
        for (int k = 0; k < net.exit_count(); ++k) {
            if (!before.design.p_exit[k]) continue;
            for (int step : {-1, +1}) {
                const int j = k + step;
                if (j < 0 || j >= net.exit_count() || before.design.p_exit[j]) continue;
                DesignPoint moved = before.design;
                moved.p_exit[k] = 0;
                moved.p_exit[j] = 1;
                if (!evaluator.cached(moved) && !budget_left()) break;
                const EvaluatedDesign& cand = eval_tracked(moved);
                if (search_better(cand, best)) best = cand;
            }
        }
        if (best.design.key() == before.design.key()) break;
    }

    result.best = best;
    result.feasible = best.feasible;
    result.evaluations = evaluator.evaluations();
    result.cache_hits = evaluator.cache_hits();
    if (!result.feasible)
        logf(LogLevel::Warn,
             "optimize: no feasible design (least violating: %s, violation %g)",
             best.design.key().c_str(), best.violation);
    return result;
}

BruteForceResult brute_force(const NetworkSpec& net, const CalibrationTrace& trace,
                             const DeviceProfile& profile, const ThresholdGrid& grid,
                             const Objective& obj, std::size_t cap) {
    const std::size_t space = enumerate_designs(net, grid);
    if (space > cap)
        throw std::runtime_error("brute_force: search space of " + std::to_string(space) +
                                 " designs exceeds cap " + std::to_string(cap));
    DesignEvaluator evaluator(net, trace, profile, obj);
    BruteForceResult result;
    EvaluatedDesign least_violating;
    bool have_any = false;

    const int n = net.exit_count();
    for (int ti = 0; ti < grid.size(); ++ti) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
            if (mask == 0 && ti == 0) continue;  // the no-exit placement counts once less
            std::vector<std::uint8_t> p(n);
            for (int k = 0; k < n; ++k) p[k] = (mask >> k) & 1;
            const EvaluatedDesign& e =
                evaluator.eval(DesignPoint::from_grid(std::move(p), grid, ti));
            ++result.evaluated;
            if (e.feasible) result.front.insert(e);
            if (!have_any) {
                least_violating = e;
                have_any = true;
            } else if (search_better(e, least_violating)) {
                least_violating = e;
            }
        }
    }
    result.best = least_violating;
    result.feasible = least_violating.feasible;
    return result;
}

OptimizeResult random_search(const NetworkSpec& net, const CalibrationTrace& trace,
                             const DeviceProfile& profile, const ThresholdGrid& grid,
                             const Objective& obj, std::size_t draws, std::uint64_t seed,
                             bool adjacency_prior) {
    Rng rng(seed);
    OptimizeResult result;
    const int n = net.exit_count();
    bool have_best = false;
    EvaluatedDesign best;
    for (std::size_t i = 0; i < draws; ++i) {
        std::vector<std::uint8_t> p(n);
        for (;;) {
            const std::uint64_t mask = rng.next_u64();
            for (int k = 0; k < n; ++k) p[k] = (mask >> k) & 1;
            if (!adjacency_prior) break;
            bool adjacent = false;
            for (int k = 0; k + 1 < n; ++k)
                if (p[k] && p[k + 1]) adjacent = true;
            if (!adjacent) break;
        }
        const DesignPoint d = DesignPoint::from_grid(
            std::move(p), grid, static_cast<int>(rng.uniform_index(grid.size())));

        // no memoisation: the baseline re-pays for every draw, repeated or not
        DesignEvaluator one_shot(net, trace, profile, obj);
        const EvaluatedDesign e = one_shot.eval(d);
        ++result.evaluations;
        if (e.feasible) result.front.insert(e);
        if (!have_best || search_better(e, best)) {
            best = e;
            have_best = true;
        }
    }
    if (have_best) {
        result.best = best;
        result.feasible = best.feasible;
    }
    return result;
}

WlatChoice tune_wlat(const NetworkSpec& net, const CalibrationTrace& trace,
                     const DeviceProfile& profile, const ThresholdGrid& grid,
                     const Objective& base, const std::vector<double>& w_grid,
                     const SaConfig& cfg, int jobs) {
    if (w_grid.empty()) throw std::runtime_error("tune_wlat: weight grid must not be empty");
    std::vector<double> weights = w_grid;
    std::sort(weights.begin(), weights.end(), std::greater<>());

    std::vector<WlatRow> rows(weights.size());
    const int workers = std::max(1, jobs);
    std::size_t next = 0;
    while (next < weights.size()) {
        std::vector<std::future<void>> batch;
        const std::size_t end = std::min(next + workers, weights.size());
        for (std::size_t i = next; i < end; ++i) {
            batch.push_back(std::async(std::launch::async, [&, i] {
                Objective obj = base;
                obj.w_lat = weights[i];
                const OptimizeResult r = optimize(net, trace, profile, grid, obj, cfg);
                rows[i] = {weights[i], r.feasible, r.best};
            }));
        }
        for (auto& f : batch) f.get();
        next = end;
    }

    WlatChoice choice;
    choice.table = rows;

    // knee: from the fastest (largest weight) design toward slower ones, stop
    // where the next step buys less than half an accuracy point
    std::vector<const WlatRow*> feasible;
    for (const auto& r : rows)
        if (r.feasible) feasible.push_back(&r);
    if (feasible.empty()) return choice;

    double knee_latency = feasible.back()->best.metrics.expected_latency_ms;
    for (std::size_t i = 0; i + 1 < feasible.size(); ++i) {
        const double gain =
            feasible[i + 1]->best.metrics.accuracy - feasible[i]->best.metrics.accuracy;
        if (gain < 0.005) {
            knee_latency = feasible[i]->best.metrics.expected_latency_ms;
            break;
        }
    }

    const WlatRow* chosen = nullptr;
    for (const WlatRow* r : feasible) {
        if (r->best.metrics.expected_latency_ms > knee_latency) continue;
        if (!chosen || r->best.metrics.accuracy > chosen->best.metrics.accuracy ||
            (r->best.metrics.accuracy == chosen->best.metrics.accuracy &&
             r->best.metrics.expected_latency_ms < chosen->best.metrics.expected_latency_ms))
            chosen = r;
    }
    if (!chosen) chosen = feasible.front();
    choice.chosen_w_lat = chosen->w_lat;
    choice.feasible = true;
    return choice;
}

}  // namespace exitdse
