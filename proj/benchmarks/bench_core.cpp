// Microbenchmarks for the evaluation hot path: the memoised policy scan, rate
// propagation, algebraic transformations and the search loops built on them.

#include <benchmark/benchmark.h>

#include "exitdse/calibration.hpp"
#include "exitdse/optimizer.hpp"
#include "exitdse/sdf.hpp"
#include "exitdse/simulator.hpp"
#include "exitdse/transform.hpp"
#include "testutil.hpp"

using namespace exitdse;

namespace {

struct Fixture {
    NetworkSpec net;
    CalibrationTrace trace;
    DeviceProfile profile;
    ThresholdGrid grid;
    DesignPoint design;

    static Fixture make(int nb, int n_exits, int samples) {
        std::vector<int> attach;
        for (int i = 0; i < n_exits; ++i) attach.push_back(i);
        NetworkSpec net = testutil::chain_network(nb, attach, "bench");

        TraceGenSpec spec;
        spec.sample_count = samples;
        spec.seed = 1;
        spec.concentration = 25.0;
        spec.conf_correct_correlation = 2.0;
        spec.difficulty_sigma = 0.25;
        for (int c = 0; c <= n_exits; ++c) {
            spec.confidence_mean.push_back(0.2 + 0.5 * c / n_exits);
            spec.accuracy.push_back(0.5 + 0.4 * c / n_exits);
        }
        CalibrationTrace trace = generate_trace(spec, net);
        DeviceProfile profile = testutil::unit_profile(net, 1.5, 1024.0);
        ThresholdGrid grid = ThresholdGrid::default_grid();
        std::vector<std::uint8_t> p(n_exits, 0);
        for (int k = 0; k < n_exits; k += 2) p[k] = 1;
        DesignPoint design = DesignPoint::from_grid(std::move(p), grid, 1);
        return {std::move(net), std::move(trace), std::move(profile), std::move(grid),
                std::move(design)};
    }
};

void BM_EvaluateDesign(benchmark::State& state) {
    const Fixture f = Fixture::make(12, 10, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate(f.net, f.trace, f.design));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateDesign)->Arg(512)->Arg(10000)->Arg(50000);

void BM_RatePropagation(benchmark::State& state) {
    const Fixture f = Fixture::make(static_cast<int>(state.range(0)),
                                    static_cast<int>(state.range(0)) - 2, 256);
    const EvalResult er = evaluate(f.net, f.trace, f.design);
    const SdfGraph g = build_graph(f.net, f.design);
    Eigen::VectorXd m(f.net.exit_count());
    for (int k = 0; k < f.net.exit_count(); ++k) m(k) = er.exit_rates[k];
    const ExitRateVector rates = ExitRateVector::from_marginals(g, m, er.final_fraction);
    for (auto _ : state) {
        const TopologyMatrix topo = build_matrices(g, rates);
        benchmark::DoNotOptimize(propagate_rates(topo));
    }
}
BENCHMARK(BM_RatePropagation)->Arg(12)->Arg(64)->Arg(128);

void BM_TransformApply(benchmark::State& state) {
    const Fixture f = Fixture::make(12, 10, 512);
    const TransformEngine engine(f.net, f.trace, f.grid, false);
    const TopologyMatrix topo = engine.build(f.design);
    std::vector<std::uint8_t> p(10, 0);
    p[3] = p[7] = 1;
    const Transformation t = Transformation::exitrepos(std::move(p));
    for (auto _ : state) {
        benchmark::DoNotOptimize(engine.apply(topo, t));
    }
}
BENCHMARK(BM_TransformApply);

void BM_FullPipelineEval(benchmark::State& state) {
    const Fixture f = Fixture::make(12, 10, 512);
    const Objective obj = make_objective(f.net, f.trace, f.profile, 1.0);
    for (auto _ : state) {
        DesignEvaluator evaluator(f.net, f.trace, f.profile, obj);
        benchmark::DoNotOptimize(evaluator.eval(f.design));
    }
}
BENCHMARK(BM_FullPipelineEval);

void BM_BruteForce(benchmark::State& state) {
    const Fixture f = Fixture::make(12, static_cast<int>(state.range(0)), 512);
    const Objective obj = make_objective(f.net, f.trace, f.profile, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            brute_force(f.net, f.trace, f.profile, f.grid, obj, 1u << 20));
    }
}
BENCHMARK(BM_BruteForce)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Annealing(benchmark::State& state) {
    const Fixture f = Fixture::make(12, 10, 512);
    const Objective obj = make_objective(f.net, f.trace, f.profile, 1.0);
    SaConfig cfg;
    for (auto _ : state) {
        cfg.seed++;
        benchmark::DoNotOptimize(optimize(f.net, f.trace, f.profile, f.grid, obj, cfg));
    }
}
BENCHMARK(BM_Annealing)->Unit(benchmark::kMillisecond);

void BM_TraceGeneration(benchmark::State& state) {
    const Fixture f = Fixture::make(12, 10, 64);
    TraceGenSpec spec;
    spec.sample_count = static_cast<int>(state.range(0));
    spec.seed = 3;
    spec.difficulty_sigma = 0.25;
    for (int c = 0; c <= 10; ++c) {
        spec.confidence_mean.push_back(0.2 + 0.05 * c);
        spec.accuracy.push_back(0.5 + 0.04 * c);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_trace(spec, f.net));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TraceGeneration)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
