#include <doctest.h>

#include <filesystem>
#include <thread>

#include "exitdse/calibration.hpp"
#include "exitdse/csv.hpp"
#include "exitdse/simulator.hpp"
#include "testutil.hpp"

using namespace exitdse;

TEST_CASE("reference trace: 80% of samples stop at the early exit") {
    const NetworkSpec net = testutil::reference_network();
    const CalibrationTrace trace = testutil::reference_trace();
    const EvalResult er = evaluate(net, trace, testutil::reference_design());
    CHECK(er.exit_rates[0] == 0.0);
    CHECK(er.exit_rates[1] == 0.8);
    CHECK(er.final_fraction == 0.2);
    CHECK(er.fallback_fraction == 0.0);
    CHECK(er.accuracy == 0.8);
    CHECK(er.exit_rates[0] + er.exit_rates[1] + er.final_fraction ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("threshold floor: everything stops at the first instantiated exit") {
    const NetworkSpec net = testutil::reference_network();
    const CalibrationTrace trace = testutil::reference_trace();
    const EvalResult er = evaluate(net, trace, DesignPoint::make({0, 1}, "0"));
    CHECK(er.exit_rates[1] == 1.0);
    CHECK(er.final_fraction == 0.0);
    CHECK(er.accuracy == trace.standalone_accuracy(1));
}

TEST_CASE("fallback picks the most confident classifier") {
    const NetworkSpec net = testutil::chain_network(4, {0, 1});
    // columns: exit1, exit2, final
    const std::vector<double> conf = {
        0.50, 0.95, 0.10,  //
        0.20, 0.30, 0.85,  //
        0.91, 0.10, 0.30,  //
    };
    const std::vector<std::uint8_t> correct = {
        1, 0, 1,  //
        0, 1, 1,  //
        1, 1, 0,  //
    };
    const CalibrationTrace trace(conf, correct, 3, 3);
    const DesignPoint d = DesignPoint::make({1, 1}, "0.9");
    const EvalResult er = evaluate(net, trace, d);
    // stops: exit2, fallback to final, exit1
    CHECK(er.exit_rates[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(er.exit_rates[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(er.final_fraction == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(er.fallback_fraction == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(er.accuracy == doctest::Approx(2.0 / 3).epsilon(1e-15));

    // the per-sample replay agrees outcome by outcome
    const SimulationResult sim =
        simulate(net, d, trace, testutil::unit_profile(net));
    CHECK(sim.outcomes[0].classifier == "x2");
    CHECK(sim.outcomes[1].classifier == "l4");
    CHECK(sim.outcomes[2].classifier == "x1");
    CHECK(sim.rates.accuracy == er.accuracy);
    CHECK(sim.rates.fallback_fraction == er.fallback_fraction);
}

TEST_CASE("fallback tie on confidence resolves to the earliest classifier") {
    const NetworkSpec net = testutil::chain_network(4, {0, 1});
    const std::vector<double> conf = {0.40, 0.40, 0.40};
    const std::vector<std::uint8_t> correct = {1, 0, 0};
    const CalibrationTrace trace(conf, correct, 1, 3);
    const EvalResult er = evaluate(net, trace, DesignPoint::make({1, 1}, "0.9"));
    CHECK(er.fallback_fraction == 1.0);
    CHECK(er.accuracy == 1.0);  // exit1's flag, not the final classifier's
}

TEST_CASE("no exits: final classifier standalone accuracy") {
    const NetworkSpec net = testutil::reference_network();
    Rng rng(7);
    const CalibrationTrace trace = testutil::random_trace(rng, net, 200);
    for (const char* thr : {"0.4", "0.6", "0.8"}) {
        const EvalResult er = evaluate(net, trace, DesignPoint::make({0, 0}, thr));
        CHECK(er.accuracy == trace.standalone_accuracy(net.exit_count()));
        CHECK(er.final_fraction == 1.0);
    }
}

TEST_CASE("first instantiated exit rate is non-increasing in the threshold") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkSpec net = testutil::random_network(rng);
        const CalibrationTrace trace = testutil::random_trace(rng, net);
        std::vector<std::uint8_t> p(net.exit_count(), 0);
        const int first = net.exits_by_depth().front();
        p[first] = 1;
        double prev = 1.0;
        for (const char* thr : {"0.1", "0.3", "0.5", "0.7", "0.9"}) {
            const EvalResult er = evaluate(net, trace, DesignPoint::make(p, thr));
            CHECK(er.exit_rates[first] <= prev);
            prev = er.exit_rates[first];
        }
    }
}

TEST_CASE("trace csv round trip") {
    const NetworkSpec net = testutil::reference_network();
    Rng rng(3);
    const CalibrationTrace trace = testutil::random_trace(rng, net, 64);
    const auto dir = std::filesystem::temp_directory_path() / "exitdse_trace_rt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "t.csv";
    trace.store(path);
    const CalibrationTrace loaded = CalibrationTrace::load(path);
    REQUIRE(loaded.sample_count() == trace.sample_count());
    REQUIRE(loaded.classifier_count() == trace.classifier_count());
    for (int s = 0; s < trace.sample_count(); ++s) {
        for (int c = 0; c < trace.classifier_count(); ++c) {
            CHECK(loaded.conf(s, c) == trace.conf(s, c));
            CHECK(loaded.correct(s, c) == trace.correct(s, c));
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("trace csv rejects malformed input") {
    const auto dir = std::filesystem::temp_directory_path() / "exitdse_trace_bad";
    std::filesystem::create_directories(dir);
    const auto write = [&](const char* name, const std::string& body) {
        const auto p = dir / name;
        write_text_file(p, body);
        return p;
    };
    CHECK_THROWS_AS(CalibrationTrace::load(write("empty.csv", "")), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        CalibrationTrace::load(write("range.csv",
                                     "sample_id,conf_1,correct_1\n0,1.200000,1\n")),
        doctest::Contains("[0,1]"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        CalibrationTrace::load(write("short.csv",
                                     "sample_id,conf_1,correct_1\n0,0.500000\n")),
        doctest::Contains("malformed"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        CalibrationTrace::load(write("flag.csv",
                                     "sample_id,conf_1,correct_1\n0,0.500000,7\n")),
        doctest::Contains("0/1"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate validates bindings") {
    const NetworkSpec net = testutil::reference_network();
    const CalibrationTrace trace(std::vector<double>(4, 0.5),
                                 std::vector<std::uint8_t>(4, 1), 2, 2);
    CHECK_THROWS_WITH_AS(evaluate(net, trace, testutil::reference_design()),
                         doctest::Contains("classifiers"), std::runtime_error);
    CHECK_THROWS_AS(evaluate(net, testutil::reference_trace(),
                             DesignPoint::make({1, 1}, "1.5")),
                    std::runtime_error);
}

TEST_CASE("evaluate is safe for concurrent callers") {
    const NetworkSpec net = testutil::reference_network();
    Rng rng(41);
    const CalibrationTrace trace = testutil::random_trace(rng, net, 256);
    const DesignPoint d = testutil::reference_design();
    const EvalResult reference = evaluate(net, trace, d);

    std::vector<std::thread> workers;
    std::vector<EvalResult> results(8);
    for (int i = 0; i < 8; ++i)
        workers.emplace_back(
            [&, i] { results[i] = evaluate(net, trace, d); });
    for (auto& w : workers) w.join();
    for (const auto& r : results) {
        CHECK(r.accuracy == reference.accuracy);
        CHECK(r.exit_rates == reference.exit_rates);
    }
}

TEST_CASE("memoised element accounting") {
    CHECK(ThresholdBitmaps::element_count_for(50000, 58, 3) == 17400000u);
    CHECK(ThresholdBitmaps::element_count_for(500, 58, 3) == 174000u);

    const NetworkSpec net = testutil::chain_network(6, {0, 1, 2, 3});
    Rng rng(5);
    const CalibrationTrace trace = testutil::random_trace(rng, net, 100);
    const ThresholdGrid grid = ThresholdGrid::default_grid();
    const ThresholdBitmaps maps(trace, net, grid);
    CHECK(maps.element_count() == 2u * 100 * 4 * 3);
    for (int s = 0; s < trace.sample_count(); s += 7) {
        for (int k = 0; k < net.exit_count(); ++k) {
            for (int t = 0; t < grid.size(); ++t) {
                CHECK(maps.pass(s, k, t) == (trace.conf(s, k) >= grid.value(t)));
                CHECK(maps.correct_bit(s, k, t) == trace.correct(s, k));
            }
        }
    }
}
