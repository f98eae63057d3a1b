#include <doctest.h>

#include <filesystem>

#include "exitdse/perf.hpp"
#include "exitdse/csv.hpp"
#include "exitdse/sdf.hpp"
#include "testutil.hpp"

using namespace exitdse;

namespace {

Eigen::VectorXd reference_q() {
    Eigen::VectorXd q(7);
    q << 1, 1, 0.2, 0.2, 0.2, 0, 1;
    return q;
}

}  // namespace

TEST_CASE("expected latency is q dot l") {
    const NetworkSpec net = testutil::reference_network();
    const DeviceProfile profile = testutil::unit_profile(net);
    CHECK(expected_latency(profile, reference_q()) == doctest::Approx(3.6).epsilon(1e-12));

    Eigen::VectorXd degenerate = Eigen::VectorXd::Zero(7);
    degenerate(0) = 1.0;
    CHECK(expected_latency(profile, degenerate) == 1.0);

    Eigen::VectorXd wrong(3);
    CHECK_THROWS_WITH_AS(expected_latency(profile, wrong), doctest::Contains("dimension"),
                         std::runtime_error);
}

TEST_CASE("memory counts the nodes that are used") {
    const NetworkSpec net = testutil::reference_network();
    const DeviceProfile profile = testutil::unit_profile(net);  // 10 bytes per node
    CHECK(memory_footprint(profile, reference_q()) == 60.0);

    Eigen::VectorXd none = Eigen::VectorXd::Zero(7);
    none.head(5).setOnes();
    CHECK(memory_footprint(profile, none) == 50.0);
    CHECK(memory_footprint(profile, Eigen::VectorXd::Ones(7)) == 70.0);
}

TEST_CASE("worst case charges the full depth plus instantiated heads") {
    const NetworkSpec net = testutil::reference_network();
    const DeviceProfile profile = testutil::unit_profile(net);
    CHECK(worst_case_latency(net, DesignPoint::make({0, 0}, "0.5"), profile) == 5.0);
    CHECK(worst_case_latency(net, testutil::reference_design(), profile) == 6.0);
    CHECK(worst_case_latency(net, DesignPoint::make({1, 1}, "0.5"), profile) == 7.0);
}

TEST_CASE("profile csv round trip and validation") {
    const NetworkSpec net = testutil::reference_network();
    const auto dir = std::filesystem::temp_directory_path() / "exitdse_profile";
    std::filesystem::create_directories(dir);

    const auto path = dir / "p.csv";
    std::string body = "node_id,latency_ms,mem_bytes\n";
    for (int v = 0; v < net.node_count(); ++v)
        body += net.node_id(v) + "," + std::to_string(1.5 * (v + 1)) + ",100\n";
    write_text_file(path, body);
    const DeviceProfile p = DeviceProfile::load(path, net);
    CHECK(p.latency()(0) == 1.5);
    CHECK(p.latency()(6) == 10.5);
    p.store(dir / "roundtrip.csv");
    const DeviceProfile p2 = DeviceProfile::load(dir / "roundtrip.csv", net);
    CHECK(p2.latency() == p.latency());
    CHECK(p2.memory() == p.memory());

    SUBCASE("missing node") {
        write_text_file(path, "node_id,latency_ms,mem_bytes\nl1,1,1\n");
        CHECK_THROWS_WITH_AS(DeviceProfile::load(path, net), doctest::Contains("missing"),
                             std::runtime_error);
    }
    SUBCASE("negative latency") {
        std::string bad = "node_id,latency_ms,mem_bytes\n";
        for (int v = 0; v < net.node_count(); ++v) bad += net.node_id(v) + ",-1,1\n";
        write_text_file(path, bad);
        CHECK_THROWS_WITH_AS(DeviceProfile::load(path, net), doctest::Contains("negative"),
                             std::runtime_error);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("multi-device profile selects columns by name") {
    const NetworkSpec net = testutil::chain_network(3, {0});
    const auto dir = std::filesystem::temp_directory_path() / "exitdse_profile_multi";
    std::filesystem::create_directories(dir);
    const auto path = dir / "devices.csv";
    std::string body =
        "node_id,latency_ms:embedded,mem_bytes:embedded,latency_ms:server,mem_bytes:server,"
        "latency_ms:laptop,mem_bytes:laptop\n";
    for (int v = 0; v < net.node_count(); ++v)
        body += net.node_id(v) + ",8,64,1,64,3,64\n";
    write_text_file(path, body);

    CHECK(DeviceProfile::load(path, net, "embedded").latency()(0) == 8.0);
    CHECK(DeviceProfile::load(path, net, "server").latency()(0) == 1.0);
    CHECK(DeviceProfile::load(path, net, "laptop").device() == "laptop");
    CHECK_THROWS_WITH_AS(DeviceProfile::load(path, net, "phone"),
                         doctest::Contains("phone"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("memory footprint is monotone in the exit set") {
    Rng rng(17);
    const ThresholdGrid grid = ThresholdGrid::default_grid();
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkSpec net = testutil::random_network(rng);
        const CalibrationTrace trace =
            testutil::with_hard_sample(testutil::random_trace(rng, net, 64));
        const DeviceProfile profile = testutil::unit_profile(net, 1.0, 13.0);
        DesignPoint smaller = testutil::random_design(rng, net, grid);
        DesignPoint larger = smaller;
        bool grew = false;
        for (auto& bit : larger.p_exit) {
            if (!bit && rng.bernoulli(0.5)) {
                bit = 1;
                grew = true;
            }
        }
        if (!grew) continue;
        const auto q_of = [&](const DesignPoint& d) {
            const EvalResult er = evaluate(net, trace, d);
            const SdfGraph g = build_graph(net, d);
            Eigen::VectorXd m(net.exit_count());
            for (int k = 0; k < net.exit_count(); ++k) m(k) = er.exit_rates[k];
            return propagate_rates(
                build_matrices(g, ExitRateVector::from_marginals(g, m, er.final_fraction)));
        };
        CHECK(memory_footprint(profile, q_of(larger)) >=
              memory_footprint(profile, q_of(smaller)));
    }
}
