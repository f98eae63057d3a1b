#include <doctest.h>

#include <Eigen/Dense>

#include "exitdse/sdf.hpp"
#include "testutil.hpp"

using namespace exitdse;

TEST_CASE("reference design: graph shape") {
    const NetworkSpec net = testutil::reference_network();
    const SdfGraph g = build_graph(net, testutil::reference_design());
    CHECK(g.nodes.size() == 7);
    CHECK(g.edges.size() == 6);
    CHECK(g.backbone_edge_count() == 4);
    // dead candidate keeps its slot: row index 4 (1-based row 5)
    CHECK(g.edges[4].exit_edge);
    CHECK_FALSE(g.edges[4].live);
    CHECK(g.edges[5].live);
    CHECK(g.edges[5].producer == 1);  // l2 feeds the live head
    CHECK(g.edges[5].consumer == 6);
}

TEST_CASE("reference design: matrices and rate vector") {
    const NetworkSpec net = testutil::reference_network();
    const SdfGraph g = build_graph(net, testutil::reference_design());
    Eigen::VectorXd marginals(2);
    marginals << 0.0, 0.8;
    const TopologyMatrix topo =
        build_matrices(g, ExitRateVector::from_marginals(g, marginals, 0.2));

    // production rate of l2 toward l3 drops to the 20% that carry on
    CHECK(topo.r(1, 1) == 0.2);
    CHECK(topo.c(1, 1) == 1.0);
    CHECK(topo.c(1, 2) == -1.0);
    // dead exit edge row is all zero in C, the live one connects l2 to x_early
    for (int v = 0; v < topo.node_count(); ++v) CHECK(topo.c(4, v) == 0.0);
    CHECK(topo.c(5, 1) == 1.0);
    CHECK(topo.c(5, 6) == -1.0);

    // partitioned structure: backbone rows never touch exit columns
    const Eigen::MatrixXd gamma = topo.dense_gamma();
    CHECK(gamma.topRightCorner(4, 2).isZero(0.0));
    CHECK(gamma.row(4).isZero(0.0));

    const Eigen::VectorXd q = propagate_rates(topo);
    const double expected[] = {1.0, 1.0, 0.2, 0.2, 0.2, 0.0, 1.0};
    REQUIRE(q.size() == 7);
    for (int v = 0; v < 7; ++v) CHECK(q(v) == expected[v]);

    CHECK(topo.residual_inf_norm(q) <= 1e-9);
    // independent algebraic route for the residual
    CHECK((gamma * q).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("no-exit design reduces to the plain chain") {
    const NetworkSpec net = testutil::reference_network();
    const DesignPoint d = DesignPoint::make({0, 0}, "0.85");
    const SdfGraph g = build_graph(net, d);
    const TopologyMatrix topo =
        build_matrices(g, ExitRateVector::from_marginals(g, Eigen::VectorXd::Zero(2)));
    for (int e = 0; e < topo.backbone_edge_count(); ++e)
        CHECK(topo.entries()[e].prod_rate == 1.0);
    const Eigen::VectorXd q = propagate_rates(topo);
    for (int v = 0; v < 5; ++v) CHECK(q(v) == 1.0);
    CHECK(q(5) == 0.0);
    CHECK(q(6) == 0.0);
    // both exit rows dead
    CHECK(topo.dense_c().bottomRows(2).isZero(0.0));
}

TEST_CASE("3-layer chain with one instantiated exit") {
    const NetworkSpec net = testutil::chain_network(3, {0});
    const DesignPoint d = DesignPoint::make({1}, "0.5");
    const SdfGraph g = build_graph(net, d);
    CHECK(g.nodes.size() == 4);
    CHECK(g.edges.size() == 3);
    // cross-check against a plain adjacency list of the same network
    std::vector<std::pair<int, int>> adjacency;
    for (int v = 0; v < net.backbone_count(); ++v)
        for (int u : net.backbone_preds()[v]) adjacency.push_back({u, v});
    adjacency.push_back({net.attach_index(0), net.backbone_count()});
    REQUIRE(adjacency.size() == g.edges.size());
    for (std::size_t e = 0; e < adjacency.size(); ++e) {
        CHECK(g.edges[e].producer == adjacency[e].first);
        CHECK(g.edges[e].consumer == adjacency[e].second);
    }
}

TEST_CASE("two instantiated exits: survival cascade") {
    // 4-layer chain, exits after l1 (50% of all samples) and l2 (30%)
    const NetworkSpec net = testutil::chain_network(4, {0, 1});
    const DesignPoint d = DesignPoint::make({1, 1}, "0.85");
    const SdfGraph g = build_graph(net, d);
    Eigen::VectorXd marginals(2);
    marginals << 0.5, 0.3;
    const TopologyMatrix topo =
        build_matrices(g, ExitRateVector::from_marginals(g, marginals, 0.2));

    // per-execution pass-through rates: 0.5 across l1, 0.4 across l2 (the 20%
    // absolute survivors out of the 50% reaching l2), 1.0 across l3
    CHECK(topo.entries()[0].prod_rate == 0.5);
    CHECK(topo.entries()[1].prod_rate == 0.4);
    CHECK(topo.entries()[2].prod_rate == 1.0);

    const Eigen::VectorXd q = propagate_rates(topo);
    const double expected[] = {1.0, 0.5, 0.2, 0.2, 1.0, 0.5};
    for (int v = 0; v < 6; ++v) CHECK(q(v) == expected[v]);
    CHECK(topo.residual_inf_norm(q) <= 1e-9);
}

TEST_CASE("exit rate validation") {
    const NetworkSpec net = testutil::reference_network();
    const SdfGraph all_live = build_graph(net, DesignPoint::make({1, 1}, "0.85"));
    Eigen::VectorXd over(2);
    over << 0.6, 0.6;
    CHECK_THROWS_WITH_AS(ExitRateVector::from_marginals(all_live, over),
                         doctest::Contains("sum"), std::runtime_error);
    const SdfGraph g = build_graph(net, testutil::reference_design());
    Eigen::VectorXd dead_nonzero(2);
    dead_nonzero << 0.2, 0.3;  // candidate 0 is deselected in the reference design
    CHECK_THROWS_WITH_AS(ExitRateVector::from_marginals(g, dead_nonzero),
                         doctest::Contains("deselected"), std::runtime_error);
}

TEST_CASE("residual join carries agreeing rates") {
    // l1 -> l2 -> l3 -> l4 with skip l2 -> l4, exit after l2
    const NetworkSpec net = testutil::skip_network(4, 1, 3, {1});
    const DesignPoint d = DesignPoint::make({1}, "0.5");
    const SdfGraph g = build_graph(net, d);
    Eigen::VectorXd marginals(1);
    marginals << 0.4;
    const TopologyMatrix topo =
        build_matrices(g, ExitRateVector::from_marginals(g, marginals));
    const Eigen::VectorXd q = propagate_rates(topo);
    CHECK(q(0) == 1.0);
    CHECK(q(1) == 1.0);
    CHECK(q(2) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(q(3) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(q(4) == 1.0);  // head after l2 sees everything
    CHECK(topo.residual_inf_norm(q) <= 1e-9);
}

TEST_CASE("malformed rates are rejected at the join") {
    // hand-built diamond where the two incoming edges disagree
    std::vector<TopologyMatrix::EdgeEntry> entries = {
        {0, 1, 1.0, 1.0, false, true},  // a -> b
        {0, 2, 1.0, 1.0, false, true},  // a -> c
        {1, 3, 0.5, 1.0, false, true},  // b -> d at half rate
        {2, 3, 1.0, 1.0, false, true},  // c -> d at full rate
    };
    DesignPoint d;
    const TopologyMatrix topo({"a", "b", "c", "d"}, std::move(entries), 4, 0, d);
    CHECK_THROWS_WITH_AS(propagate_rates(topo), doctest::Contains("disagreeing"),
                         std::runtime_error);
}

TEST_CASE("rate vector properties on random chain designs") {
    Rng rng(2024);
    const ThresholdGrid grid = ThresholdGrid::default_grid();
    for (int trial = 0; trial < 50; ++trial) {
        const NetworkSpec net = testutil::random_network(rng);
        const CalibrationTrace trace = testutil::random_trace(rng, net, 64);
        const DesignPoint d = testutil::random_design(rng, net, grid);
        const EvalResult er = evaluate(net, trace, d);
        const SdfGraph g = build_graph(net, d);
        Eigen::VectorXd marginals(net.exit_count());
        for (int k = 0; k < net.exit_count(); ++k) marginals(k) = er.exit_rates[k];
        const TopologyMatrix topo = build_matrices(
            g, ExitRateVector::from_marginals(g, marginals, er.final_fraction));
        const Eigen::VectorXd q = propagate_rates(topo);

        CHECK(topo.residual_inf_norm(q) <= 1e-9);
        CHECK(q(0) == 1.0);
        for (int v = 0; v < net.node_count(); ++v) {
            CHECK(q(v) >= 0.0);
            CHECK(q(v) <= 1.0);
        }
        // samples only leave along the backbone
        for (int v = 0; v + 1 < net.backbone_count(); ++v) CHECK(q(v + 1) <= q(v) + 1e-15);

        // re-partitioning the dense matrix is lossless
        const Eigen::MatrixXd gamma = topo.dense_gamma();
        const int be = topo.backbone_edge_count();
        const int nb = net.backbone_count();
        const int n = net.exit_count();
        Eigen::MatrixXd rebuilt(gamma.rows(), gamma.cols());
        rebuilt.topLeftCorner(be, nb) = gamma.topLeftCorner(be, nb);
        rebuilt.topRightCorner(be, n) = Eigen::MatrixXd::Zero(be, n);
        rebuilt.bottomRows(n) = gamma.bottomRows(n);
        CHECK(rebuilt == gamma);
    }
}
