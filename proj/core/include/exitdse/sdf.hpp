#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exitdse/design.hpp"
#include "exitdse/network.hpp"

namespace exitdse {

enum class NodeKind { Backbone, FinalClassifier, Exit };

struct SdfNode {
    std::string id;
    NodeKind kind;
};

// Edges keep a slot for every candidate exit; a deselected exit stays in the
// node/edge indexing with its connectivity row zeroed.
struct SdfEdge {
    int producer;
    int consumer;
    bool exit_edge;
    bool live;
};

struct SdfGraph {
    std::vector<SdfNode> nodes;
    std::vector<SdfEdge> edges;  // backbone edges first, then one per candidate exit
    int n_backbone = 0;
    int n_exits = 0;
    int backbone_edge_count() const { return static_cast<int>(edges.size()) - n_exits; }
    // backbone index each candidate exit attaches after
    std::vector<int> attach;
};

SdfGraph build_graph(const NetworkSpec& net, const DesignPoint& design);

// Marginal exit fractions plus their projection onto backbone positions.
// final_fraction is the mass reaching the terminal classifier (run-to-the-end
// samples, fallback included); carrying it explicitly lets survival values be
// formed as tail sums, which keeps rate propagation bit-aligned with the
// per-sample simulator.
struct ExitRateVector {
    Eigen::VectorXd r_exit;   // length N, 0 at deselected exits
    Eigen::VectorXd r_layer;  // length N_b
    double final_fraction = 0.0;

    static ExitRateVector from_marginals(const SdfGraph& graph, const Eigen::VectorXd& r_exit,
                                         double final_fraction = -1.0);
};

// Edge-by-node topology matrix in the Hadamard decomposition gamma = C (*) R.
// Every row has at most one producer and one consumer entry, so storage is
// per-edge records; dense views are materialised on demand.
class TopologyMatrix {
public:
    struct EdgeEntry {
        int producer;
        int consumer;
        double prod_rate;  // R at the producer position
        double cons_rate;  // R at the consumer position, 1 on live rows
        bool exit_edge;
        bool live;  // false => connectivity row is zero
    };

    TopologyMatrix(std::vector<std::string> node_ids, std::vector<EdgeEntry> entries,
                   int n_backbone, int n_exits, DesignPoint design);

    int edge_count() const { return static_cast<int>(entries_.size()); }
    int node_count() const { return static_cast<int>(node_ids_.size()); }
    int backbone_count() const { return n_backbone_; }
    int exit_count() const { return n_exits_; }
    int backbone_edge_count() const { return edge_count() - n_exits_; }

    const std::vector<EdgeEntry>& entries() const { return entries_; }
    const std::vector<std::string>& node_ids() const { return node_ids_; }
    const DesignPoint& design() const { return design_; }
    // same matrices, reassociated with a full design tuple
    TopologyMatrix with_design(DesignPoint design) const;

    double c(int e, int v) const;
    double r(int e, int v) const;
    double gamma(int e, int v) const { return c(e, v) * r(e, v); }

    Eigen::MatrixXd dense_c() const;
    Eigen::MatrixXd dense_r() const;
    Eigen::MatrixXd dense_gamma() const;

    // max over edges of |sum_v gamma(e,v) * q(v)|
    double residual_inf_norm(const Eigen::VectorXd& q) const;

private:
    std::vector<std::string> node_ids_;
    std::vector<EdgeEntry> entries_;
    int n_backbone_;
    int n_exits_;
    DesignPoint design_;
};

TopologyMatrix build_matrices(const SdfGraph& graph, const ExitRateVector& rates);

// Per-node execution probabilities: q(source) = 1, forward propagation in
// topological order, deselected exits pinned to 0. Verifies the balance
// contract ||gamma q||_inf <= 1e-9 and that DAG joins receive agreeing rates.
Eigen::VectorXd propagate_rates(const TopologyMatrix& topo);

using RateVector = Eigen::VectorXd;

// gamma.csv / c.csv / r.csv (header row of node ids) and q.csv (single column)
void export_sdf_csv(const TopologyMatrix& topo, const Eigen::VectorXd& q,
                    const std::filesystem::path& out_dir, const std::string& comment = "");

}  // namespace exitdse
