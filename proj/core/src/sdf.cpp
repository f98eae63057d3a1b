#include "exitdse/sdf.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exitdse/csv.hpp"

namespace exitdse {

namespace {
constexpr double kBalanceTol = 1e-9;
constexpr double kRateSumTol = 1e-9;
}  // namespace

SdfGraph build_graph(const NetworkSpec& net, const DesignPoint& design) {
    if (static_cast<int>(design.p_exit.size()) != net.exit_count())
        throw std::runtime_error("design.p_exit: length " +
                                 std::to_string(design.p_exit.size()) + " does not match " +
                                 std::to_string(net.exit_count()) + " candidate exits");
    SdfGraph g;
    g.n_backbone = net.backbone_count();
    g.n_exits = net.exit_count();
    for (int i = 0; i < net.backbone_count(); ++i) {
        g.nodes.push_back({net.backbone()[i].id,
                           i == net.terminal_index() ? NodeKind::FinalClassifier
                                                     : NodeKind::Backbone});
    }
    for (const auto& e : net.exits()) g.nodes.push_back({e.id, NodeKind::Exit});

    // backbone edges: consumers in declaration order, preds in declared order
    for (int v = 0; v < net.backbone_count(); ++v)
        for (int u : net.backbone_preds()[v]) g.edges.push_back({u, v, false, true});
    // one edge slot per candidate exit, in declaration order
    for (int k = 0; k < net.exit_count(); ++k) {
        g.attach.push_back(net.attach_index(k));
        g.edges.push_back({net.attach_index(k), net.backbone_count() + k, true,
                           design.p_exit[k] != 0});
    }
    return g;
}

ExitRateVector ExitRateVector::from_marginals(const SdfGraph& graph,
                                              const Eigen::VectorXd& r_exit,
                                              double final_fraction) {
    if (r_exit.size() != graph.n_exits)
        throw std::runtime_error("exit_rates: expected " + std::to_string(graph.n_exits) +
                                 " entries, got " + std::to_string(r_exit.size()));
    ExitRateVector rv;
    rv.r_exit = r_exit;
    rv.r_layer = Eigen::VectorXd::Zero(graph.n_backbone);
    double sum = 0.0;
    for (int k = 0; k < graph.n_exits; ++k) {
        const double f = r_exit(k);
        if (f < 0.0 || f > 1.0)
            throw std::runtime_error("exit_rates: entry out of [0,1]");
        const auto& edge = graph.edges[graph.backbone_edge_count() + k];
        if (!edge.live && f != 0.0)
            throw std::runtime_error("exit_rates: nonzero rate at deselected exit " +
                                     std::to_string(k));
        rv.r_layer(graph.attach[k]) += f;
        sum += f;
    }
    if (sum > 1.0 + kRateSumTol)
        throw std::runtime_error("exit_rates: marginals sum to " + std::to_string(sum) +
                                 " > 1");
    rv.final_fraction = final_fraction >= 0.0 ? final_fraction : 1.0 - sum;
    return rv;
}

TopologyMatrix::TopologyMatrix(std::vector<std::string> node_ids,
                               std::vector<EdgeEntry> entries, int n_backbone, int n_exits,
                               DesignPoint design)
    : node_ids_(std::move(node_ids)),
      entries_(std::move(entries)),
      n_backbone_(n_backbone),
      n_exits_(n_exits),
      design_(std::move(design)) {}

TopologyMatrix TopologyMatrix::with_design(DesignPoint design) const {
    return TopologyMatrix(node_ids_, entries_, n_backbone_, n_exits_, std::move(design));
}

double TopologyMatrix::c(int e, int v) const {
    const auto& entry = entries_[e];
    if (!entry.live) return 0.0;
    if (v == entry.producer) return 1.0;
    if (v == entry.consumer) return -1.0;
    return 0.0;
}

double TopologyMatrix::r(int e, int v) const {
    const auto& entry = entries_[e];
    if (v == entry.producer) return entry.prod_rate;
    if (v == entry.consumer) return entry.cons_rate;
    return 0.0;
}

Eigen::MatrixXd TopologyMatrix::dense_c() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(edge_count(), node_count());
    for (int e = 0; e < edge_count(); ++e) {
        if (!entries_[e].live) continue;
        m(e, entries_[e].producer) = 1.0;
        m(e, entries_[e].consumer) = -1.0;
    }
    return m;
}

Eigen::MatrixXd TopologyMatrix::dense_r() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(edge_count(), node_count());
    for (int e = 0; e < edge_count(); ++e) {
        m(e, entries_[e].producer) = entries_[e].prod_rate;
        m(e, entries_[e].consumer) = entries_[e].cons_rate;
    }
    return m;
}

Eigen::MatrixXd TopologyMatrix::dense_gamma() const {
    return dense_c().cwiseProduct(dense_r());
}

double TopologyMatrix::residual_inf_norm(const Eigen::VectorXd& q) const {
    double worst = 0.0;
    for (const auto& e : entries_) {
        if (!e.live) continue;
        const double balance = e.prod_rate * q(e.producer) - e.cons_rate * q(e.consumer);
        worst = std::max(worst, std::abs(balance));
    }
    return worst;
}

TopologyMatrix build_matrices(const SdfGraph& graph, const ExitRateVector& rates) {
    const int nb = graph.n_backbone;
    if (rates.r_layer.size() != nb)
        throw std::runtime_error("exit_rates: r_layer length mismatch");

    // survive(j) = fraction of samples whose stop position is at backbone
    // index >= j, accumulated as a tail sum so no cancellation occurs
    Eigen::VectorXd survive(nb);
    survive(nb - 1) = rates.final_fraction + rates.r_layer(nb - 1);
    for (int j = nb - 2; j >= 0; --j) survive(j) = survive(j + 1) + rates.r_layer(j);

    std::vector<TopologyMatrix::EdgeEntry> entries;
    entries.reserve(graph.edges.size());
    for (const auto& e : graph.edges) {
        TopologyMatrix::EdgeEntry entry{e.producer, e.consumer, 1.0, 1.0, e.exit_edge, e.live};
        if (!e.exit_edge) {
            // production rate: fraction of the producer's executions that put a
            // token on this edge, i.e. the survival ratio across the positions
            // the edge spans
            entry.prod_rate =
                survive(e.producer) > 0.0 ? survive(e.consumer) / survive(e.producer) : 0.0;
        }
        entries.push_back(entry);
    }

    std::vector<std::string> ids;
    ids.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) ids.push_back(n.id);

    DesignPoint design;
    design.p_exit.resize(graph.n_exits);
    for (int k = 0; k < graph.n_exits; ++k)
        design.p_exit[k] = graph.edges[graph.backbone_edge_count() + k].live ? 1 : 0;
    return TopologyMatrix(std::move(ids), std::move(entries), graph.n_backbone, graph.n_exits,
                          std::move(design));
}

Eigen::VectorXd propagate_rates(const TopologyMatrix& topo) {
    const int nv = topo.node_count();
    const int nb = topo.backbone_count();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);
    std::vector<bool> set(nv, false);
    q(0) = 1.0;  // single source by graph construction
    set[0] = true;

    // node index order is topological for the backbone; exit slots follow
    for (const auto& e : topo.entries()) {
        if (e.exit_edge) continue;
        if (!set[e.producer])
            throw std::runtime_error("propagate: edge producer " +
                                     topo.node_ids()[e.producer] + " has no rate yet");
        const double incoming = e.prod_rate * q(e.producer);
        if (!set[e.consumer]) {
            q(e.consumer) = incoming;
            set[e.consumer] = true;
        } else if (std::abs(q(e.consumer) - incoming) > kBalanceTol) {
            throw std::runtime_error("propagate: join at " + topo.node_ids()[e.consumer] +
                                     " receives disagreeing rates (" +
                                     format_g9(q(e.consumer)) + " vs " + format_g9(incoming) +
                                     ")");
        }
    }
    for (int v = 1; v < nb; ++v)
        if (!set[v])
            throw std::runtime_error("propagate: backbone node " + topo.node_ids()[v] +
                                     " is unreachable");

    // instantiated exit heads run whenever their attach node runs; deselected
    // exits have a zero column, so their physically meaningful rate is 0
    for (const auto& e : topo.entries()) {
        if (!e.exit_edge) continue;
        q(e.consumer) = e.live ? e.prod_rate * q(e.producer) : 0.0;
    }

    const double residual = topo.residual_inf_norm(q);
    if (residual > kBalanceTol)
        throw std::runtime_error("propagate: balance residual " + format_g9(residual) +
                                 " exceeds 1e-9");
    return q;
}

static std::string matrix_csv(const TopologyMatrix& topo, const Eigen::MatrixXd& m,
                              const std::string& comment) {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    for (int v = 0; v < topo.node_count(); ++v)
        out << (v ? "," : "") << topo.node_ids()[v];
    out << "\n";
    for (int e = 0; e < m.rows(); ++e) {
        for (int v = 0; v < m.cols(); ++v) out << (v ? "," : "") << format_g9(m(e, v));
        out << "\n";
    }
    return out.str();
}

void export_sdf_csv(const TopologyMatrix& topo, const Eigen::VectorXd& q,
                    const std::filesystem::path& out_dir, const std::string& comment) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "gamma.csv", matrix_csv(topo, topo.dense_gamma(), comment));
    write_text_file(out_dir / "c.csv", matrix_csv(topo, topo.dense_c(), comment));
    write_text_file(out_dir / "r.csv", matrix_csv(topo, topo.dense_r(), comment));
    std::ostringstream qs;
    if (!comment.empty()) qs << "# " << comment << "\n";
    for (int v = 0; v < q.size(); ++v) qs << format_g9(q(v)) << "\n";
    write_text_file(out_dir / "q.csv", qs.str());
}

}  // namespace exitdse
