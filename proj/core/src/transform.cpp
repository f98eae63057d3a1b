#include "exitdse/transform.hpp"

#include <stdexcept>

namespace exitdse {

Transformation Transformation::exitrepos(std::vector<std::uint8_t> p) {
    Transformation t;
    t.kind = Kind::ExitRepos;
    t.p_exit = std::move(p);
    for (auto b : t.p_exit) t.n_exit += b ? 1 : 0;
    return t;
}

Transformation Transformation::conftune(const ThresholdGrid& grid, int idx) {
    Transformation t;
    t.kind = Kind::ConfTune;
    t.c_thr = grid.value(idx);
    t.c_thr_label = grid.label(idx);
    return t;
}

TransformEngine::TransformEngine(const NetworkSpec& net, const CalibrationTrace& trace,
                                 ThresholdGrid grid, bool adjacency_prior)
    : net_(net), trace_(trace), grid_(std::move(grid)), prior_(adjacency_prior) {
    if (trace.classifier_count() != net.exit_count() + 1)
        throw std::runtime_error("transform: trace bound to a different network shape");
}

bool TransformEngine::respects_prior(const std::vector<std::uint8_t>& p) const {
    for (std::size_t k = 0; k + 1 < p.size(); ++k)
        if (p[k] && p[k + 1]) return false;
    return true;
}

ExitRateVector TransformEngine::rates_for(const DesignPoint& design) const {
    const EvalResult er = evaluate(net_, trace_, design);
    const SdfGraph g = build_graph(net_, design);
    Eigen::VectorXd r(net_.exit_count());
    for (int k = 0; k < net_.exit_count(); ++k) r(k) = er.exit_rates[k];
    return ExitRateVector::from_marginals(g, r, er.final_fraction);
}

TopologyMatrix TransformEngine::build(const DesignPoint& design) const {
    // build_matrices derives liveness from the graph; reattach the full tuple
    return build_matrices(build_graph(net_, design), rates_for(design)).with_design(design);
}

TopologyMatrix TransformEngine::apply(const TopologyMatrix& topo,
                                      const Transformation& t) const {
    DesignPoint next = topo.design();
    if (t.kind == Transformation::Kind::ExitRepos) {
        if (static_cast<int>(t.p_exit.size()) != net_.exit_count())
            throw std::runtime_error("exitrepos: positioning vector length mismatch");
        int pop = 0;
        for (auto b : t.p_exit) pop += b ? 1 : 0;
        if (pop != t.n_exit)
            throw std::runtime_error("exitrepos: n_exit does not match popcount(p_exit)");
        if (prior_ && !respects_prior(t.p_exit))
            throw std::runtime_error("exitrepos: adjacent exits violate the active prior");
        next.p_exit = t.p_exit;
    } else {
        if (grid_.index_of(t.c_thr) < 0)
            throw std::runtime_error("conftune: threshold " + t.c_thr_label +
                                     " is not on the configured grid");
        next.c_thr = t.c_thr;
        next.c_thr_label = t.c_thr_label;
    }

    const ExitRateVector rates = rates_for(next);
    std::vector<TopologyMatrix::EdgeEntry> entries = topo.entries();
    const int nb = topo.backbone_count();

    // survival tail, as in the from-scratch construction
    Eigen::VectorXd survive(nb);
    survive(nb - 1) = rates.final_fraction + rates.r_layer(nb - 1);
    for (int j = nb - 2; j >= 0; --j) survive(j) = survive(j + 1) + rates.r_layer(j);

    for (int e = 0; e < static_cast<int>(entries.size()); ++e) {
        auto& entry = entries[e];
        if (entry.exit_edge) {
            // E_sel diag(p_exit) selection: only connectivity changes, the
            // rates block of exit rows is static
            const int k = e - topo.backbone_edge_count();
            entry.live = next.p_exit[k] != 0;
        } else {
            entry.prod_rate = survive(entry.producer) > 0.0
                               ? survive(entry.consumer) / survive(entry.producer)
                               : 0.0;
        }
    }
    return TopologyMatrix(topo.node_ids(), std::move(entries), nb, topo.exit_count(),
                          std::move(next));
}

std::vector<DesignPoint> TransformEngine::neighbours(const DesignPoint& design) const {
    const int n = net_.exit_count();
    if (static_cast<int>(design.p_exit.size()) != n)
        throw std::runtime_error("neighbours: design bound to a different network shape");
    std::vector<DesignPoint> out;

    for (int k = 0; k < n; ++k) {
        std::vector<std::uint8_t> p = design.p_exit;
        p[k] = p[k] ? 0 : 1;
        if (p[k] && prior_) {
            const bool adjacent = (k > 0 && p[k - 1]) || (k + 1 < n && p[k + 1]);
            if (adjacent) continue;
        }
        DesignPoint d = design;
        d.p_exit = std::move(p);
        out.push_back(std::move(d));
    }

    const int idx = grid_.index_of(design.c_thr);
    if (idx < 0)
        throw std::runtime_error("neighbours: design threshold " + design.c_thr_label +
                                 " is not on the configured grid");
    for (int step : {-1, +1}) {
        const int j = idx + step;
        if (j < 0 || j >= grid_.size()) continue;
        DesignPoint d = design;
        d.c_thr = grid_.value(j);
        d.c_thr_label = grid_.label(j);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace exitdse
