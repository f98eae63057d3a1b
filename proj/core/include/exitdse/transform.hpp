#pragma once

#include <string>
#include <vector>

#include "exitdse/calibration.hpp"
#include "exitdse/design.hpp"
#include "exitdse/network.hpp"
#include "exitdse/sdf.hpp"

namespace exitdse {

// The two tunings that span the search space: repositioning the set of
// instantiated exits, and moving the shared confidence threshold.
struct Transformation {
    enum class Kind { ExitRepos, ConfTune };
    Kind kind;
    std::vector<std::uint8_t> p_exit;  // ExitRepos
    int n_exit = 0;                    // ExitRepos, must equal popcount(p_exit)
    double c_thr = 0.0;                // ConfTune
    std::string c_thr_label;

    static Transformation exitrepos(std::vector<std::uint8_t> p);
    static Transformation conftune(const ThresholdGrid& grid, int idx);
};

// Applies transformations directly on the topology matrix: exitrepos zeroes
// the connectivity rows of deselected exits and leaves the backbone block
// untouched; both variants refresh the rates block from the memoised trace,
// since any change to the exit set or threshold shifts the exit dynamics.
class TransformEngine {
public:
    TransformEngine(const NetworkSpec& net, const CalibrationTrace& trace, ThresholdGrid grid,
                    bool adjacency_prior = true);

    const ThresholdGrid& grid() const { return grid_; }
    bool adjacency_prior() const { return prior_; }

    // marginal exit rates of a design, from the memoised trace
    ExitRateVector rates_for(const DesignPoint& design) const;
    // from-scratch construction for a design tuple
    TopologyMatrix build(const DesignPoint& design) const;
    TopologyMatrix apply(const TopologyMatrix& topo, const Transformation& t) const;

    // no pair of instantiated exits at adjacent candidate positions
    bool respects_prior(const std::vector<std::uint8_t>& p) const;

    // all designs one transformation step away: single bit flips of p_exit
    // (respecting the prior when enabled) and one-step threshold moves
    std::vector<DesignPoint> neighbours(const DesignPoint& design) const;

private:
    const NetworkSpec& net_;
    const CalibrationTrace& trace_;
    ThresholdGrid grid_;
    bool prior_;
};

}  // namespace exitdse
