#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exitdse/network.hpp"

namespace exitdse {

// Candidate confidence thresholds, ascending. Each value keeps the decimal
// label it was configured with so designs round-trip through JSON without
// float drift.
class ThresholdGrid {
public:
    explicit ThresholdGrid(std::vector<std::string> labels);
    static ThresholdGrid default_grid();  // {0.4, 0.6, 0.8}
    static ThresholdGrid parse(const std::string& comma_separated);

    int size() const { return static_cast<int>(values_.size()); }
    double value(int i) const { return values_[i]; }
    const std::string& label(int i) const { return labels_[i]; }
    int index_of(double v) const;  // exact match, -1 if absent

private:
    std::vector<std::string> labels_;
    std::vector<double> values_;
};

// One point of the search space: which candidate exits are instantiated and
// the shared confidence threshold.
struct DesignPoint {
    std::vector<std::uint8_t> p_exit;  // length N, 1 = exit instantiated
    double c_thr = 0.0;
    std::string c_thr_label;  // canonical decimal text of c_thr

    int n_exit() const;
    std::string bits() const;  // e.g. "0101"
    // stable identity used for caches, visited sets and tie-breaking
    std::string key() const { return bits() + "@" + c_thr_label; }
    bool operator==(const DesignPoint& other) const {
        return p_exit == other.p_exit && c_thr == other.c_thr;
    }

    static DesignPoint make(std::vector<std::uint8_t> p, const std::string& thr_label);
    static DesignPoint from_grid(std::vector<std::uint8_t> p, const ThresholdGrid& grid, int idx);

    std::string to_json_text(const std::string& network_name) const;
    // network_name: expected binding; pass empty to skip the check
    static DesignPoint load(const std::filesystem::path& path, const std::string& network_name);
    void store(const std::filesystem::path& path, const std::string& network_name) const;
};

// Size of the search space: N_conf * 2^N - 1. Used to guard brute-force runs.
std::size_t enumerate_designs(const NetworkSpec& net, const ThresholdGrid& grid);

}  // namespace exitdse
