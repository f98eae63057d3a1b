#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "exitdse/design.hpp"
#include "exitdse/network.hpp"

namespace exitdse {

// Per-sample, per-classifier records of the calibration set: top-1 confidence
// and whether the classifier was right. Classifier order is candidate exits in
// network declaration order, final classifier last. One pass over the
// overprovisioned network produces this once; afterwards any design is scored
// by lookup.
class CalibrationTrace {
public:
    CalibrationTrace(std::vector<double> conf, std::vector<std::uint8_t> correct,
                     int sample_count, int classifier_count);

    static CalibrationTrace load(const std::filesystem::path& path);
    void store(const std::filesystem::path& path, const std::string& comment = "") const;

    int sample_count() const { return samples_; }
    int classifier_count() const { return classifiers_; }
    double conf(int s, int c) const { return conf_[static_cast<std::size_t>(s) * classifiers_ + c]; }
    bool correct(int s, int c) const {
        return correct_[static_cast<std::size_t>(s) * classifiers_ + c] != 0;
    }
    // column mean of the correct flags: the classifier's accuracy when every
    // sample is forced to stop there
    double standalone_accuracy(int c) const;

private:
    std::vector<double> conf_;
    std::vector<std::uint8_t> correct_;
    int samples_;
    int classifiers_;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> exit_rates;  // length N, marginal stop fraction per candidate
    double final_fraction = 0.0;     // terminal-classifier stops, fallback included
    double fallback_fraction = 0.0;  // resolved by the max-confidence rule
};

// Applies the exit policy to every sample by lookup: scan instantiated exits
// in network order, stop at the first with conf >= c_thr (the final classifier
// is the last scanned); if none passes, the prediction comes from the most
// confident classifier (earliest position wins ties) while the whole network
// is charged for rate and latency purposes.
EvalResult evaluate(const NetworkSpec& net, const CalibrationTrace& trace,
                    const DesignPoint& design);

// Storage mode B: thresholded pass/correct bitmaps over the N candidate exits,
// 2 * |D| * N * N_conf single-bit elements.
class ThresholdBitmaps {
public:
    ThresholdBitmaps(const CalibrationTrace& trace, const NetworkSpec& net,
                     const ThresholdGrid& grid);

    std::size_t element_count() const;
    std::size_t byte_size() const;
    bool pass(int s, int exit_k, int thr_idx) const;
    bool correct_bit(int s, int exit_k, int thr_idx) const;

    static std::size_t element_count_for(std::size_t samples, std::size_t exits,
                                         std::size_t thresholds) {
        return 2 * samples * exits * thresholds;
    }

private:
    std::size_t bit_index(int s, int exit_k, int thr_idx) const;
    std::vector<std::uint64_t> pass_bits_;
    std::vector<std::uint64_t> correct_bits_;
    int samples_;
    int exits_;
    int thresholds_;
};

}  // namespace exitdse
