#include "exitdse/calibration.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "exitdse/csv.hpp"

namespace exitdse {

CalibrationTrace::CalibrationTrace(std::vector<double> conf, std::vector<std::uint8_t> correct,
                                   int sample_count, int classifier_count)
    : conf_(std::move(conf)),
      correct_(std::move(correct)),
      samples_(sample_count),
      classifiers_(classifier_count) {
    if (samples_ <= 0) throw std::runtime_error("trace: sample count must be positive");
    if (classifiers_ <= 0) throw std::runtime_error("trace: classifier count must be positive");
    const auto expected = static_cast<std::size_t>(samples_) * classifiers_;
    if (conf_.size() != expected || correct_.size() != expected)
        throw std::runtime_error("trace: matrix shape mismatch");
    for (double v : conf_)
        if (v < 0.0 || v > 1.0)
            throw std::runtime_error("trace.conf: value out of [0,1]: " + format_g9(v));
}

double CalibrationTrace::standalone_accuracy(int c) const {
    long hits = 0;
    for (int s = 0; s < samples_; ++s) hits += correct(s, c) ? 1 : 0;
    return static_cast<double>(hits) / samples_;
}

CalibrationTrace CalibrationTrace::load(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "sample_id")
        throw std::runtime_error(path.string() + ": trace: header must start with sample_id");
    if ((table.header.size() - 1) % 2 != 0)
        throw std::runtime_error(path.string() + ": trace: expected conf/correct column pairs");
    const int classifiers = static_cast<int>((table.header.size() - 1) / 2);
    if (classifiers < 1)
        throw std::runtime_error(path.string() + ": trace: no classifier columns");
    if (table.rows.empty()) throw std::runtime_error(path.string() + ": trace: no samples");

    std::vector<double> conf;
    std::vector<std::uint8_t> correct;
    conf.reserve(table.rows.size() * classifiers);
    correct.reserve(table.rows.size() * classifiers);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw std::runtime_error(path.string() + ": trace: malformed row " +
                                     std::to_string(r + 1));
        for (int c = 0; c < classifiers; ++c) {
            const double v = parse_double(row[1 + 2 * c], "trace.conf");
            if (v < 0.0 || v > 1.0)
                throw std::runtime_error(path.string() + ": trace.conf: out of [0,1] in row " +
                                         std::to_string(r + 1));
            conf.push_back(v);
            const long long flag = parse_int(row[2 + 2 * c], "trace.correct");
            if (flag != 0 && flag != 1)
                throw std::runtime_error(path.string() + ": trace.correct: expected 0/1 in row " +
                                         std::to_string(r + 1));
            correct.push_back(static_cast<std::uint8_t>(flag));
        }
    }
    return CalibrationTrace(std::move(conf), std::move(correct),
                            static_cast<int>(table.rows.size()), classifiers);
}

void CalibrationTrace::store(const std::filesystem::path& path,
                             const std::string& comment) const {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "sample_id";
    for (int c = 1; c <= classifiers_; ++c)
        out << ",conf_" << c << ",correct_" << c;
    out << "\n";
    for (int s = 0; s < samples_; ++s) {
        out << s;
        for (int c = 0; c < classifiers_; ++c)
            out << "," << format_conf6(conf(s, c)) << "," << (correct(s, c) ? 1 : 0);
        out << "\n";
    }
    write_text_file(path, out.str());
}

EvalResult evaluate(const NetworkSpec& net, const CalibrationTrace& trace,
                    const DesignPoint& design) {
    const int n = net.exit_count();
    if (trace.classifier_count() != n + 1)
        throw std::runtime_error("evaluate: trace has " +
                                 std::to_string(trace.classifier_count()) +
                                 " classifiers, network expects " + std::to_string(n + 1));
    if (static_cast<int>(design.p_exit.size()) != n)
        throw std::runtime_error("evaluate: design.p_exit length mismatch");
    if (design.c_thr < 0.0 || design.c_thr > 1.0)
        throw std::runtime_error("evaluate: c_thr out of [0,1]");

    std::vector<int> scan;  // instantiated exits, shallowest first
    for (int k : net.exits_by_depth())
        if (design.p_exit[k]) scan.push_back(k);
    const int final_col = n;
    const double thr = design.c_thr;

    const int samples = trace.sample_count();
    std::vector<long> stop_count(n, 0);
    long final_count = 0, fallback_count = 0, correct_count = 0;
    for (int s = 0; s < samples; ++s) {
        int stopped_at = -1;
        for (int k : scan) {
            if (trace.conf(s, k) >= thr) {
                stopped_at = k;
                break;
            }
        }
        if (stopped_at >= 0) {
            ++stop_count[stopped_at];
            correct_count += trace.correct(s, stopped_at) ? 1 : 0;
            continue;
        }
        ++final_count;
        if (trace.conf(s, final_col) >= thr) {
            correct_count += trace.correct(s, final_col) ? 1 : 0;
            continue;
        }
        // fallback: most confident instantiated classifier, earliest wins ties
        ++fallback_count;
        double best = trace.conf(s, final_col);
        for (int k : scan) best = std::max(best, trace.conf(s, k));
        int chosen = final_col;
        for (int k : scan) {
            if (trace.conf(s, k) == best) {
                chosen = k;
                break;
            }
        }
        correct_count += trace.correct(s, chosen) ? 1 : 0;
    }

    EvalResult result;
    result.accuracy = static_cast<double>(correct_count) / samples;
    result.exit_rates.resize(n, 0.0);
    for (int k = 0; k < n; ++k)
        result.exit_rates[k] = static_cast<double>(stop_count[k]) / samples;
    result.final_fraction = static_cast<double>(final_count) / samples;
    result.fallback_fraction = static_cast<double>(fallback_count) / samples;
    return result;
}

ThresholdBitmaps::ThresholdBitmaps(const CalibrationTrace& trace, const NetworkSpec& net,
                                   const ThresholdGrid& grid)
    : samples_(trace.sample_count()), exits_(net.exit_count()), thresholds_(grid.size()) {
    if (trace.classifier_count() != exits_ + 1)
        throw std::runtime_error("bitmaps: trace/network classifier count mismatch");
    const std::size_t bits =
        static_cast<std::size_t>(samples_) * exits_ * thresholds_;
    pass_bits_.assign((bits + 63) / 64, 0);
    correct_bits_.assign((bits + 63) / 64, 0);
    for (int s = 0; s < samples_; ++s) {
        for (int k = 0; k < exits_; ++k) {
            for (int t = 0; t < thresholds_; ++t) {
                const std::size_t idx = bit_index(s, k, t);
                if (trace.conf(s, k) >= grid.value(t))
                    pass_bits_[idx / 64] |= std::uint64_t{1} << (idx % 64);
                if (trace.correct(s, k))
                    correct_bits_[idx / 64] |= std::uint64_t{1} << (idx % 64);
            }
        }
    }
}

std::size_t ThresholdBitmaps::bit_index(int s, int exit_k, int thr_idx) const {
    return (static_cast<std::size_t>(s) * exits_ + exit_k) * thresholds_ + thr_idx;
}

std::size_t ThresholdBitmaps::element_count() const {
    return element_count_for(samples_, exits_, thresholds_);
}

std::size_t ThresholdBitmaps::byte_size() const {
    return (pass_bits_.size() + correct_bits_.size()) * sizeof(std::uint64_t);
}

bool ThresholdBitmaps::pass(int s, int exit_k, int thr_idx) const {
    const std::size_t idx = bit_index(s, exit_k, thr_idx);
    return (pass_bits_[idx / 64] >> (idx % 64)) & 1;
}

bool ThresholdBitmaps::correct_bit(int s, int exit_k, int thr_idx) const {
    const std::size_t idx = bit_index(s, exit_k, thr_idx);
    return (correct_bits_[idx / 64] >> (idx % 64)) & 1;
}

}  // namespace exitdse
