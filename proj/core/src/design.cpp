#include "exitdse/design.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "exitdse/csv.hpp"

namespace exitdse {

using nlohmann::json;

ThresholdGrid::ThresholdGrid(std::vector<std::string> labels) {
    if (labels.empty()) throw std::runtime_error("threshold grid: must not be empty");
    std::vector<std::pair<double, std::string>> entries;
    for (auto& label : labels) {
        const double v = parse_double(label, "threshold grid");
        if (v < 0.0 || v > 1.0)
            throw std::runtime_error("threshold grid: value out of [0,1]: " + label);
        entries.emplace_back(v, std::move(label));
    }
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i + 1 < entries.size(); ++i)
        if (entries[i].first == entries[i + 1].first)
            throw std::runtime_error("threshold grid: duplicate value " + entries[i].second);
    for (auto& [v, label] : entries) {
        values_.push_back(v);
        labels_.push_back(std::move(label));
    }
}

ThresholdGrid ThresholdGrid::default_grid() { return ThresholdGrid({"0.4", "0.6", "0.8"}); }

ThresholdGrid ThresholdGrid::parse(const std::string& comma_separated) {
    std::vector<std::string> labels;
    std::string cur;
    for (char c : comma_separated) {
        if (c == ',') {
            labels.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) labels.push_back(cur);
    return ThresholdGrid(std::move(labels));
}

int ThresholdGrid::index_of(double v) const {
    for (int i = 0; i < size(); ++i)
        if (values_[i] == v) return i;
    return -1;
}

int DesignPoint::n_exit() const {
    int n = 0;
    for (auto b : p_exit) n += b ? 1 : 0;
    return n;
}

std::string DesignPoint::bits() const {
    std::string s(p_exit.size(), '0');
    for (std::size_t i = 0; i < p_exit.size(); ++i)
        if (p_exit[i]) s[i] = '1';
    return s;
}

DesignPoint DesignPoint::make(std::vector<std::uint8_t> p, const std::string& thr_label) {
    DesignPoint d;
    d.p_exit = std::move(p);
    d.c_thr_label = thr_label;
    d.c_thr = parse_double(thr_label, "design.c_thr");
    if (d.c_thr < 0.0 || d.c_thr > 1.0)
        throw std::runtime_error("design.c_thr: out of [0,1]: " + thr_label);
    return d;
}

DesignPoint DesignPoint::from_grid(std::vector<std::uint8_t> p, const ThresholdGrid& grid,
                                   int idx) {
    DesignPoint d;
    d.p_exit = std::move(p);
    d.c_thr = grid.value(idx);
    d.c_thr_label = grid.label(idx);
    return d;
}

std::string DesignPoint::to_json_text(const std::string& network_name) const {
    json j;
    j["p_exit"] = json::array();
    for (auto b : p_exit) j["p_exit"].push_back(b ? 1 : 0);
    j["c_thr"] = c_thr_label;
    j["network"] = network_name;
    return j.dump(2) + "\n";
}

DesignPoint DesignPoint::load(const std::filesystem::path& path,
                              const std::string& network_name) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": design: invalid JSON: " + e.what());
    }
    if (!j.contains("p_exit") || !j.contains("c_thr"))
        throw std::runtime_error(path.string() + ": design: expected fields p_exit, c_thr");
    std::vector<std::uint8_t> p;
    for (const auto& bit : j.at("p_exit")) {
        const int v = bit.get<int>();
        if (v != 0 && v != 1)
            throw std::runtime_error(path.string() + ": design.p_exit: entries must be 0/1");
        p.push_back(static_cast<std::uint8_t>(v));
    }
    if (!network_name.empty() && j.contains("network") &&
        j.at("network").get<std::string>() != network_name)
        throw std::runtime_error(path.string() + ": design.network: bound to '" +
                                 j.at("network").get<std::string>() + "', expected '" +
                                 network_name + "'");
    return make(std::move(p), j.at("c_thr").get<std::string>());
}

void DesignPoint::store(const std::filesystem::path& path,
                        const std::string& network_name) const {
    write_text_file(path, to_json_text(network_name));
}

std::size_t enumerate_designs(const NetworkSpec& net, const ThresholdGrid& grid) {
    const int n = net.exit_count();
    if (n >= 62) throw std::runtime_error("enumerate: search space exceeds addressable size");
    const std::size_t placements = std::size_t{1} << n;
    return static_cast<std::size_t>(grid.size()) * placements - 1;
}

}  // namespace exitdse
