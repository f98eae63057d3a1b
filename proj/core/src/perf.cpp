#include "exitdse/perf.hpp"

#include <sstream>
#include <stdexcept>

#include "exitdse/csv.hpp"

namespace exitdse {

DeviceProfile::DeviceProfile(std::string device,
                             std::unordered_map<std::string, Entry> table,
                             const NetworkSpec& net)
    : device_(std::move(device)), table_(std::move(table)) {
    const int nv = net.node_count();
    latency_.resize(nv);
    memory_.resize(nv);
    for (int v = 0; v < nv; ++v) {
        const std::string& id = net.node_id(v);
        auto it = table_.find(id);
        if (it == table_.end())
            throw std::runtime_error("profile: missing node '" + id + "'");
        if (it->second.latency_ms < 0.0)
            throw std::runtime_error("profile.latency_ms: negative for node '" + id + "'");
        if (it->second.mem_bytes < 0.0)
            throw std::runtime_error("profile.mem_bytes: negative for node '" + id + "'");
        node_ids_.push_back(id);
        latency_(v) = it->second.latency_ms;
        memory_(v) = it->second.mem_bytes;
    }
}

DeviceProfile DeviceProfile::load(const std::filesystem::path& path, const NetworkSpec& net,
                                  const std::string& device) {
    const CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "node_id")
        throw std::runtime_error(path.string() + ": profile: header must start with node_id");

    int lat_col = -1, mem_col = -1;
    std::string resolved = device;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        const std::string& h = table.header[c];
        const auto sep = h.find(':');
        const std::string base = sep == std::string::npos ? h : h.substr(0, sep);
        const std::string dev = sep == std::string::npos ? "" : h.substr(sep + 1);
        if (base == "latency_ms" && (device.empty() ? lat_col < 0 : dev == device)) {
            lat_col = static_cast<int>(c);
            if (device.empty()) resolved = dev;
        } else if (base == "mem_bytes" &&
                   (device.empty() ? mem_col < 0 : dev == device)) {
            mem_col = static_cast<int>(c);
        }
    }
    if (lat_col < 0 || mem_col < 0)
        throw std::runtime_error(path.string() + ": profile: no latency_ms/mem_bytes columns" +
                                 (device.empty() ? "" : " for device '" + device + "'"));

    std::unordered_map<std::string, Entry> entries;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw std::runtime_error(path.string() + ": profile: malformed row " +
                                     std::to_string(r + 1));
        Entry e{parse_double(row[lat_col], "profile.latency_ms"),
                parse_double(row[mem_col], "profile.mem_bytes")};
        if (!entries.emplace(row[0], e).second)
            throw std::runtime_error(path.string() + ": profile: duplicate node '" + row[0] +
                                     "'");
    }
    try {
        return DeviceProfile(resolved, std::move(entries), net);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void DeviceProfile::store(const std::filesystem::path& path,
                          const std::string& comment) const {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "node_id,latency_ms,mem_bytes\n";
    for (std::size_t v = 0; v < node_ids_.size(); ++v)
        out << node_ids_[v] << "," << format_g9(latency_(v)) << "," << format_g9(memory_(v))
            << "\n";
    write_text_file(path, out.str());
}

DeviceProfile DeviceProfile::rebind(const NetworkSpec& net) const {
    return DeviceProfile(device_, table_, net);
}

double expected_latency(const DeviceProfile& profile, const Eigen::VectorXd& q) {
    if (profile.latency().size() != q.size())
        throw std::runtime_error("expected_latency: dimension mismatch (" +
                                 std::to_string(profile.latency().size()) + " vs " +
                                 std::to_string(q.size()) + ")");
    return profile.latency().dot(q);
}

double memory_footprint(const DeviceProfile& profile, const Eigen::VectorXd& q) {
    if (profile.memory().size() != q.size())
        throw std::runtime_error("memory_footprint: dimension mismatch");
    double total = 0.0;
    for (int v = 0; v < q.size(); ++v)
        if (q(v) > 0.0) total += profile.memory()(v);
    return total;
}

double worst_case_latency(const NetworkSpec& net, const DesignPoint& design,
                          const DeviceProfile& profile) {
    if (profile.latency().size() != net.node_count())
        throw std::runtime_error("worst_case_latency: profile/network mismatch");
    // the final classifier is always live, so the deepest classifier is the
    // terminal backbone node
    double total = 0.0;
    for (int v = 0; v < net.backbone_count(); ++v) total += profile.latency()(v);
    for (int k = 0; k < net.exit_count(); ++k)
        if (design.p_exit[k]) total += profile.latency()(net.backbone_count() + k);
    return total;
}

}  // namespace exitdse
