#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "exitdse/design.hpp"
#include "exitdse/network.hpp"

namespace exitdse {

// Per-node mean latency and weights footprint measured once on the target
// device for the overprovisioned network, ordered to match the matrix node
// indexing. The raw id-keyed table is kept so a truncated network can rebind.
class DeviceProfile {
public:
    struct Entry {
        double latency_ms;
        double mem_bytes;
    };

    DeviceProfile(std::string device, std::unordered_map<std::string, Entry> table,
                  const NetworkSpec& net);

    // CSV with header node_id,latency_ms,mem_bytes; a multi-device file uses
    // latency_ms:<name>,mem_bytes:<name> column pairs and `device` selects one
    static DeviceProfile load(const std::filesystem::path& path, const NetworkSpec& net,
                              const std::string& device = "");
    void store(const std::filesystem::path& path, const std::string& comment = "") const;

    const std::string& device() const { return device_; }
    const Eigen::VectorXd& latency() const { return latency_; }
    const Eigen::VectorXd& memory() const { return memory_; }
    DeviceProfile rebind(const NetworkSpec& net) const;

private:
    std::string device_;
    std::unordered_map<std::string, Entry> table_;
    std::vector<std::string> node_ids_;
    Eigen::VectorXd latency_;
    Eigen::VectorXd memory_;
};

struct DesignMetrics {
    double expected_latency_ms = 0.0;
    double worst_case_latency_ms = 0.0;
    double memory_bytes = 0.0;
    double accuracy = 0.0;
};

// L = q^T l
double expected_latency(const DeviceProfile& profile, const Eigen::VectorXd& q);
// weights of the nodes that are used: sum of m over q > 0
double memory_footprint(const DeviceProfile& profile, const Eigen::VectorXd& q);
// latency of a sample that never exits early: every backbone node up to the
// deepest live classifier plus every instantiated head at or before it
double worst_case_latency(const NetworkSpec& net, const DesignPoint& design,
                          const DeviceProfile& profile);

}  // namespace exitdse
