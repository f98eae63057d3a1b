#include "exitdse/network.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "exitdse/csv.hpp"

namespace exitdse {

using nlohmann::json;

NetworkSpec::NetworkSpec(std::string name, std::vector<LayerDecl> backbone,
                         std::vector<ExitDecl> exits, bool require_candidates)
    : name_(std::move(name)), backbone_(std::move(backbone)), exits_(std::move(exits)) {
    validate(require_candidates);
}

void NetworkSpec::validate(bool require_candidates) {
    if (backbone_.empty()) throw std::runtime_error("network.backbone: must not be empty");

    for (int i = 0; i < static_cast<int>(backbone_.size()); ++i) {
        const auto& layer = backbone_[i];
        if (layer.id.empty()) throw std::runtime_error("network.backbone: empty layer id");
        if (!backbone_by_id_.emplace(layer.id, i).second)
            throw std::runtime_error("network.backbone: duplicate id '" + layer.id + "'");
    }

    // Declaration order must be topological: predecessors resolve to earlier
    // layers, which also guarantees acyclicity.
    preds_.resize(backbone_.size());
    int source_count = 0;
    for (int i = 0; i < static_cast<int>(backbone_.size()); ++i) {
        const auto& layer = backbone_[i];
        if (layer.preds.empty()) ++source_count;
        for (const auto& p : layer.preds) {
            auto it = backbone_by_id_.find(p);
            if (it == backbone_by_id_.end())
                throw std::runtime_error("network.backbone[" + layer.id +
                                         "].preds: unknown id '" + p + "'");
            if (it->second >= i)
                throw std::runtime_error("network.backbone[" + layer.id +
                                         "].preds: '" + p + "' is not declared earlier");
            preds_[i].push_back(it->second);
        }
    }
    if (source_count != 1)
        throw std::runtime_error("network.backbone: expected exactly one source layer, got " +
                                 std::to_string(source_count));
    if (!backbone_[0].preds.empty())
        throw std::runtime_error("network.backbone: first layer must be the source");

    std::vector<bool> has_succ(backbone_.size(), false);
    for (const auto& ps : preds_)
        for (int p : ps) has_succ[p] = true;
    int terminal_count = 0;
    for (int i = 0; i < static_cast<int>(backbone_.size()); ++i) {
        if (!has_succ[i]) {
            terminal_ = i;
            ++terminal_count;
        }
    }
    if (terminal_count != 1)
        throw std::runtime_error("network.backbone: expected exactly one terminal layer, got " +
                                 std::to_string(terminal_count));

    if (require_candidates && exits_.empty())
        throw std::runtime_error("network.candidate_exits: must declare at least one candidate");

    node_by_id_ = backbone_by_id_;
    std::vector<bool> attach_used(backbone_.size(), false);
    attach_index_.resize(exits_.size());
    for (int k = 0; k < static_cast<int>(exits_.size()); ++k) {
        const auto& e = exits_[k];
        if (e.id.empty()) throw std::runtime_error("network.candidate_exits: empty exit id");
        if (!node_by_id_.emplace(e.id, backbone_count() + k).second)
            throw std::runtime_error("network.candidate_exits: duplicate id '" + e.id + "'");
        auto it = backbone_by_id_.find(e.attach_after);
        if (it == backbone_by_id_.end())
            throw std::runtime_error("network.candidate_exits[" + e.id +
                                     "].attach_after: unknown layer '" + e.attach_after + "'");
        if (it->second == terminal_)
            throw std::runtime_error("network.candidate_exits[" + e.id +
                                     "].attach_after: cannot attach to the terminal layer");
        if (attach_used[it->second])
            throw std::runtime_error("network.candidate_exits[" + e.id +
                                     "].attach_after: layer '" + e.attach_after +
                                     "' already has a candidate exit");
        attach_used[it->second] = true;
        attach_index_[k] = it->second;
    }

    exits_by_depth_.resize(exits_.size());
    for (int k = 0; k < static_cast<int>(exits_.size()); ++k) exits_by_depth_[k] = k;
    std::sort(exits_by_depth_.begin(), exits_by_depth_.end(),
              [this](int a, int b) { return attach_index_[a] < attach_index_[b]; });
}

int NetworkSpec::backbone_index(const std::string& id) const {
    auto it = backbone_by_id_.find(id);
    if (it == backbone_by_id_.end())
        throw std::runtime_error("network: unknown backbone layer '" + id + "'");
    return it->second;
}

int NetworkSpec::exit_at(int backbone_idx) const {
    for (int k = 0; k < exit_count(); ++k)
        if (attach_index_[k] == backbone_idx) return k;
    return -1;
}

const std::string& NetworkSpec::node_id(int v) const {
    if (v < backbone_count()) return backbone_[v].id;
    return exits_[v - backbone_count()].id;
}

int NetworkSpec::node_index(const std::string& id) const {
    auto it = node_by_id_.find(id);
    return it == node_by_id_.end() ? -1 : it->second;
}

NetworkSpec NetworkSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("network: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("name") || !j.contains("backbone") ||
        !j.contains("candidate_exits"))
        throw std::runtime_error("network: expected fields name, backbone, candidate_exits");

    std::vector<LayerDecl> backbone;
    for (const auto& item : j.at("backbone")) {
        LayerDecl layer;
        layer.id = item.at("id").get<std::string>();
        if (item.contains("preds"))
            for (const auto& p : item.at("preds")) layer.preds.push_back(p.get<std::string>());
        backbone.push_back(std::move(layer));
    }
    std::vector<ExitDecl> exits;
    for (const auto& item : j.at("candidate_exits")) {
        exits.push_back({item.at("id").get<std::string>(),
                         item.at("attach_after").get<std::string>()});
    }
    return NetworkSpec(j.at("name").get<std::string>(), std::move(backbone), std::move(exits));
}

NetworkSpec NetworkSpec::load(const std::filesystem::path& path) {
    try {
        return from_json_text(read_text_file(path));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string NetworkSpec::to_json_text() const {
    json j;
    j["name"] = name_;
    j["backbone"] = json::array();
    for (const auto& layer : backbone_) {
        json item;
        item["id"] = layer.id;
        item["preds"] = layer.preds;
        j["backbone"].push_back(item);
    }
    j["candidate_exits"] = json::array();
    for (const auto& e : exits_) {
        json item;
        item["id"] = e.id;
        item["attach_after"] = e.attach_after;
        j["candidate_exits"].push_back(item);
    }
    return j.dump(2) + "\n";
}

void NetworkSpec::store(const std::filesystem::path& path) const {
    write_text_file(path, to_json_text());
}

}  // namespace exitdse
