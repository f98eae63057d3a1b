#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace exitdse {

struct LayerDecl {
    std::string id;
    std::vector<std::string> preds;
};

struct ExitDecl {
    std::string id;
    std::string attach_after;  // backbone layer id
};

// Overprovisioned network description: the backbone DAG plus every candidate
// early-exit position. Node order is fixed at construction (backbone in
// declaration order, then candidate exits in declaration order) and is the
// indexing used by every matrix and vector in the engine. The terminal
// backbone layer doubles as the final classifier.
class NetworkSpec {
public:
    NetworkSpec(std::string name, std::vector<LayerDecl> backbone,
                std::vector<ExitDecl> exits, bool require_candidates = true);

    static NetworkSpec load(const std::filesystem::path& path);
    static NetworkSpec from_json_text(const std::string& text);
    std::string to_json_text() const;
    void store(const std::filesystem::path& path) const;

    const std::string& name() const { return name_; }
    int backbone_count() const { return static_cast<int>(backbone_.size()); }
    int exit_count() const { return static_cast<int>(exits_.size()); }
    int node_count() const { return backbone_count() + exit_count(); }
    const std::vector<LayerDecl>& backbone() const { return backbone_; }
    const std::vector<ExitDecl>& exits() const { return exits_; }

    // backbone index (0-based, declaration order == topological order)
    int backbone_index(const std::string& id) const;
    // backbone index the k-th candidate exit attaches after
    int attach_index(int exit_k) const { return attach_index_[exit_k]; }
    int terminal_index() const { return terminal_; }
    // exit declared at a given backbone index, -1 if none
    int exit_at(int backbone_idx) const;
    // candidate exits sorted by attach depth: the order the run-time policy
    // consults them in
    const std::vector<int>& exits_by_depth() const { return exits_by_depth_; }

    // global node id, 0..|V|-1: backbone first, then exits
    const std::string& node_id(int v) const;
    int node_index(const std::string& id) const;  // -1 if unknown

    // predecessor backbone indices per backbone node
    const std::vector<std::vector<int>>& backbone_preds() const { return preds_; }

private:
    void validate(bool require_candidates);

    std::string name_;
    std::vector<LayerDecl> backbone_;
    std::vector<ExitDecl> exits_;
    std::vector<int> attach_index_;
    std::vector<int> exits_by_depth_;
    std::vector<std::vector<int>> preds_;
    std::unordered_map<std::string, int> backbone_by_id_;
    std::unordered_map<std::string, int> node_by_id_;
    int terminal_ = -1;
};

}  // namespace exitdse
