#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reponav/repo_model.hpp"

namespace reponav {

enum class Layer { Dependency, Inheritance, Call };

std::string_view to_string(Layer layer);
std::optional<Layer> parse_layer(std::string_view text);

struct Site {
    std::string path;
    int line = 0;

    auto operator<=>(const Site&) const = default;
};

struct RelationEdge {
    UnitId src;
    UnitId dst;
    Layer layer = Layer::Dependency;
    Site site;

    auto operator<=>(const RelationEdge&) const = default;
};

struct UnresolvedRef {
    Layer layer = Layer::Dependency;
    Site site;
    std::string text;

    auto operator<=>(const UnresolvedRef&) const = default;
};

struct ModuleMap {
    std::map<std::string, UnitId> entries;  ///< dotted module path -> File unit
    std::set<std::string> package_markers;  ///< directories holding an `__init__` module

    const UnitId* find(std::string_view module) const;
    /// True when `module` names a mapped module or a package prefix of one.
    bool is_package_prefix(std::string_view module) const;
};

enum class Direction { Out, In, Both };

struct RelationStep {
    UnitId from;
    UnitId to;
    Layer layer = Layer::Call;
    bool forward = true;  ///< false when the edge was walked dst -> src
};

struct NeighborHit {
    UnitId unit;
    int hop = 0;
    std::vector<RelationStep> path;
};

/// Renders `f →call g` / `g ←call f` chains.
std::string render_relation_path(const std::vector<RelationStep>& path);

class RelationGraph {
public:
    RelationGraph() = default;
    RelationGraph(std::vector<UnitId> known_units, std::vector<RelationEdge> edges, std::vector<UnresolvedRef> unresolved);

    /// Sorted, duplicate-free.
    const std::vector<RelationEdge>& edges() const noexcept { return edges_; }
    std::vector<RelationEdge> edges(Layer layer) const;
    const std::vector<UnresolvedRef>& unresolved() const noexcept { return unresolved_; }
    const std::vector<UnitId>& known_units() const noexcept { return known_; }

    /// Distinct targets (or sources) of a unit on one layer, sorted.
    const std::vector<UnitId>& successors(const UnitId& unit, Layer layer) const;
    const std::vector<UnitId>& predecessors(const UnitId& unit, Layer layer) const;

    /// Breadth-first search; seeds excluded; sorted by (hop, unit_id). Throws UnknownUnit.
    std::vector<NeighborHit> neighbors(const std::vector<UnitId>& seeds, const std::vector<Layer>& layers, int hops,
                                       Direction direction) const;

    /// `src<TAB>dst<TAB>layer<TAB>file:line` lines, sorted.
    std::string export_edges() const;

private:
    using Adjacency = std::unordered_map<UnitId, std::vector<UnitId>, UnitIdHash>;

    std::vector<UnitId> known_;
    std::unordered_set<UnitId, UnitIdHash> known_set_;
    std::vector<RelationEdge> edges_;
    std::vector<UnresolvedRef> unresolved_;
    std::array<Adjacency, 3> out_;
    std::array<Adjacency, 3> in_;
};

ModuleMap build_module_map(const RepoModel& model);

/// Layer builders append failures to `unresolved`.
std::vector<RelationEdge> build_dependency_layer(const RepoModel& model, const ModuleMap& map,
                                                 std::vector<UnresolvedRef>& unresolved);
std::vector<RelationEdge> build_inheritance_layer(const RepoModel& model, const ModuleMap& map,
                                                  std::vector<UnresolvedRef>& unresolved);
std::vector<RelationEdge> build_call_layer(const RepoModel& model, const ModuleMap& map,
                                           const std::vector<RelationEdge>& inheritance,
                                           std::vector<UnresolvedRef>& unresolved);

RelationGraph build_relation_graph(const RepoModel& model);

}  // namespace reponav
