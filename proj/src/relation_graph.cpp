#include "reponav/relation_graph.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <deque>
#include <functional>

#include "reponav/error.hpp"
#include "reponav/parallel.hpp"

namespace reponav {

std::string_view to_string(Layer layer) {
    switch (layer) {
        case Layer::Dependency: return "Dependency";
        case Layer::Inheritance: return "Inheritance";
        case Layer::Call: return "Call";
    }
    return "Dependency";
}

std::optional<Layer> parse_layer(std::string_view text) {
    if (text == "Dependency") return Layer::Dependency;
    if (text == "Inheritance") return Layer::Inheritance;
    if (text == "Call") return Layer::Call;
    return std::nullopt;
}

namespace {

std::string_view arrow_name(Layer layer) {
    switch (layer) {
        case Layer::Dependency: return "import";
        case Layer::Inheritance: return "inherits";
        case Layer::Call: return "call";
    }
    return "";
}

}  // namespace

std::string render_relation_path(const std::vector<RelationStep>& path) {
    std::string out;
    for (const auto& step : path) {
        if (out.empty()) out = step.from.value;
        out += step.forward ? " →" : " ←";
        out += arrow_name(step.layer);
        out += " " + step.to.value;
    }
    return out;
}

const UnitId* ModuleMap::find(std::string_view module) const {
    auto it = entries.find(std::string(module));
    return it == entries.end() ? nullptr : &it->second;
}

bool ModuleMap::is_package_prefix(std::string_view module) const {
    if (module.empty()) return false;
    if (find(module)) return true;
    std::string prefix = std::string(module) + ".";
    auto it = entries.lower_bound(prefix);
    return it != entries.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

// ---------------------------------------------------------------------------
// RelationGraph

RelationGraph::RelationGraph(std::vector<UnitId> known_units, std::vector<RelationEdge> edges,
                             std::vector<UnresolvedRef> unresolved)
    : known_(std::move(known_units)), edges_(std::move(edges)), unresolved_(std::move(unresolved)) {
    known_set_.insert(known_.begin(), known_.end());
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    std::sort(unresolved_.begin(), unresolved_.end());
    unresolved_.erase(std::unique(unresolved_.begin(), unresolved_.end()), unresolved_.end());
    for (const auto& e : edges_) {
        auto l = static_cast<std::size_t>(e.layer);
        out_[l][e.src].push_back(e.dst);
        in_[l][e.dst].push_back(e.src);
    }
    for (auto* adj : {&out_, &in_}) {
        for (auto& layer : *adj) {
            for (auto& [_, list] : layer) {
                std::sort(list.begin(), list.end());
                list.erase(std::unique(list.begin(), list.end()), list.end());
            }
        }
    }
}

std::vector<RelationEdge> RelationGraph::edges(Layer layer) const {
    std::vector<RelationEdge> out;
    for (const auto& e : edges_)
        if (e.layer == layer) out.push_back(e);
    return out;
}

const std::vector<UnitId>& RelationGraph::successors(const UnitId& unit, Layer layer) const {
    static const std::vector<UnitId> empty;
    const auto& adj = out_[static_cast<std::size_t>(layer)];
    auto it = adj.find(unit);
    return it == adj.end() ? empty : it->second;
}

const std::vector<UnitId>& RelationGraph::predecessors(const UnitId& unit, Layer layer) const {
    static const std::vector<UnitId> empty;
    const auto& adj = in_[static_cast<std::size_t>(layer)];
    auto it = adj.find(unit);
    return it == adj.end() ? empty : it->second;
}

std::vector<NeighborHit> RelationGraph::neighbors(const std::vector<UnitId>& seeds, const std::vector<Layer>& layers,
                                                  int hops, Direction direction) const {
    for (const auto& s : seeds)
        if (!known_set_.count(s)) throw Error(ErrorCode::UnknownUnit, s.value);
    std::vector<Layer> order = layers;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());

    std::unordered_map<UnitId, std::vector<RelationStep>, UnitIdHash> seen;
    std::vector<UnitId> frontier;
    for (const auto& s : seeds) {
        if (seen.emplace(s, std::vector<RelationStep>{}).second) frontier.push_back(s);
    }
    std::sort(frontier.begin(), frontier.end());

    std::vector<NeighborHit> out;
    for (int hop = 1; hop <= hops && !frontier.empty(); ++hop) {
        std::vector<UnitId> next;
        for (const auto& u : frontier) {
            const auto base_path = seen.at(u);
            for (auto layer : order) {
                auto visit = [&](const std::vector<UnitId>& adj, bool forward) {
                    for (const auto& v : adj) {
                        if (seen.count(v)) continue;
                        auto path = base_path;
                        path.push_back(RelationStep{u, v, layer, forward});
                        seen.emplace(v, path);
                        next.push_back(v);
                        out.push_back(NeighborHit{v, hop, std::move(path)});
                    }
                };
                if (direction != Direction::In) visit(successors(u, layer), true);
                if (direction != Direction::Out) visit(predecessors(u, layer), false);
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    std::stable_sort(out.begin(), out.end(), [](const NeighborHit& a, const NeighborHit& b) {
        return std::tie(a.hop, a.unit) < std::tie(b.hop, b.unit);
    });
    return out;
}

std::string RelationGraph::export_edges() const {
    std::vector<std::string> lines;
    lines.reserve(edges_.size());
    for (const auto& e : edges_) {
        lines.push_back(e.src.value + "\t" + e.dst.value + "\t" + std::string(to_string(e.layer)) + "\t" + e.site.path +
                        ":" + std::to_string(e.site.line));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Resolution

ModuleMap build_module_map(const RepoModel& model) {
    ModuleMap map;
    for (const auto& f : model.snapshot().files) {
        if (f.language != FileLanguage::Source || f.module_path.empty()) continue;
        const auto* unit = model.file_unit(f.path);
        if (unit == nullptr) continue;
        if (!map.entries.emplace(f.module_path, unit->id).second) {
            spdlog::warn(R"({{"event":"module_collision","module":"{}","path":"{}"}})", f.module_path, f.path);
        }
        auto slash = f.path.rfind('/');
        auto base = f.path.substr(slash == std::string::npos ? 0 : slash + 1);
        if (base == "__init__.py") map.package_markers.insert(slash == std::string::npos ? "" : f.path.substr(0, slash));
    }
    return map;
}

namespace {

struct Value {
    enum class Kind { Unknown, External, Module, Unit, Instance, Cls, SuperFn, Super, Param };
    Kind kind = Kind::Unknown;
    std::string module;
    std::size_t unit = 0;

    bool operator==(const Value&) const = default;

    static Value unknown() { return {}; }
    static Value of(Kind k, std::size_t u) { return Value{k, {}, u}; }
    static Value mod(std::string m) { return Value{Kind::Module, std::move(m), 0}; }
};

// One binding of a name inside a scope.
struct Fact {
    enum class Kind { Def, Import, Assign, Param };
    Kind kind = Kind::Def;
    int line = 0;
    const std::vector<int>* blocks = nullptr;  ///< null: binds at scope top level
    std::size_t ref = 0;                        ///< global unit / import index / assignment index / param index
    std::size_t sub = 0;                        ///< name index inside an import statement
};

enum class Mode { Reaching, Sequential, Final };

constexpr int kMaxDepth = 24;

std::string short_name(const CodeUnit& u) {
    auto dot = u.qualified_name.rfind('.');
    return dot == std::string::npos ? u.qualified_name : u.qualified_name.substr(dot + 1);
}

std::vector<std::string> split_dotted(std::string_view text) {
    std::vector<std::string> out;
    std::size_t b = 0;
    while (true) {
        auto e = text.find('.', b);
        out.emplace_back(text.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
        if (e == std::string_view::npos) break;
        b = e + 1;
    }
    return out;
}

bool is_identifier(std::string_view s) {
    if (s.empty() || (s[0] >= '0' && s[0] <= '9')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    });
}

class Resolver {
public:
    Resolver(const RepoModel& model, const ModuleMap& map) : model_(model), map_(map) {
        const auto& units = model.units();
        const auto& files = model.snapshot().files;
        unit_file_.assign(units.size(), 0);
        local_parent_.assign(units.size(), -1);
        children_.resize(units.size());
        files_.resize(files.size());
        for (std::size_t k = 0; k < files.size(); ++k) {
            file_index_[files[k].path] = k;
            auto list = model.units_of_file(files[k].path);
            if (list.empty()) continue;
            files_[k].start = static_cast<std::size_t>(list.front() - units.data());
            files_[k].count = list.size();
            for (const auto* u : list) {
                auto g = static_cast<std::size_t>(u - units.data());
                unit_file_[g] = k;
                if (u->parent) {
                    auto p = model.index_of(*u->parent);
                    if (p) {
                        local_parent_[g] = static_cast<int>(*p - files_[k].start);
                        children_[*p].push_back(g);
                    }
                }
            }
        }
        if (model.syntax().size() == files.size()) {
            for (std::size_t k = 0; k < files.size(); ++k) index_facts(k);
        }
    }

    bool has_syntax(std::size_t k) const { return model_.syntax().size() == model_.snapshot().files.size() && files_[k].count > 0; }
    const FileSyntax& syntax(std::size_t k) const { return model_.syntax()[k]; }
    std::size_t global(std::size_t k, int local) const { return files_[k].start + static_cast<std::size_t>(local); }
    const CodeUnit& unit(std::size_t g) const { return model_.units()[g]; }
    const std::string& path(std::size_t k) const { return model_.snapshot().files[k].path; }

    // --- modules ----------------------------------------------------------

    std::optional<std::size_t> module_file(std::string_view module) const {
        const auto* id = map_.find(module);
        if (!id) return std::nullopt;
        auto g = model_.index_of(*id);
        if (!g) return std::nullopt;
        return unit_file_[*g];
    }

    /// Absolute module named by a from-import; nullopt when the relative level escapes the root.
    std::optional<std::string> import_base(std::size_t k, const ImportStmt& stmt) const {
        if (stmt.level == 0) return stmt.module;
        const auto& file = model_.snapshot().files[k];
        auto parts = split_dotted(file.module_path);
        bool is_init = file.path == "__init__.py" ||
                       (file.path.size() > 12 && file.path.compare(file.path.size() - 12, 12, "/__init__.py") == 0);
        if (file.module_path.empty()) parts.clear();
        if (!is_init && !parts.empty()) parts.pop_back();
        for (int i = 1; i < stmt.level; ++i) {
            if (parts.empty()) return std::nullopt;
            parts.pop_back();
        }
        std::string base;
        for (const auto& p : parts) base += (base.empty() ? "" : ".") + p;
        if (!stmt.module.empty()) base += (base.empty() ? "" : ".") + stmt.module;
        return base;
    }

    Value module_attr(const std::string& module, const std::string& name, int depth) const {
        if (depth > kMaxDepth) return Value::unknown();
        std::string full = module.empty() ? name : module + "." + name;
        if (map_.is_package_prefix(full)) return Value::mod(full);
        auto k = module_file(module);
        if (!k) return map_.is_package_prefix(module) ? Value::unknown() : Value{Value::Kind::External, full, 0};
        return lookup(*k, 0, name, 0, nullptr, Mode::Final, depth + 1);
    }

    Value import_value(std::size_t k, const ImportStmt& stmt, const ImportName& n, int depth) const {
        if (!stmt.is_from) {
            std::string target = n.alias.empty() ? n.name.substr(0, n.name.find('.')) : n.name;
            if (map_.is_package_prefix(target)) return Value::mod(target);
            return Value{Value::Kind::External, target, 0};
        }
        auto base = import_base(k, stmt);
        if (!base) return Value::unknown();
        return module_attr(*base, n.name, depth + 1);
    }

    // --- scopes -----------------------------------------------------------

    /// Next enclosing function scope (local index) or 0 for module level.
    int enclosing_scope(std::size_t k, int local) const {
        int p = local_parent_[global(k, local)];
        while (p > 0 && unit(global(k, p)).kind == UnitKind::Class) p = local_parent_[global(k, p)];
        return std::max(p, 0);
    }

    Value lookup(std::size_t k, int scope, const std::string& name, int line, const std::vector<int>* blocks, Mode mode,
                 int depth) const {
        if (depth > kMaxDepth) return Value::unknown();
        const auto& syn = syntax(k);
        int s = scope;
        bool own = true;
        while (true) {
            if (s != 0) {
                auto sc = syn.scopes.find(s);
                if (sc != syn.scopes.end() && sc->second.globals.count(name)) {
                    s = 0;
                    own = false;
                    continue;
                }
                if (sc != syn.scopes.end() && sc->second.locals.count(name)) {
                    return evaluate(k, s, name, line, blocks, own ? mode : Mode::Final, depth);
                }
                s = enclosing_scope(k, s);
                own = false;
                continue;
            }
            auto it = files_[k].facts.find({0, name});
            if (it != files_[k].facts.end()) return evaluate(k, 0, name, line, blocks, own ? mode : Mode::Final, depth);
            if (name == "super") {
                int cls = method_class(k, scope);
                if (cls >= 0) return Value::of(Value::Kind::SuperFn, global(k, cls));
            }
            return Value{Value::Kind::External, name, 0};
        }
    }

    /// Enclosing class (local index) when `scope` is a method, else -1.
    int method_class(std::size_t k, int scope) const {
        if (scope <= 0) return -1;
        auto sc = syntax(k).scopes.find(scope);
        return sc == syntax(k).scopes.end() ? -1 : sc->second.enclosing_class;
    }

    Value evaluate(std::size_t k, int scope, const std::string& name, int line, const std::vector<int>* blocks, Mode mode,
                   int depth) const {
        auto it = files_[k].facts.find({scope, name});
        if (it == files_[k].facts.end()) return Value::unknown();
        std::vector<const Fact*> reaching;
        for (const auto& f : it->second) {
            if (mode != Mode::Final && f.line >= line && f.kind != Fact::Kind::Param) continue;
            if (mode == Mode::Final) {
                reaching.push_back(&f);
            } else if (mode == Mode::Sequential || encloses(f.blocks, blocks)) {
                reaching.assign(1, &f);
            } else {
                reaching.push_back(&f);
            }
        }
        if (reaching.empty()) return Value::unknown();
        std::optional<Value> result;
        for (const auto* f : reaching) {
            auto v = fact_value(k, scope, *f, depth + 1);
            if (result && !(*result == v)) return Value::unknown();
            result = v;
        }
        return *result;
    }

    static bool encloses(const std::vector<int>* outer, const std::vector<int>* inner) {
        if (outer == nullptr) return true;
        if (inner == nullptr) return false;
        return outer->size() <= inner->size() && std::equal(outer->begin(), outer->end(), inner->begin());
    }

    Value fact_value(std::size_t k, int scope, const Fact& f, int depth) const {
        const auto& syn = syntax(k);
        switch (f.kind) {
            case Fact::Kind::Def: return Value::of(Value::Kind::Unit, f.ref);
            case Fact::Kind::Import: {
                const auto& stmt = syn.imports[f.ref];
                return import_value(k, stmt, stmt.names[f.sub], depth);
            }
            case Fact::Kind::Assign: {
                const auto& a = syn.assignments[f.ref];
                if (!a.constructor) return Value::unknown();
                auto v = eval_chain(k, scope, *a.constructor, a.line, &a.blocks, depth + 1);
                if (v.kind == Value::Kind::Unit && unit(v.unit).kind == UnitKind::Class)
                    return Value::of(Value::Kind::Instance, v.unit);
                if (v.kind == Value::Kind::Cls) return Value::of(Value::Kind::Instance, v.unit);
                return Value::unknown();
            }
            case Fact::Kind::Param: {
                const auto& sc = syn.scopes.at(scope);
                if (f.ref == 0 && sc.enclosing_class >= 0 && !sc.is_staticmethod) {
                    auto cls = global(k, sc.enclosing_class);
                    return Value::of(sc.is_classmethod ? Value::Kind::Cls : Value::Kind::Instance, cls);
                }
                return Value::of(Value::Kind::Param, 0);
            }
        }
        return Value::unknown();
    }

    // --- classes ----------------------------------------------------------

    const std::vector<std::size_t>& mro(std::size_t cls) const {
        static const std::vector<std::size_t> empty;
        auto it = mro_.find(cls);
        return it == mro_.end() ? empty : it->second;
    }

    std::optional<std::size_t> member(std::size_t cls, const std::string& name, bool skip_self) const {
        std::vector<std::size_t> chain = mro(cls);
        if (chain.empty()) chain.push_back(cls);
        for (std::size_t i = skip_self ? 1 : 0; i < chain.size(); ++i) {
            for (auto c : children_[chain[i]]) {
                const auto& u = unit(c);
                if ((u.kind == UnitKind::Function || u.kind == UnitKind::Class) && short_name(u) == name) return c;
            }
        }
        return std::nullopt;
    }

    std::optional<std::size_t> initializer(std::size_t cls) const {
        auto m = member(cls, "__init__", false);
        if (m && unit(*m).kind == UnitKind::Function) return m;
        return std::nullopt;
    }

    /// Instance attribute bound through `self.X = C(...)`; nullopt when the class chain never assigns it.
    std::optional<Value> instance_attr(std::size_t cls, const std::string& attr, int depth) const {
        std::vector<std::size_t> chain = mro(cls);
        if (chain.empty()) chain.push_back(cls);
        for (auto c : chain) {
            auto k = unit_file_[c];
            if (!has_syntax(k)) continue;
            const auto& syn = syntax(k);
            int local_cls = static_cast<int>(c - files_[k].start);
            std::optional<Value> result;
            bool in_init = false;
            bool conflict = false;
            for (const auto& a : syn.assignments) {
                if (a.scope <= 0 || a.class_body != -1) continue;
                auto sc = syn.scopes.find(a.scope);
                if (sc == syn.scopes.end() || sc->second.enclosing_class != local_cls || sc->second.is_staticmethod ||
                    sc->second.params.empty())
                    continue;
                if (a.target != sc->second.params[0] + "." + attr) continue;
                Value v = Value::unknown();
                if (a.constructor) {
                    auto cv = eval_chain(k, a.scope, *a.constructor, a.line, &a.blocks, depth + 1);
                    if (cv.kind == Value::Kind::Unit && unit(cv.unit).kind == UnitKind::Class)
                        v = Value::of(Value::Kind::Instance, cv.unit);
                }
                if (result && !(*result == v)) conflict = true;
                result = v;
                if (short_name(unit(global(k, a.scope))) == "__init__") in_init = true;
            }
            if (result) {
                if (conflict || !in_init) return Value::unknown();
                return result;
            }
        }
        return std::nullopt;
    }

    // --- chains -----------------------------------------------------------

    Value attribute(const Value& v, const std::string& name, int depth) const {
        using K = Value::Kind;
        switch (v.kind) {
            case K::Module: return module_attr(v.module, name, depth + 1);
            case K::Unit:
                if (unit(v.unit).kind != UnitKind::Class) return Value::unknown();
                [[fallthrough]];
            case K::Cls: {
                auto m = member(v.unit, name, false);
                return m ? Value::of(K::Unit, *m) : Value::unknown();
            }
            case K::Instance: {
                if (auto bound = instance_attr(v.unit, name, depth + 1)) return *bound;
                auto m = member(v.unit, name, false);
                return m ? Value::of(K::Unit, *m) : Value::unknown();
            }
            case K::Super: {
                auto m = member(v.unit, name, true);
                return m ? Value::of(K::Unit, *m) : Value::unknown();
            }
            default: return Value::unknown();
        }
    }

    Value call_result(const Value& v) const {
        using K = Value::Kind;
        if (v.kind == K::SuperFn) return Value::of(K::Super, v.unit);
        if (v.kind == K::Cls) return Value::of(K::Instance, v.unit);
        if (v.kind == K::Unit && unit(v.unit).kind == UnitKind::Class) return Value::of(K::Instance, v.unit);
        return Value::unknown();
    }

    Value eval_chain(std::size_t k, int scope, const Chain& chain, int line, const std::vector<int>* blocks,
                     int depth, Mode mode = Mode::Reaching) const {
        if (chain.empty() || chain[0].kind != SegmentKind::Name || depth > kMaxDepth) return Value::unknown();
        Value v = lookup(k, scope, chain[0].name, line, blocks, mode, depth + 1);
        for (std::size_t i = 1; i < chain.size(); ++i) {
            switch (chain[i].kind) {
                case SegmentKind::Attr: v = attribute(v, chain[i].name, depth + 1); break;
                case SegmentKind::Call: v = call_result(v); break;
                default: v = Value::unknown(); break;
            }
            if (v.kind == Value::Kind::Unknown || v.kind == Value::Kind::External || v.kind == Value::Kind::Param)
                return Value::unknown();
        }
        return v;
    }

    std::optional<std::size_t> call_target(const Value& v) const {
        using K = Value::Kind;
        if (v.kind == K::Unit && unit(v.unit).kind == UnitKind::Function) return v.unit;
        if (v.kind == K::Cls || (v.kind == K::Unit && unit(v.unit).kind == UnitKind::Class)) return initializer(v.unit);
        return std::nullopt;
    }

    // --- layers -----------------------------------------------------------

    void dependency(std::size_t k, std::vector<RelationEdge>& edges, std::vector<UnresolvedRef>& unresolved) const {
        const auto& src = unit(files_[k].start).id;
        for (const auto& stmt : syntax(k).imports) {
            Site site{path(k), stmt.line};
            std::vector<std::size_t> targets;
            auto add_module = [&](const std::string& module) {
                auto f = module_file(module);
                if (f) targets.push_back(*f);
                return f.has_value();
            };
            if (!stmt.is_from) {
                for (const auto& n : stmt.names)
                    if (!add_module(n.name)) unresolved.push_back({Layer::Dependency, site, n.name});
            } else {
                auto base = import_base(k, stmt);
                std::string text = std::string(static_cast<std::size_t>(stmt.level), '.') + stmt.module;
                if (!base || !map_.is_package_prefix(*base)) {
                    unresolved.push_back({Layer::Dependency, site, text});
                } else if (stmt.star) {
                    if (!add_module(*base)) unresolved.push_back({Layer::Dependency, site, text + ".*"});
                } else {
                    for (const auto& n : stmt.names) {
                        std::string full = base->empty() ? n.name : *base + "." + n.name;
                        if (add_module(full) || add_module(*base)) continue;
                        unresolved.push_back({Layer::Dependency, site, full});
                    }
                }
            }
            std::sort(targets.begin(), targets.end());
            targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
            for (auto t : targets) {
                if (t == k) continue;
                edges.push_back({src, unit(files_[t].start).id, Layer::Dependency, site});
            }
        }
    }

    /// Resolved base classes of a class, in declaration order.
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> bases(std::size_t cls) const {
        std::vector<std::pair<std::size_t, std::optional<std::size_t>>> out;
        const auto& u = unit(cls);
        auto k = unit_file_[cls];
        int local = static_cast<int>(cls - files_[k].start);
        int scope = enclosing_scope(k, local);
        for (std::size_t i = 0; i < u.base_names.size(); ++i) {
            const auto& text = u.base_names[i];
            auto parts = split_dotted(text);
            if (!std::all_of(parts.begin(), parts.end(), is_identifier)) {
                out.emplace_back(i, std::nullopt);
                continue;
            }
            Chain chain;
            chain.push_back({SegmentKind::Name, parts[0]});
            for (std::size_t p = 1; p < parts.size(); ++p) chain.push_back({SegmentKind::Attr, parts[p]});
            auto v = eval_chain(k, scope, chain, u.span.start, nullptr, 0, Mode::Sequential);
            if (v.kind == Value::Kind::Unit && unit(v.unit).kind == UnitKind::Class && v.unit != cls) {
                out.emplace_back(i, v.unit);
            } else {
                out.emplace_back(i, std::nullopt);
            }
        }
        return out;
    }

    std::vector<RelationEdge> inheritance(std::vector<UnresolvedRef>& unresolved) {
        std::vector<RelationEdge> edges;
        std::unordered_map<std::size_t, std::vector<std::size_t>> accepted;
        std::function<bool(std::size_t, std::size_t)> reaches = [&](std::size_t from, std::size_t to) {
            if (from == to) return true;
            auto it = accepted.find(from);
            if (it == accepted.end()) return false;
            return std::any_of(it->second.begin(), it->second.end(), [&](std::size_t n) { return reaches(n, to); });
        };
        const auto& units = model_.units();
        for (std::size_t g = 0; g < units.size(); ++g) {
            const auto& u = units[g];
            if (u.kind != UnitKind::Class || u.base_names.empty() || !has_syntax(unit_file_[g])) continue;
            Site site{u.path, u.span.start};
            for (auto [i, base] : bases(g)) {
                if (!base) {
                    unresolved.push_back({Layer::Inheritance, site, u.base_names[i]});
                } else if (reaches(*base, g)) {
                    unresolved.push_back({Layer::Inheritance, site, u.base_names[i] + " (cycle)"});
                } else {
                    accepted[g].push_back(*base);
                    edges.push_back({u.id, unit(*base).id, Layer::Inheritance, site});
                }
            }
        }
        return edges;
    }

    void set_inheritance(const std::vector<RelationEdge>& edges) {
        std::unordered_map<std::size_t, std::vector<std::size_t>> direct;
        for (const auto& e : edges) {
            auto s = model_.index_of(e.src);
            auto d = model_.index_of(e.dst);
            if (s && d) direct[*s].push_back(*d);
        }
        // Keep declaration order of bases.
        for (auto& [cls, list] : direct) {
            const auto& names = unit(cls).base_names;
            auto rank = [&](std::size_t b) {
                auto sn = short_name(unit(b));
                for (std::size_t i = 0; i < names.size(); ++i) {
                    auto dot = names[i].rfind('.');
                    if ((dot == std::string::npos ? names[i] : names[i].substr(dot + 1)) == sn) return i;
                }
                return names.size();
            };
            std::stable_sort(list.begin(), list.end(), [&](auto a, auto b) { return rank(a) < rank(b); });
        }
        const auto& units = model_.units();
        for (std::size_t g = 0; g < units.size(); ++g) {
            if (units[g].kind != UnitKind::Class) continue;
            std::vector<std::size_t> order;
            std::function<void(std::size_t)> visit = [&](std::size_t c) {
                if (std::find(order.begin(), order.end(), c) != order.end()) return;
                order.push_back(c);
                auto it = direct.find(c);
                if (it != direct.end())
                    for (auto b : it->second) visit(b);
            };
            visit(g);
            mro_[g] = std::move(order);
        }
    }

    void calls(std::size_t k, std::vector<RelationEdge>& edges, std::vector<UnresolvedRef>& unresolved) const {
        const auto& syn = syntax(k);
        for (const auto& c : syn.calls) {
            Site site{path(k), c.line};
            auto text = render_chain(c.callee);
            if (c.comprehension_bound) {
                unresolved.push_back({Layer::Call, site, text});
                continue;
            }
            auto v = eval_chain(k, c.scope, c.callee, c.line, &c.blocks, 0);
            auto target = call_target(v);
            if (!target) {
                unresolved.push_back({Layer::Call, site, text});
                continue;
            }
            edges.push_back({unit(global(k, c.scope)).id, unit(*target).id, Layer::Call, site});
        }
    }

    std::size_t file_count() const { return files_.size(); }

private:
    struct FileInfo {
        std::size_t start = 0;
        std::size_t count = 0;
        std::map<std::pair<int, std::string>, std::vector<Fact>> facts;
    };

    void index_facts(std::size_t k) {
        auto& info = files_[k];
        if (info.count == 0) return;
        const auto& syn = syntax(k);
        auto add = [&](int scope, const std::string& name, Fact f) { info.facts[{scope, name}].push_back(f); };
        for (std::size_t l = 1; l < info.count; ++l) {
            auto g = info.start + l;
            const auto& u = unit(g);
            if (u.kind != UnitKind::Function && u.kind != UnitKind::Class) continue;
            int p = local_parent_[g];
            if (p < 0) continue;
            if (p > 0 && unit(global(k, p)).kind == UnitKind::Class) continue;
            add(p, short_name(u), Fact{Fact::Kind::Def, u.span.start, nullptr, g, 0});
        }
        for (std::size_t i = 0; i < syn.imports.size(); ++i) {
            const auto& stmt = syn.imports[i];
            for (std::size_t n = 0; n < stmt.names.size(); ++n) {
                const auto& nm = stmt.names[n];
                auto bound = !nm.alias.empty() ? nm.alias : (stmt.is_from ? nm.name : nm.name.substr(0, nm.name.find('.')));
                add(stmt.scope, bound, Fact{Fact::Kind::Import, stmt.line, nullptr, i, n});
            }
        }
        for (std::size_t i = 0; i < syn.assignments.size(); ++i) {
            const auto& a = syn.assignments[i];
            if (a.class_body != -1 || a.target.find('.') != std::string::npos) continue;
            add(a.scope, a.target, Fact{Fact::Kind::Assign, a.line, &a.blocks, i, 0});
        }
        for (const auto& [scope, sc] : syn.scopes) {
            if (scope == 0) continue;
            for (std::size_t i = 0; i < sc.params.size(); ++i)
                add(scope, sc.params[i], Fact{Fact::Kind::Param, 0, nullptr, i, 0});
        }
        for (auto& [_, list] : info.facts) {
            std::stable_sort(list.begin(), list.end(), [](const Fact& a, const Fact& b) { return a.line < b.line; });
        }
    }

    const RepoModel& model_;
    const ModuleMap& map_;
    std::vector<std::size_t> unit_file_;
    std::vector<int> local_parent_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<FileInfo> files_;
    std::unordered_map<std::string, std::size_t> file_index_;
    std::unordered_map<std::size_t, std::vector<std::size_t>> mro_;
};

template <class Fn>
std::vector<RelationEdge> per_file(const Resolver& r, std::vector<UnresolvedRef>& unresolved, Fn fn) {
    std::vector<std::vector<RelationEdge>> edges(r.file_count());
    std::vector<std::vector<UnresolvedRef>> failures(r.file_count());
    parallel_for(r.file_count(), [&](std::size_t k) {
        if (r.has_syntax(k)) fn(k, edges[k], failures[k]);
    });
    std::vector<RelationEdge> out;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        out.insert(out.end(), edges[k].begin(), edges[k].end());
        unresolved.insert(unresolved.end(), failures[k].begin(), failures[k].end());
    }
    return out;
}

}  // namespace

std::vector<RelationEdge> build_dependency_layer(const RepoModel& model, const ModuleMap& map,
                                                 std::vector<UnresolvedRef>& unresolved) {
    Resolver r(model, map);
    return per_file(r, unresolved, [&](std::size_t k, auto& e, auto& u) { r.dependency(k, e, u); });
}

std::vector<RelationEdge> build_inheritance_layer(const RepoModel& model, const ModuleMap& map,
                                                  std::vector<UnresolvedRef>& unresolved) {
    Resolver r(model, map);
    return r.inheritance(unresolved);
}

std::vector<RelationEdge> build_call_layer(const RepoModel& model, const ModuleMap& map,
                                           const std::vector<RelationEdge>& inheritance,
                                           std::vector<UnresolvedRef>& unresolved) {
    Resolver r(model, map);
    r.set_inheritance(inheritance);
    return per_file(r, unresolved, [&](std::size_t k, auto& e, auto& u) { r.calls(k, e, u); });
}

RelationGraph build_relation_graph(const RepoModel& model) {
    auto map = build_module_map(model);
    std::vector<UnresolvedRef> unresolved;
    Resolver r(model, map);
    auto edges = per_file(r, unresolved, [&](std::size_t k, auto& e, auto& u) { r.dependency(k, e, u); });
    auto inh = r.inheritance(unresolved);
    r.set_inheritance(inh);
    auto calls = per_file(r, unresolved, [&](std::size_t k, auto& e, auto& u) { r.calls(k, e, u); });
    edges.insert(edges.end(), inh.begin(), inh.end());
    edges.insert(edges.end(), calls.begin(), calls.end());
    std::vector<UnitId> known;
    known.reserve(model.units().size());
    for (const auto& u : model.units()) known.push_back(u.id);
    return RelationGraph(std::move(known), std::move(edges), std::move(unresolved));
}

}  // namespace reponav
