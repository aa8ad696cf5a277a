#include "kdsynth/knowledge_graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "kdsynth/errors.hpp"
#include "toml_reader.hpp"

namespace kdsynth {

ValidationError::ValidationError(std::vector<std::string> issues)
    : Error(issues.empty() ? std::string("validation failed")
                           : issues.front() + (issues.size() > 1
                                                   ? " (+" + std::to_string(issues.size() - 1) +
                                                         " more)"
                                                   : std::string())),
      issues_(std::move(issues)) {}

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::Abstract: return "abstract";
    case NodeKind::Operation: return "operation";
    case NodeKind::Precondition: return "precondition";
    }
    return "?";
}

std::string_view to_string(LinkKind kind) {
    switch (kind) {
    case LinkKind::Isa: return "ISA";
    case LinkKind::Hasa: return "HASA";
    case LinkKind::PreconditionedBy: return "PRECONDITIONED_BY";
    }
    return "?";
}

namespace {

std::string format_double(double d) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

} // namespace

std::string scalar_to_string(const Scalar& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.10g", v);
                return buf;
            } else {
                return v;
            }
        },
        value);
}

double KnowledgeNode::param_double(std::string_view key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (auto d = std::get_if<double>(&it->second)) return *d;
    if (auto i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw Error("parameter '" + std::string(key) + "' of node '" + id + "' is not numeric");
}

std::int64_t KnowledgeNode::param_int(std::string_view key, std::int64_t fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (auto i = std::get_if<std::int64_t>(&it->second)) return *i;
    if (auto d = std::get_if<double>(&it->second)) {
        if (std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
    }
    throw Error("parameter '" + std::string(key) + "' of node '" + id + "' is not an integer");
}

std::string KnowledgeNode::param_string(std::string_view key, std::string_view fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return std::string(fallback);
    if (auto s = std::get_if<std::string>(&it->second)) return *s;
    throw Error("parameter '" + std::string(key) + "' of node '" + id + "' is not a string");
}

std::vector<std::string> validate_graph(const std::vector<KnowledgeNode>& nodes,
                                        const std::vector<Link>& links,
                                        const ImplCatalog& catalog) {
    std::vector<std::string> issues;
    std::map<std::string, const KnowledgeNode*, std::less<>> by_id;
    std::map<std::string, std::string, std::less<>> symbols;

    for (const auto& n : nodes) {
        if (n.id.empty()) {
            issues.push_back("node with empty id");
            continue;
        }
        if (!by_id.emplace(n.id, &n).second) {
            issues.push_back("duplicate node id '" + n.id + "'");
            continue;
        }
        const bool needs_impl = n.kind != NodeKind::Abstract;
        if (needs_impl && !n.impl_key)
            issues.push_back(std::string(to_string(n.kind)) + " node '" + n.id +
                             "' is missing an impl key");
        if (!needs_impl && n.impl_key)
            issues.push_back("abstract node '" + n.id + "' must not carry an impl key");
        if (!n.hyperparams.empty() && n.kind != NodeKind::Operation)
            issues.push_back("node '" + n.id + "': hyperparams are only allowed on operation nodes");
        if (n.category && n.kind != NodeKind::Precondition)
            issues.push_back("node '" + n.id + "': category is only allowed on precondition nodes");
        if (n.category && !kPreconditionCategories.contains(*n.category))
            issues.push_back("precondition '" + n.id + "': unknown category '" + *n.category + "'");
        if (n.impl_key && !catalog.empty()) {
            const auto& known =
                n.kind == NodeKind::Operation ? catalog.operations : catalog.predicates;
            if (!known.contains(*n.impl_key))
                issues.push_back("node '" + n.id + "': unregistered impl key '" + *n.impl_key + "'");
        }
        if (auto it = n.params.find("symbol"); it != n.params.end()) {
            std::string sym = scalar_to_string(it->second);
            auto [pos, fresh] = symbols.emplace(sym, n.id);
            if (!fresh)
                issues.push_back("symbol '" + sym + "' bound by both '" + pos->second + "' and '" +
                                 n.id + "'");
        }
    }

    auto kind_of = [&](const std::string& id) -> std::optional<NodeKind> {
        auto it = by_id.find(id);
        if (it == by_id.end()) return std::nullopt;
        return it->second->kind;
    };

    std::set<std::tuple<std::string, std::string, LinkKind>> seen;
    std::map<std::string, std::vector<std::string>> isa_out;
    std::set<std::string> has_isa_parent, has_precond_in, has_hasa_in, has_op_child;
    bool any_hasa = false;

    for (const auto& l : links) {
        std::string label =
            "link " + l.src + " -" + std::string(to_string(l.kind)) + "-> " + l.dst;
        auto src = kind_of(l.src);
        auto dst = kind_of(l.dst);
        if (!src) issues.push_back(label + ": unknown node '" + l.src + "'");
        if (!dst) issues.push_back(label + ": unknown node '" + l.dst + "'");
        if (!seen.emplace(l.src, l.dst, l.kind).second) issues.push_back(label + ": duplicate link");
        if (!src || !dst) continue;
        switch (l.kind) {
        case LinkKind::Isa:
            if (*src == NodeKind::Precondition || *dst != NodeKind::Abstract)
                issues.push_back(label + ": ISA must go from an abstract or operation node to an "
                                         "abstract node");
            isa_out[l.src].push_back(l.dst);
            has_isa_parent.insert(l.src);
            if (*src == NodeKind::Operation) has_op_child.insert(l.dst);
            break;
        case LinkKind::Hasa:
            any_hasa = true;
            if (*src != NodeKind::Abstract || *dst != NodeKind::Abstract)
                issues.push_back(label + ": HASA must link a feature type to a feature component "
                                         "(both abstract)");
            has_hasa_in.insert(l.dst);
            break;
        case LinkKind::PreconditionedBy:
            if (*src != NodeKind::Operation || *dst != NodeKind::Precondition)
                issues.push_back(label + ": PRECONDITIONED_BY must link an operation to a "
                                         "precondition");
            has_precond_in.insert(l.dst);
            break;
        }
    }

    // ISA cycle detection (iterative DFS colouring).
    std::map<std::string, int> colour;
    std::function<bool(const std::string&)> visit = [&](const std::string& id) {
        colour[id] = 1;
        for (const auto& next : isa_out[id]) {
            int c = colour[next];
            if (c == 1) return true;
            if (c == 0 && visit(next)) return true;
        }
        colour[id] = 2;
        return false;
    };
    std::set<std::string> cycle_roots;
    for (const auto& [id, _] : isa_out) {
        if (colour[id] == 0 && visit(id)) cycle_roots.insert(id);
    }
    for (const auto& id : cycle_roots) issues.push_back("ISA cycle through '" + id + "'");

    for (const auto& [id, n] : by_id) {
        if (n->kind == NodeKind::Operation && !has_isa_parent.contains(id))
            issues.push_back("operation '" + id +
                             "' has no ISA parent (every node must be linked to at least one "
                             "higher abstraction node)");
        if (n->kind == NodeKind::Precondition && !has_precond_in.contains(id))
            issues.push_back("precondition '" + id +
                             "' is not linked to any operation (each precondition must be "
                             "linked to at least one operation)");
        if (any_hasa && n->kind == NodeKind::Abstract && has_op_child.contains(id) &&
            !has_hasa_in.contains(id))
            issues.push_back("feature component '" + id +
                             "' is not linked to any feature type (every component must be "
                             "linked to at least one feature type)");
    }
    return issues;
}

KnowledgeGraph KnowledgeGraph::build(std::vector<KnowledgeNode> nodes, std::vector<Link> links,
                                     const ImplCatalog& catalog) {
    auto issues = validate_graph(nodes, links, catalog);
    if (!issues.empty()) throw ValidationError(std::move(issues));

    KnowledgeGraph g;
    for (auto& n : nodes) {
        std::string id = n.id;
        g.nodes_.emplace(std::move(id), std::move(n));
    }
    g.links_ = std::move(links);
    for (const auto& l : g.links_) {
        switch (l.kind) {
        case LinkKind::Isa: g.isa_children_[l.dst].push_back(l.src); break;
        case LinkKind::Hasa: g.hasa_[l.src].push_back(l.dst); break;
        case LinkKind::PreconditionedBy: g.preconditions_[l.src].push_back(l.dst); break;
        }
    }
    for (auto* index : {&g.isa_children_, &g.hasa_, &g.preconditions_})
        for (auto& [_, v] : *index) std::sort(v.begin(), v.end());
    return g;
}

const KnowledgeNode* KnowledgeGraph::find(std::string_view id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const KnowledgeNode& KnowledgeGraph::node(std::string_view id) const {
    if (auto* n = find(id)) return *n;
    throw UnknownNode(std::string(id));
}

std::optional<std::string> KnowledgeGraph::node_for_symbol(std::string_view symbol) const {
    for (const auto& [id, n] : nodes_) {
        auto it = n.params.find("symbol");
        if (it != n.params.end() && scalar_to_string(it->second) == symbol) return id;
    }
    return std::nullopt;
}

namespace {
const std::vector<std::string> kNone;

const std::vector<std::string>& lookup(
    const std::map<std::string, std::vector<std::string>, std::less<>>& index,
    std::string_view id) {
    auto it = index.find(id);
    return it == index.end() ? kNone : it->second;
}
} // namespace

const std::vector<std::string>& KnowledgeGraph::isa_children(std::string_view id) const {
    return lookup(isa_children_, id);
}
const std::vector<std::string>& KnowledgeGraph::precondition_ids(std::string_view op) const {
    return lookup(preconditions_, op);
}
const std::vector<std::string>& KnowledgeGraph::hasa_targets(std::string_view type) const {
    return lookup(hasa_, type);
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::optional<NodeKind> parse_node_kind(std::string_view s) {
    if (s == "abstract") return NodeKind::Abstract;
    if (s == "operation") return NodeKind::Operation;
    if (s == "precondition") return NodeKind::Precondition;
    return std::nullopt;
}

std::optional<LinkKind> parse_link_kind(std::string_view s) {
    if (s == "ISA") return LinkKind::Isa;
    if (s == "HASA") return LinkKind::Hasa;
    if (s == "PRECONDITIONED_BY") return LinkKind::PreconditionedBy;
    return std::nullopt;
}

const std::string* as_string(const toml::Value& v) { return std::get_if<std::string>(&v.data); }

std::optional<Scalar> as_scalar(const toml::Value& v) {
    return std::visit(
        [](const auto& x) -> std::optional<Scalar> {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, toml::Array> || std::is_same_v<T, toml::InlineTable>)
                return std::nullopt;
            else
                return Scalar{x};
        },
        v.data);
}

std::optional<double> as_number(const toml::Value& v) {
    if (auto d = std::get_if<double>(&v.data)) return *d;
    if (auto i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    return std::nullopt;
}

} // namespace

KnowledgeGraph load_kb_from_string(std::string_view text, const ImplCatalog& catalog,
                                   std::string_view origin) {
    toml::Document doc = toml::parse(text, origin);
    std::vector<std::string> issues;
    std::vector<KnowledgeNode> nodes;
    std::vector<Link> links;
    auto where = [&](int line) { return std::string(origin) + ":" + std::to_string(line) + ": "; };

    for (const auto& e : doc.tables.front().entries)
        issues.push_back(where(e.line) + "unknown top-level key '" + e.key + "'");

    for (std::size_t t = 1; t < doc.tables.size(); ++t) {
        const auto& table = doc.tables[t];
        if (!table.is_array || (table.name != "node" && table.name != "link")) {
            issues.push_back(where(table.line) + "unknown table '" + table.name + "'");
            continue;
        }
        if (table.name == "node") {
            KnowledgeNode n;
            bool has_kind = false;
            for (const auto& e : table.entries) {
                const std::string* s = as_string(e.value);
                if (e.key == "id") {
                    if (!s) issues.push_back(where(e.line) + "'id' must be a string");
                    else n.id = *s;
                } else if (e.key == "kind") {
                    auto k = s ? parse_node_kind(*s) : std::nullopt;
                    if (!k) issues.push_back(where(e.line) + "invalid node kind");
                    else {
                        n.kind = *k;
                        has_kind = true;
                    }
                } else if (e.key == "impl") {
                    if (!s) issues.push_back(where(e.line) + "'impl' must be a string");
                    else n.impl_key = *s;
                } else if (e.key == "category") {
                    if (!s) issues.push_back(where(e.line) + "'category' must be a string");
                    else n.category = *s;
                } else if (e.key == "params") {
                    auto* tbl = std::get_if<toml::InlineTable>(&e.value.data);
                    if (!tbl) {
                        issues.push_back(where(e.line) + "'params' must be an inline table");
                        continue;
                    }
                    for (const auto& [k, v] : *tbl) {
                        auto sc = as_scalar(v);
                        if (!sc) issues.push_back(where(e.line) + "param '" + k + "' must be a scalar");
                        else n.params.emplace(k, *sc);
                    }
                } else if (e.key == "hyperparams") {
                    auto* tbl = std::get_if<toml::InlineTable>(&e.value.data);
                    if (!tbl) {
                        issues.push_back(where(e.line) + "'hyperparams' must be an inline table");
                        continue;
                    }
                    for (const auto& [k, v] : *tbl) {
                        auto* arr = std::get_if<toml::Array>(&v.data);
                        std::vector<double> grid;
                        bool ok = arr != nullptr && !arr->empty();
                        if (arr)
                            for (const auto& x : *arr) {
                                auto d = as_number(x);
                                if (!d) ok = false;
                                else grid.push_back(*d);
                            }
                        if (!ok)
                            issues.push_back(where(e.line) + "hyperparam '" + k +
                                             "' must be a non-empty array of numbers");
                        else n.hyperparams.emplace(k, std::move(grid));
                    }
                } else {
                    issues.push_back(where(e.line) + "unknown node key '" + e.key + "'");
                }
            }
            if (n.id.empty()) issues.push_back(where(table.line) + "node without 'id'");
            if (!has_kind) issues.push_back(where(table.line) + "node '" + n.id + "' without 'kind'");
            nodes.push_back(std::move(n));
        } else {
            Link l;
            bool has_src = false, has_dst = false, has_kind = false;
            for (const auto& e : table.entries) {
                const std::string* s = as_string(e.value);
                if (e.key == "src" || e.key == "dst") {
                    if (!s) {
                        issues.push_back(where(e.line) + "'" + e.key + "' must be a string");
                        continue;
                    }
                    (e.key == "src" ? l.src : l.dst) = *s;
                    (e.key == "src" ? has_src : has_dst) = true;
                } else if (e.key == "kind") {
                    auto k = s ? parse_link_kind(*s) : std::nullopt;
                    if (!k) issues.push_back(where(e.line) + "invalid link kind");
                    else {
                        l.kind = *k;
                        has_kind = true;
                    }
                } else {
                    issues.push_back(where(e.line) + "unknown link key '" + e.key + "'");
                }
            }
            if (!has_src || !has_dst || !has_kind)
                issues.push_back(where(table.line) + "link requires 'src', 'dst' and 'kind'");
            else links.push_back(std::move(l));
        }
    }

    auto graph_issues = validate_graph(nodes, links, catalog);
    issues.insert(issues.end(), graph_issues.begin(), graph_issues.end());
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return KnowledgeGraph::build(std::move(nodes), std::move(links), catalog);
}

KnowledgeGraph load_kb(const std::filesystem::path& path, const ImplCatalog& catalog) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open knowledge base '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_kb_from_string(buf.str(), catalog, path.string());
}

std::string to_toml(const KnowledgeGraph& graph) {
    std::ostringstream out;
    auto scalar_toml = [](const Scalar& v) -> std::string {
        return std::visit(
            [](const auto& x) -> std::string {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
                else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
                else if constexpr (std::is_same_v<T, double>) return format_double(x);
                else return toml::quote(x);
            },
            v);
    };
    for (const auto& [id, n] : graph.nodes()) {
        out << "[[node]]\n";
        out << "id = " << toml::quote(id) << "\n";
        out << "kind = " << toml::quote(to_string(n.kind)) << "\n";
        if (n.impl_key) out << "impl = " << toml::quote(*n.impl_key) << "\n";
        if (n.category) out << "category = " << toml::quote(*n.category) << "\n";
        if (!n.params.empty()) {
            out << "params = { ";
            bool first = true;
            for (const auto& [k, v] : n.params) {
                out << (first ? "" : ", ") << k << " = " << scalar_toml(v);
                first = false;
            }
            out << " }\n";
        }
        if (!n.hyperparams.empty()) {
            out << "hyperparams = { ";
            bool first = true;
            for (const auto& [k, grid] : n.hyperparams) {
                out << (first ? "" : ", ") << k << " = [";
                for (std::size_t i = 0; i < grid.size(); ++i)
                    out << (i ? ", " : "") << format_double(grid[i]);
                out << "]";
                first = false;
            }
            out << " }\n";
        }
        out << "\n";
    }
    for (const auto& l : graph.links()) {
        out << "[[link]]\nsrc = " << toml::quote(l.src) << "\ndst = " << toml::quote(l.dst)
            << "\nkind = " << toml::quote(to_string(l.kind)) << "\n\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Queries

std::vector<std::string> operation_descendants(const KnowledgeGraph& g,
                                               std::string_view abstract_id) {
    const auto& root = g.node(abstract_id);
    if (root.kind != NodeKind::Abstract)
        throw KindMismatch("'" + root.id + "' is a " + std::string(to_string(root.kind)) +
                           " node, expected abstract");
    std::set<std::string> visited{root.id};
    std::vector<std::string> stack{root.id};
    std::set<std::string> ops;
    while (!stack.empty()) {
        std::string cur = std::move(stack.back());
        stack.pop_back();
        for (const auto& child : g.isa_children(cur)) {
            if (!visited.insert(child).second) continue;
            if (g.node(child).kind == NodeKind::Operation) ops.insert(child);
            stack.push_back(child);
        }
    }
    return {ops.begin(), ops.end()};
}

std::vector<const KnowledgeNode*> preconditions_of(const KnowledgeGraph& g, std::string_view op) {
    const auto& n = g.node(op);
    if (n.kind != NodeKind::Operation)
        throw KindMismatch("'" + n.id + "' is a " + std::string(to_string(n.kind)) +
                           " node, expected operation");
    std::vector<const KnowledgeNode*> out;
    for (const auto& id : g.precondition_ids(op)) out.push_back(&g.node(id));
    return out;
}

std::map<std::string, std::vector<std::string>> components_for_feature(
    const KnowledgeGraph& g, std::string_view feature_type) {
    const auto& n = g.node(feature_type);
    if (n.kind != NodeKind::Abstract)
        throw KindMismatch("'" + n.id + "' is not an abstract feature type");
    std::map<std::string, std::vector<std::string>> slots;
    for (const auto& component : g.hasa_targets(feature_type)) {
        auto ops = operation_descendants(g, component);
        if (ops.empty())
            throw EmptySlot("feature component '" + component + "' of '" + n.id +
                            "' has no operation nodes");
        slots.emplace(component, std::move(ops));
    }
    if (slots.empty())
        throw KindMismatch("'" + n.id + "' has no HASA components (not a feature type)");
    return slots;
}

} // namespace kdsynth
