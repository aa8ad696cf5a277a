#pragma once
// Knowledge graph: abstract, operation and precondition nodes joined by
// ISA / HASA / PRECONDITIONED_BY links. Immutable once loaded.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kdsynth {

enum class NodeKind { Abstract, Operation, Precondition };
enum class LinkKind { Isa, Hasa, PreconditionedBy };

std::string_view to_string(NodeKind kind);
std::string_view to_string(LinkKind kind);

using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using ParamMap = std::map<std::string, Scalar, std::less<>>;
using GridMap = std::map<std::string, std::vector<double>, std::less<>>;

std::string scalar_to_string(const Scalar& value);

struct KnowledgeNode {
    std::string id;
    NodeKind kind = NodeKind::Abstract;
    std::optional<std::string> impl_key;
    ParamMap params;
    GridMap hyperparams;
    std::optional<std::string> category;

    double param_double(std::string_view key, double fallback) const;
    std::int64_t param_int(std::string_view key, std::int64_t fallback) const;
    std::string param_string(std::string_view key, std::string_view fallback) const;
    bool has_param(std::string_view key) const { return params.find(key) != params.end(); }

    bool operator==(const KnowledgeNode&) const = default;
};

struct Link {
    std::string src;
    std::string dst;
    LinkKind kind = LinkKind::Isa;

    bool operator==(const Link&) const = default;
};

// Implementation keys a graph may reference. Empty catalog disables the check.
struct ImplCatalog {
    std::set<std::string, std::less<>> operations;
    std::set<std::string, std::less<>> predicates;

    bool empty() const { return operations.empty() && predicates.empty(); }
};

inline const std::set<std::string, std::less<>> kPreconditionCategories = {"data", "input",
                                                                           "structural"};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Validates and indexes; throws ValidationError listing every violation.
    static KnowledgeGraph build(std::vector<KnowledgeNode> nodes, std::vector<Link> links,
                                const ImplCatalog& catalog = {});

    const KnowledgeNode& node(std::string_view id) const;
    const KnowledgeNode* find(std::string_view id) const;

    const std::map<std::string, KnowledgeNode, std::less<>>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }

    // Node carrying `symbol = "<name>"` in its params (FSM input binding).
    std::optional<std::string> node_for_symbol(std::string_view symbol) const;

    // Direct ISA children (nodes whose ISA link points at `id`), sorted.
    const std::vector<std::string>& isa_children(std::string_view id) const;
    const std::vector<std::string>& precondition_ids(std::string_view op) const;
    const std::vector<std::string>& hasa_targets(std::string_view type) const;

    bool operator==(const KnowledgeGraph& other) const {
        return nodes_ == other.nodes_ && links_ == other.links_;
    }

private:
    std::map<std::string, KnowledgeNode, std::less<>> nodes_;
    std::vector<Link> links_;
    std::map<std::string, std::vector<std::string>, std::less<>> isa_children_;
    std::map<std::string, std::vector<std::string>, std::less<>> preconditions_;
    std::map<std::string, std::vector<std::string>, std::less<>> hasa_;
};

// Returns every invariant violation; empty when the graph is valid.
std::vector<std::string> validate_graph(const std::vector<KnowledgeNode>& nodes,
                                        const std::vector<Link>& links,
                                        const ImplCatalog& catalog = {});

KnowledgeGraph load_kb(const std::filesystem::path& path, const ImplCatalog& catalog = {});
KnowledgeGraph load_kb_from_string(std::string_view text, const ImplCatalog& catalog = {},
                                   std::string_view origin = "<string>");
std::string to_toml(const KnowledgeGraph& graph);

// Operation nodes reachable from `abstract_id` through reversed ISA links,
// sorted lexicographically.
std::vector<std::string> operation_descendants(const KnowledgeGraph& g,
                                               std::string_view abstract_id);

std::vector<const KnowledgeNode*> preconditions_of(const KnowledgeGraph& g, std::string_view op);

// slot (component node id) -> operation descendants of that component
std::map<std::string, std::vector<std::string>> components_for_feature(
    const KnowledgeGraph& g, std::string_view feature_type);

} // namespace kdsynth
