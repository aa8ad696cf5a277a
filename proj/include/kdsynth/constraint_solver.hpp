#pragma once
// Exactly-one-per-group programs whose variables are forced by precondition
// literals, and the query protocol of the knowledge system built on them.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kdsynth/knowledge_graph.hpp"
#include "kdsynth/registry.hpp"
#include "kdsynth/synthesis_data.hpp"
#include "kdsynth/trace.hpp"

namespace kdsynth {

class TraceSink;

struct CategoryToggles {
    std::set<std::string, std::less<>> disabled;

    bool enabled(std::string_view category) const { return !disabled.contains(category); }
    static CategoryToggles all_on() { return {}; }
};

struct BoolVar {
    int symbol = 0;
    std::string node;
    int group = 0;
};

struct ConstraintProgram {
    std::vector<BoolVar> vars;
    std::vector<bool> literal;           // s = s AND r, one r per var
    std::vector<std::vector<int>> groups; // exactly-one constraints (var indices)

    int add_group();
    int add_var(int group, std::string node, bool literal_value);
};

using Assignment = std::vector<bool>; // one value per var

bool satisfies(const ConstraintProgram& program, const Assignment& assignment);

// All satisfying assignments, as one selected var index per group, ordered
// lexicographically by group then by position within the group.
std::vector<std::vector<int>> solve(const ConstraintProgram& program);

struct PreconditionVerdict {
    bool value = true;
    bool disabled = false;
};

// Disabled categories evaluate to true without running the predicate.
PreconditionVerdict evaluate_precondition(const KnowledgeNode& precondition,
                                          const KnowledgeNode& candidate, const SynthesisData& sd,
                                          const CategoryToggles& toggles,
                                          const Registry& registry = builtin_registry());

struct KsReply {
    std::vector<std::string> groups;              // symbol node or component slots
    std::vector<std::vector<std::string>> tuples; // one node id per group
    std::map<std::string, const KnowledgeNode*, std::less<>> nodes;

    bool empty() const { return tuples.empty(); }
};

struct CandidateGroup {
    std::string name;
    std::vector<std::string> nodes;
};

KsReply build_and_solve_csp(const KnowledgeGraph& g, const SynthesisData& sd,
                            const std::vector<CandidateGroup>& node_lists,
                            const CategoryToggles& toggles, const Registry& registry,
                            TraceSink* trace);

class KnowledgeSystem {
public:
    KnowledgeSystem(const KnowledgeGraph& graph, CategoryToggles toggles,
                    const Registry& registry = builtin_registry(), TraceSink* trace = nullptr)
        : graph_(&graph), toggles_(std::move(toggles)), registry_(&registry), trace_(trace) {}

    // Emits QUERY, PRECOND..., REPLY.
    KsReply query(const SynthesisData& sd, const Fields& extra = {}) const;

    const KnowledgeGraph& graph() const { return *graph_; }
    const CategoryToggles& toggles() const { return toggles_; }
    const Registry& registry() const { return *registry_; }
    TraceSink* trace() const { return trace_; }

private:
    const KnowledgeGraph* graph_;
    CategoryToggles toggles_;
    const Registry* registry_;
    TraceSink* trace_;
};

} // namespace kdsynth
