#pragma once
// impl_key -> implementation tables for pipeline operations and preconditions.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "kdsynth/knowledge_graph.hpp"
#include "kdsynth/pipeline.hpp"
#include "kdsynth/synthesis_data.hpp"

namespace kdsynth {

class KnowledgeSystem;
class TraceSink;

struct ExecContext {
    const KnowledgeNode& node;
    const Dataset* source = nullptr;     // input of load_data
    std::uint64_t seed = 0;              // derived from (master seed, parent pipeline)
    std::uint64_t master_seed = 0;
    const KnowledgeSystem* features = nullptr; // feature KB for dfs_op
    bool compute_feature_values = true;
    TraceSink* trace = nullptr;
};

struct PredicateContext {
    const KnowledgeNode& precondition;
    const KnowledgeNode& candidate;
    const SynthesisData& data;
};

// Operates on the successor pipeline, whose last op is ctx.node.
using OperationFn = std::function<void(const ExecContext&, Pipeline&)>;
using PredicateFn = std::function<bool(const PredicateContext&)>;

class Registry {
public:
    void add_operation(std::string key, OperationFn fn);
    void add_predicate(std::string key, PredicateFn fn);

    const OperationFn& operation(std::string_view key) const;
    const PredicateFn& predicate(std::string_view key) const;
    bool has_operation(std::string_view key) const;
    bool has_predicate(std::string_view key) const;

    ImplCatalog catalog() const;

private:
    std::map<std::string, OperationFn, std::less<>> operations_;
    std::map<std::string, PredicateFn, std::less<>> predicates_;
};

const Registry& builtin_registry();

// Catalog for pipeline KBs.
ImplCatalog pipeline_catalog();

} // namespace kdsynth
