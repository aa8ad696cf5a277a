#pragma once
// A partial or complete pipeline: operation-node instances plus cached results.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kdsynth/dataset.hpp"
#include "kdsynth/knowledge_graph.hpp"
#include "kdsynth/ml/learners.hpp"

namespace kdsynth {

struct PipelineOp {
    std::string node;
    std::string impl;
    std::string symbol; // FSM input symbol that produced it, e.g. "o_Dr"
    ParamMap params;
    ml::Hyperparams hyperparams; // chosen by grid search, if any
};

struct Pipeline {
    std::string id;
    std::vector<PipelineOp> ops;
    std::shared_ptr<const Dataset> cached_output;
    std::shared_ptr<const ml::TrainedModel> model;
    std::optional<ml::Metrics> metrics;
    std::set<std::string> flags;
    std::optional<std::string> error;

    bool contains(std::string_view node) const;
    const PipelineOp* last() const { return ops.empty() ? nullptr : &ops.back(); }
};

// 64-bit FNV-1a over the first `count` op ids, as 16 hex digits.
std::string pipeline_id(const std::vector<PipelineOp>& ops, std::size_t count);
inline std::string pipeline_id(const std::vector<PipelineOp>& ops) {
    return pipeline_id(ops, ops.size());
}

// Seed stream for work done on behalf of `key` (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::string_view key);

} // namespace kdsynth
