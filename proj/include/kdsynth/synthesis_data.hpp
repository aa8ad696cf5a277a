#pragma once
// Snapshot handed to the knowledge system with every query.

#include <optional>
#include <string>

#include "kdsynth/dataset.hpp"
#include "kdsynth/pipeline.hpp"

namespace kdsynth {

struct TableData;

enum class SynthesisMode { PipelineStep, FeatureStep };

struct SynthesisData {
    SynthesisMode mode = SynthesisMode::PipelineStep;

    // pipeline mode
    std::optional<std::string> input_symbol; // e.g. "o_Sm"
    std::optional<std::string> symbol_node;  // KB node bound to the symbol
    const Pipeline* pipeline = nullptr;
    const Dataset* data_output = nullptr;

    // feature mode
    std::optional<std::string> feature_type;
    const TableData* table_data = nullptr;
    std::optional<std::string> column;

    static SynthesisData pipeline_step(std::string symbol, std::string node, const Pipeline& pipe);
    static SynthesisData feature_step(std::string feature_type, const TableData& tables,
                                      std::string column);

    // "pipe" / "ctx" trace key and value
    std::pair<std::string, std::string> trace_context() const;
};

} // namespace kdsynth
