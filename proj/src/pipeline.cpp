#include "kdsynth/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "kdsynth/feature_synthesis.hpp"
#include "kdsynth/synthesis_data.hpp"

namespace kdsynth {

bool Pipeline::contains(std::string_view node) const {
    return std::any_of(ops.begin(), ops.end(), [&](const PipelineOp& op) { return op.node == node; });
}

std::string pipeline_id(const std::vector<PipelineOp>& ops, std::size_t count) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (std::size_t i = 0; i < count && i < ops.size(); ++i) {
        for (char c : ops[i].node) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : key) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = master ^ (h + 0x9e3779b97f4a7c15ULL + (master << 6) + (master >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SynthesisData SynthesisData::pipeline_step(std::string symbol, std::string node, const Pipeline& pipe) {
    SynthesisData sd;
    sd.mode = SynthesisMode::PipelineStep;
    sd.input_symbol = std::move(symbol);
    sd.symbol_node = std::move(node);
    sd.pipeline = &pipe;
    sd.data_output = pipe.cached_output.get();
    return sd;
}

SynthesisData SynthesisData::feature_step(std::string feature_type, const TableData& tables, std::string column) {
    SynthesisData sd;
    sd.mode = SynthesisMode::FeatureStep;
    sd.feature_type = std::move(feature_type);
    sd.table_data = &tables;
    sd.column = std::move(column);
    return sd;
}

std::pair<std::string, std::string> SynthesisData::trace_context() const {
    if (mode == SynthesisMode::PipelineStep) return {"pipe", pipeline ? pipeline->id : "-"};
    std::string table = table_data ? table_data->current : "-";
    return {"ctx", table + "/" + column.value_or("-")};
}

} // namespace kdsynth
