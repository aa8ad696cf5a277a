#pragma once
// Shared fixtures for the test binaries.

#include <filesystem>

#include "kdsynth/feature_synthesis.hpp"
#include "kdsynth/knowledge_graph.hpp"
#include "kdsynth/registry.hpp"

namespace kdsynth::test {

inline std::filesystem::path source_dir() { return KDSYNTH_SOURCE_DIR; }

inline const KnowledgeGraph& circles_kb() {
    static const KnowledgeGraph kb =
        load_kb(source_dir() / "kb" / "pipeline_circles.toml", pipeline_catalog());
    return kb;
}

inline const KnowledgeGraph& xor_kb() {
    static const KnowledgeGraph kb = load_kb(source_dir() / "kb" / "pipeline_xor.toml", pipeline_catalog());
    return kb;
}

inline const KnowledgeGraph& feature_kb() {
    static const KnowledgeGraph kb = load_kb(source_dir() / "kb" / "features.toml", feature_catalog());
    return kb;
}

} // namespace kdsynth::test
