#pragma once
// JSON report of a pipeline space; summaries come from a finished engine or
// from replaying its trace.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdsynth/ml/learners.hpp"
#include "kdsynth/pipeline_synthesis.hpp"
#include "kdsynth/trace.hpp"

namespace kdsynth {

struct PipelineSummary {
    std::string id;
    std::vector<std::string> ops;
    std::map<std::string, ml::Hyperparams> hyperparams; // per trained node
    std::optional<ml::Metrics> metrics;
    std::vector<std::string> flags;
    std::vector<std::string> columns; // final data columns
    std::optional<std::string> error; // error kind

    bool operator==(const PipelineSummary&) const = default;
};

struct ReportConfig {
    std::vector<std::string> sequence;
    std::vector<std::string> disabled;
    std::uint64_t seed = 0;
    std::uint64_t theoretical_max = 0;
    std::map<std::string, double> thresholds; // precondition id -> threshold
};

std::vector<PipelineSummary> summarize(const PipelineSpace& space);

// Rebuilds the final pipelines from REPLY events and their results from
// EXEC / HPO events.
std::vector<PipelineSummary> replay(const std::vector<TraceEvent>& events);

ReportConfig report_config(const std::vector<InputSymbol>& sequence, const KnowledgeGraph& kb,
                           const CategoryToggles& toggles, std::uint64_t seed);

nlohmann::json render_report(const std::vector<PipelineSummary>& pipelines, const ReportConfig& config);
std::string report_text(const nlohmann::json& report);

struct LoglossStats {
    std::size_t trained = 0;
    std::optional<double> mean;
    std::optional<double> stddev; // sample (n - 1)
};
LoglossStats logloss_stats(const std::vector<PipelineSummary>& pipelines);

// Rounds to 6 significant digits.
double round6(double value);

} // namespace kdsynth
