#include "kdsynth/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>

#include "kdsynth/errors.hpp"

namespace kdsynth {

double round6(double value) {
    if (!std::isfinite(value)) return value;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return std::strtod(buf, nullptr);
}

std::vector<PipelineSummary> summarize(const PipelineSpace& space) {
    std::vector<PipelineSummary> out;
    for (const auto& p : space.pipelines) {
        PipelineSummary s;
        s.id = p.id;
        for (const auto& op : p.ops) {
            s.ops.push_back(op.node);
            if (!op.hyperparams.empty()) s.hyperparams[op.node] = op.hyperparams;
        }
        s.metrics = p.metrics;
        s.flags.assign(p.flags.begin(), p.flags.end());
        if (p.cached_output) s.columns = p.cached_output->columns;
        if (p.error) s.error = p.error->substr(0, p.error->find(':'));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<PipelineSummary> replay(const std::vector<TraceEvent>& events) {
    // generation k holds the pipelines produced by step k
    std::vector<PipelineSummary> current{PipelineSummary{pipeline_id({}), {}, {}, {}, {}, {}, {}}};
    std::vector<PipelineSummary> next;
    std::unordered_map<std::string, std::size_t> current_index{{current[0].id, 0}}, next_index;
    long step = -1;

    auto advance = [&] {
        current = std::move(next);
        current_index = std::move(next_index);
        next.clear();
        next_index.clear();
    };

    for (const auto& ev : events) {
        if (!ev.get("pipe")) continue; // feature-mode events
        const std::string pipe = ev.value("pipe");
        if (ev.kind == EventKind::Query || ev.kind == EventKind::Prune) {
            long s = std::strtol(ev.value("step").c_str(), nullptr, 10);
            if (s != step) {
                if (step >= 0) advance();
                step = s;
            }
        } else if (ev.kind == EventKind::Reply) {
            auto it = current_index.find(pipe);
            if (it == current_index.end()) throw ParseError("trace replay: REPLY for unknown pipeline " + pipe);
            for (const auto& node : split_list(ev.value("nodes"), ',')) {
                PipelineSummary child = current[it->second];
                std::vector<PipelineOp> ops;
                for (const auto& o : child.ops) ops.push_back(PipelineOp{o, {}, {}, {}, {}});
                ops.push_back(PipelineOp{node, {}, {}, {}, {}});
                child.ops.push_back(node);
                child.id = pipeline_id(ops);
                next_index[child.id] = next.size();
                next.push_back(std::move(child));
            }
        } else if (ev.kind == EventKind::Exec || ev.kind == EventKind::Hpo) {
            auto it = next_index.find(pipe);
            if (it == next_index.end()) throw ParseError("trace replay: result for unknown pipeline " + pipe);
            auto& s = next[it->second];
            if (ev.kind == EventKind::Hpo) {
                ml::Hyperparams hp;
                for (const auto& [k, v] : ev.fields)
                    if (k.rfind("hp.", 0) == 0) hp[k.substr(3)] = std::strtod(v.c_str(), nullptr);
                s.hyperparams[ev.value("node")] = hp;
                continue;
            }
            const auto status = ev.value("status");
            if (status == "skipped") continue;
            if (status == "error") {
                s.error = ev.value("error");
                s.columns.clear();
                s.metrics.reset();
            }
            if (ev.get("cols")) s.columns = split_list(ev.value("cols"), ',');
            if (ev.get("logloss"))
                s.metrics = ml::Metrics{std::strtod(ev.value("logloss").c_str(), nullptr),
                                        std::strtod(ev.value("accuracy").c_str(), nullptr)};
            s.flags = split_list(ev.value("flags"), ',');
        }
    }
    if (step >= 0) advance();
    return current;
}

ReportConfig report_config(const std::vector<InputSymbol>& sequence, const KnowledgeGraph& kb,
                           const CategoryToggles& toggles, std::uint64_t seed) {
    ReportConfig c;
    for (auto s : sequence) c.sequence.emplace_back(to_string(s));
    c.disabled.assign(toggles.disabled.begin(), toggles.disabled.end());
    c.seed = seed;
    c.theoretical_max = theoretical_max(sequence, kb);
    for (const auto& [id, n] : kb.nodes())
        if (n.kind == NodeKind::Precondition && n.has_param("threshold"))
            c.thresholds[id] = n.param_double("threshold", 0);
    return c;
}

LoglossStats logloss_stats(const std::vector<PipelineSummary>& pipelines) {
    LoglossStats st;
    double sum = 0;
    std::vector<double> values;
    for (const auto& p : pipelines)
        if (p.metrics) values.push_back(p.metrics->logloss);
    st.trained = values.size();
    if (values.empty()) return st;
    for (double v : values) sum += v;
    double mean = sum / double(values.size());
    st.mean = mean;
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values) ss += (v - mean) * (v - mean);
        st.stddev = std::sqrt(ss / double(values.size() - 1));
    }
    return st;
}

nlohmann::json render_report(const std::vector<PipelineSummary>& pipelines, const ReportConfig& config) {
    using nlohmann::json;
    json report;
    json cfg;
    cfg["sequence"] = config.sequence;
    cfg["disabled_categories"] = config.disabled;
    cfg["seed"] = config.seed;
    json thresholds = json::object();
    for (const auto& [k, v] : config.thresholds) thresholds[k] = round6(v);
    cfg["thresholds"] = thresholds;
    report["config"] = cfg;

    json list = json::array();
    for (const auto& p : pipelines) {
        json e;
        e["id"] = p.id;
        e["ops"] = p.ops;
        json hp = json::object();
        for (const auto& [node, values] : p.hyperparams) {
            json h = json::object();
            for (const auto& [k, v] : values) h[k] = round6(v);
            hp[node] = h;
        }
        e["hyperparams"] = hp;
        e["flags"] = p.flags;
        e["columns"] = p.columns;
        if (p.metrics) {
            e["logloss"] = round6(p.metrics->logloss);
            e["accuracy"] = round6(p.metrics->accuracy);
        }
        if (p.error) e["error"] = *p.error;
        list.push_back(std::move(e));
    }
    report["pipelines"] = list;
    report["space"] = {{"count", pipelines.size()}, {"theoretical_max", config.theoretical_max}};

    auto st = logloss_stats(pipelines);
    json stats = {{"trained", st.trained}, {"stddev_kind", "sample"}};
    if (st.mean) stats["mean_logloss"] = round6(*st.mean);
    if (st.stddev) stats["stddev_logloss"] = round6(*st.stddev);
    report["stats"] = stats;
    return report;
}

std::string report_text(const nlohmann::json& report) { return report.dump(2) + "\n"; }

} // namespace kdsynth
