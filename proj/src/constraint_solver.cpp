#include "kdsynth/constraint_solver.hpp"

#include "kdsynth/errors.hpp"
#include "kdsynth/trace.hpp"

namespace kdsynth {

int ConstraintProgram::add_group() {
    groups.emplace_back();
    return static_cast<int>(groups.size()) - 1;
}

int ConstraintProgram::add_var(int group, std::string node, bool literal_value) {
    int index = static_cast<int>(vars.size());
    vars.push_back(BoolVar{index, std::move(node), group});
    literal.push_back(literal_value);
    groups.at(static_cast<std::size_t>(group)).push_back(index);
    return index;
}

bool satisfies(const ConstraintProgram& program, const Assignment& assignment) {
    if (assignment.size() != program.vars.size()) return false;
    for (std::size_t v = 0; v < assignment.size(); ++v)
        if (assignment[v] && !program.literal[v]) return false;
    for (const auto& group : program.groups) {
        int on = 0;
        for (int v : group) on += assignment[static_cast<std::size_t>(v)] ? 1 : 0;
        if (on != 1) return false;
    }
    return true;
}

std::vector<std::vector<int>> solve(const ConstraintProgram& program) {
    // each var is forced to 0 when its literal is false; exactly-one then
    // leaves any single eligible var per group
    std::vector<std::vector<int>> eligible;
    for (const auto& group : program.groups) {
        std::vector<int> ok;
        for (int v : group)
            if (program.literal[static_cast<std::size_t>(v)]) ok.push_back(v);
        if (ok.empty()) return {};
        eligible.push_back(std::move(ok));
    }
    std::vector<std::vector<int>> out;
    if (eligible.empty()) return out;
    std::vector<std::size_t> pos(eligible.size(), 0);
    while (true) {
        std::vector<int> pick(eligible.size());
        for (std::size_t g = 0; g < eligible.size(); ++g) pick[g] = eligible[g][pos[g]];
        out.push_back(std::move(pick));
        std::size_t g = eligible.size();
        while (g > 0) {
            --g;
            if (++pos[g] < eligible[g].size()) break;
            pos[g] = 0;
            if (g == 0) return out;
        }
    }
}

PreconditionVerdict evaluate_precondition(const KnowledgeNode& precondition,
                                          const KnowledgeNode& candidate, const SynthesisData& sd,
                                          const CategoryToggles& toggles, const Registry& registry) {
    if (!precondition.impl_key) throw UnknownPredicate("precondition '" + precondition.id + "' has no impl");
    const auto& fn = registry.predicate(*precondition.impl_key);
    if (precondition.category && !toggles.enabled(*precondition.category)) return {true, true};
    return {fn(PredicateContext{precondition, candidate, sd}), false};
}

KsReply build_and_solve_csp(const KnowledgeGraph& g, const SynthesisData& sd,
                            const std::vector<CandidateGroup>& node_lists,
                            const CategoryToggles& toggles, const Registry& registry,
                            TraceSink* trace) {
    auto [ctx_key, ctx_value] = sd.trace_context();
    ConstraintProgram program;
    KsReply reply;
    for (const auto& list : node_lists) {
        int group = program.add_group();
        reply.groups.push_back(list.name);
        for (const auto& id : list.nodes) {
            const auto& candidate = g.node(id);
            reply.nodes.emplace(id, &candidate);
            auto pres = preconditions_of(g, id);
            bool r = true;
            for (std::size_t k = 0; k < pres.size(); ++k) {
                const auto& p = *pres[k];
                auto verdict = evaluate_precondition(p, candidate, sd, toggles, registry);
                r = verdict.value;
                if (trace) {
                    Fields f{{ctx_key, ctx_value},
                             {"node", id},
                             {"pre", p.id},
                             {"cat", p.category.value_or("-")},
                             {"verdict", r ? "true" : "false"}};
                    if (!r && k + 1 < pres.size())
                        f.emplace_back("skipped", std::to_string(pres.size() - k - 1));
                    if (verdict.disabled) f.emplace_back("disabled", "true");
                    trace->emit(EventKind::Precond, std::move(f));
                }
                if (!r) break;
            }
            program.add_var(group, id, r);
        }
    }
    for (const auto& sol : solve(program)) {
        std::vector<std::string> tuple;
        for (int v : sol) tuple.push_back(program.vars[static_cast<std::size_t>(v)].node);
        reply.tuples.push_back(std::move(tuple));
    }
    return reply;
}

KsReply KnowledgeSystem::query(const SynthesisData& sd, const Fields& extra) const {
    auto [ctx_key, ctx_value] = sd.trace_context();
    std::vector<CandidateGroup> lists;
    Fields head{{ctx_key, ctx_value}};
    head.insert(head.end(), extra.begin(), extra.end());

    if (sd.mode == SynthesisMode::PipelineStep) {
        if (!sd.symbol_node) throw MissingContext("pipeline query without an input symbol node");
        const auto& node = graph_->node(*sd.symbol_node);
        CandidateGroup group{node.id, {}};
        if (node.kind == NodeKind::Operation)
            group.nodes.push_back(node.id);
        else if (node.kind == NodeKind::Abstract)
            group.nodes = operation_descendants(*graph_, node.id);
        else
            throw KindMismatch("input symbol bound to precondition node '" + node.id + "'");
        lists.push_back(std::move(group));
        head.emplace_back("node", node.id);
    } else {
        if (!sd.feature_type || !sd.column) throw MissingContext("feature query without type or column");
        for (auto& [slot, ops] : components_for_feature(*graph_, *sd.feature_type))
            lists.push_back(CandidateGroup{slot, ops});
        head.emplace_back("type", *sd.feature_type);
    }

    if (trace_) trace_->emit(EventKind::Query, head);
    KsReply reply;
    try {
        reply = build_and_solve_csp(*graph_, sd, lists, toggles_, *registry_, trace_);
    } catch (...) {
        if (trace_) {
            Fields f = head;
            f.emplace_back("nodes", "-");
            f.emplace_back("status", "error");
            trace_->emit(EventKind::Reply, std::move(f));
        }
        throw;
    }
    if (trace_) {
        std::vector<std::string> tuples;
        for (const auto& t : reply.tuples) tuples.push_back(join(t, '+'));
        Fields f = head;
        f.emplace_back("nodes", tuples.empty() ? "-" : join(tuples, ','));
        trace_->emit(EventKind::Reply, std::move(f));
    }
    return reply;
}

} // namespace kdsynth
