#include "kdsynth/pipeline_synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "kdsynth/errors.hpp"

namespace kdsynth {

namespace {

constexpr std::pair<InputSymbol, std::string_view> kSymbolNames[] = {
    {InputSymbol::o_Ld, "o_Ld"}, {InputSymbol::o_Pd, "o_Pd"},   {InputSymbol::o_Fd, "o_Fd"},
    {InputSymbol::o_Dr, "o_Dr"}, {InputSymbol::o_DFS, "o_DFS"}, {InputSymbol::o_Sm, "o_Sm"},
    {InputSymbol::o_Se, "o_Se"}, {InputSymbol::o_M, "o_M"},     {InputSymbol::o_E, "o_E"},
};

std::string trim(std::string s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && sp(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && sp(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

} // namespace

std::string_view to_string(FsmState state) {
    switch (state) {
    case FsmState::S_phi: return "S_phi";
    case FsmState::S_D: return "S_D";
    case FsmState::S_Dm: return "S_Dm";
    case FsmState::S_M: return "S_M";
    case FsmState::S_Me: return "S_Me";
    }
    return "?";
}

std::string_view to_string(InputSymbol symbol) {
    for (const auto& [s, name] : kSymbolNames)
        if (s == symbol) return name;
    return "?";
}

std::optional<InputSymbol> parse_symbol(std::string_view text) {
    for (const auto& [s, name] : kSymbolNames)
        if (name == text) return s;
    return std::nullopt;
}

bool is_accepting(FsmState state) { return state != FsmState::S_phi; }

bool is_executable(InputSymbol symbol) {
    return symbol != InputSymbol::o_Sm && symbol != InputSymbol::o_Se;
}

std::optional<FsmState> try_next(FsmState state, InputSymbol o) {
    using S = FsmState;
    using I = InputSymbol;
    switch (state) {
    case S::S_phi:
        if (o == I::o_Ld) return S::S_D;
        break;
    case S::S_D:
        if (o == I::o_Pd || o == I::o_Fd || o == I::o_Dr || o == I::o_DFS || o == I::o_Se) return S::S_D;
        if (o == I::o_Sm) return S::S_Dm;
        break;
    case S::S_Dm:
        if (o == I::o_Fd || o == I::o_Dr || o == I::o_DFS || o == I::o_Se) return S::S_Dm;
        if (o == I::o_M) return S::S_M;
        break;
    case S::S_M:
        if (o == I::o_E) return S::S_Me;
        break;
    case S::S_Me:
        break;
    }
    return std::nullopt;
}

FsmState fsm_next(FsmState state, InputSymbol symbol) {
    auto next = try_next(state, symbol);
    if (!next)
        throw InvalidTransition("no transition from " + std::string(to_string(state)) + " on " +
                                std::string(to_string(symbol)));
    return *next;
}

FsmState check_sequence(const std::vector<InputSymbol>& symbols) {
    FsmState s = FsmState::S_phi;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        auto next = try_next(s, symbols[i]);
        if (!next)
            throw RejectedInput(i, std::string(to_string(symbols[i])),
                                "no transition from " + std::string(to_string(s)));
        s = *next;
    }
    if (!is_accepting(s)) throw RejectedInput(symbols.size(), "<end>", "sequence ends in a non-accepting state");
    return s;
}

std::vector<InputSymbol> parse_sequence(std::istream& in, const std::string& origin) {
    std::vector<InputSymbol> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto sym = parse_symbol(line);
        if (!sym) throw RejectedInput(out.size(), line, origin + ": unknown input symbol");
        out.push_back(*sym);
    }
    return out;
}

std::vector<InputSymbol> parse_sequence(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_sequence(in);
}

std::vector<InputSymbol> read_sequence(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sequence file '" + path.string() + "'");
    return parse_sequence(in, path.string());
}

std::string symbol_node(const KnowledgeGraph& kb, InputSymbol symbol) {
    auto id = kb.node_for_symbol(to_string(symbol));
    if (!id) throw UnknownNode(std::string(to_string(symbol)));
    return *id;
}

std::uint64_t theoretical_max(const std::vector<InputSymbol>& symbols, const KnowledgeGraph& kb) {
    check_sequence(symbols);
    std::uint64_t total = 1;
    for (auto s : symbols) {
        const auto& node = kb.node(symbol_node(kb, s));
        // `branching = false` marks a choice fixed by an earlier marker
        bool branching = true;
        if (auto it = node.params.find("branching"); it != node.params.end())
            if (auto b = std::get_if<bool>(&it->second)) branching = *b;
        if (node.kind == NodeKind::Abstract && branching) total *= operation_descendants(kb, node.id).size();
    }
    return total;
}

std::string error_kind(const std::exception& e) {
#define KDSYNTH_KIND(T) \
    if (dynamic_cast<const T*>(&e)) return #T;
    KDSYNTH_KIND(TooFewFeatures)
    KDSYNTH_KIND(MissingContext)
    KDSYNTH_KIND(SingleClass)
    KDSYNTH_KIND(DegenerateData)
    KDSYNTH_KIND(EmptyData)
    KDSYNTH_KIND(EigenFailure)
    KDSYNTH_KIND(NoSplit)
    KDSYNTH_KIND(SizeTooLarge)
    KDSYNTH_KIND(NonNumeric)
    KDSYNTH_KIND(MissingColumn)
    KDSYNTH_KIND(MissingLink)
    KDSYNTH_KIND(UnknownPredicate)
    KDSYNTH_KIND(UnknownOperation)
    KDSYNTH_KIND(UnknownComponent)
    KDSYNTH_KIND(SlotMismatch)
    KDSYNTH_KIND(UnknownNode)
    KDSYNTH_KIND(KindMismatch)
    KDSYNTH_KIND(EmptySlot)
    KDSYNTH_KIND(IoError)
    KDSYNTH_KIND(Error)
#undef KDSYNTH_KIND
    return "InternalError";
}

SynthesisEngine::SynthesisEngine(const KnowledgeGraph& pipeline_kb, const Dataset& data, EngineConfig config,
                                 const KnowledgeGraph* feature_kb, TraceSink* trace, const Registry& registry)
    : kb_(&pipeline_kb), data_(&data), config_(std::move(config)), registry_(&registry), trace_(trace),
      ks_(pipeline_kb, config_.toggles, registry, trace) {
    if (feature_kb) feature_ks_.emplace(*feature_kb, config_.toggles, registry, trace);
    Pipeline root;
    root.id = pipeline_id(root.ops);
    space_.pipelines.push_back(std::move(root));
}

void SynthesisEngine::run_op(Pipeline& p, std::size_t index, TraceSink* trace, const std::string& parent_id) {
    const auto& op = p.ops.at(index);
    const auto& node = kb_->node(op.node);
    Fields f{{"pipe", p.id}, {"parent", parent_id}, {"node", node.id}};
    if (p.error) {
        if (trace) {
            f.emplace_back("status", "skipped");
            trace->emit(EventKind::Exec, std::move(f));
        }
        return;
    }
    ExecContext ctx{node,
                    data_,
                    derive_seed(config_.seed, pipeline_id(p.ops, index)),
                    config_.seed,
                    feature_ks_ ? &*feature_ks_ : nullptr,
                    config_.compute_feature_values,
                    trace};
    std::string status = "ok";
    std::string kind;
    try {
        registry_->operation(*node.impl_key)(ctx, p);
    } catch (const Error& e) {
        status = "error";
        kind = error_kind(e);
        p.error = kind + ": " + e.what();
        p.flags.insert("exec_error");
        p.cached_output.reset();
        p.model.reset();
        p.metrics.reset();
    }
    if (!trace) return;
    f.emplace_back("status", status);
    if (!kind.empty()) f.emplace_back("error", kind);
    if (p.cached_output) {
        f.emplace_back("rows", std::to_string(p.cached_output->rows()));
        f.emplace_back("cols", p.cached_output->columns.empty() ? "-" : join(p.cached_output->columns));
    }
    if (p.metrics) {
        f.emplace_back("logloss", format_exact(p.metrics->logloss));
        f.emplace_back("accuracy", format_exact(p.metrics->accuracy));
    }
    if (!p.flags.empty()) f.emplace_back("flags", join({p.flags.begin(), p.flags.end()}));
    trace->emit(EventKind::Exec, std::move(f));
}

void SynthesisEngine::execute(Pipeline& p, const Pipeline& parent, bool emit) {
    TraceSink* trace = emit ? trace_ : nullptr;
    if (!config_.reexecute_full) {
        run_op(p, p.ops.size() - 1, trace, parent.id);
        return;
    }
    // rebuild every executable prefix from the raw input
    Pipeline work;
    work.id = pipeline_id(work.ops);
    for (std::size_t i = 0; i < p.ops.size(); ++i) {
        std::string prev = work.id;
        work.ops.push_back(p.ops[i]);
        work.id = pipeline_id(work.ops);
        auto sym = parse_symbol(p.ops[i].symbol);
        if (sym && is_executable(*sym)) run_op(work, i, i + 1 == p.ops.size() ? trace : nullptr, prev);
    }
    p = std::move(work);
}

TransitionSummary SynthesisEngine::transition(InputSymbol symbol) {
    FsmState next_state = fsm_next(space_.state, symbol);
    const std::string sym(to_string(symbol));
    const std::string node_id = symbol_node(*kb_, symbol);
    const std::size_t mark = trace_ ? trace_->size() : 0;

    TransitionSummary summary;
    summary.symbol = symbol;
    std::set<std::string> replied;
    std::vector<Pipeline> next;
    const Fields extra{{"step", std::to_string(space_.consumed.size())}, {"sym", sym}};
    for (const auto& pipe : space_.pipelines) {
        auto sd = SynthesisData::pipeline_step(sym, node_id, pipe);
        KsReply reply;
        std::string reason;
        try {
            reply = ks_.query(sd, extra);
            if (reply.empty()) reason = "empty_reply";
        } catch (const Error& e) {
            reason = error_kind(e);
        }
        if (!reason.empty()) {
            ++summary.pruned;
            if (trace_) {
                Fields f{{"pipe", pipe.id}};
                f.insert(f.end(), extra.begin(), extra.end());
                f.emplace_back("reason", reason);
                trace_->emit(EventKind::Prune, std::move(f));
            }
            continue;
        }
        for (const auto& tuple : reply.tuples) {
            const auto& node = *reply.nodes.at(tuple.at(0));
            replied.insert(node.id);
            Pipeline child = pipe;
            child.ops.push_back(PipelineOp{node.id, node.impl_key.value_or(""), sym, node.params, {}});
            child.id = pipeline_id(child.ops);
            if (is_executable(symbol)) execute(child, pipe, true);
            next.push_back(std::move(child));
        }
    }
    space_.pipelines = std::move(next);
    space_.consumed.push_back(symbol);
    space_.state = next_state;

    summary.count = space_.pipelines.size();
    summary.replied.assign(replied.begin(), replied.end());
    if (trace_) {
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& ev : trace_->since(mark)) {
            if (ev.kind != EventKind::Precond || !ev.get("pipe") || ev.value("verdict") != "false") continue;
            if (seen.emplace(ev.value("node"), ev.value("pre")).second)
                summary.blocked.push_back(Blocked{ev.value("node"), ev.value("pre")});
        }
    }
    return summary;
}

void SynthesisEngine::run(const std::vector<InputSymbol>& symbols) {
    // validate the continuation from the current state first
    FsmState s = space_.state;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        auto n = try_next(s, symbols[i]);
        if (!n)
            throw RejectedInput(space_.consumed.size() + i, std::string(to_string(symbols[i])),
                                "no transition from " + std::string(to_string(s)));
        s = *n;
    }
    if (!is_accepting(s)) throw RejectedInput(symbols.size(), "<end>", "sequence ends in a non-accepting state");
    for (auto sym : symbols) transition(sym);
}

PipelineSpace run_synthesis(const std::vector<InputSymbol>& symbols, const KnowledgeGraph& kb, const Dataset& data,
                            const EngineConfig& config, const KnowledgeGraph* feature_kb, TraceSink* trace) {
    SynthesisEngine engine(kb, data, config, feature_kb, trace);
    engine.run(symbols);
    if (trace) trace->close();
    return engine.space();
}

} // namespace kdsynth
