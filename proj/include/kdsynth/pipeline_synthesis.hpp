#pragma once
// Control-flow FSM over input symbols and the lockstep pipeline-space expansion.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kdsynth/constraint_solver.hpp"
#include "kdsynth/dataset.hpp"
#include "kdsynth/knowledge_graph.hpp"
#include "kdsynth/pipeline.hpp"
#include "kdsynth/trace.hpp"

namespace kdsynth {

enum class FsmState { S_phi, S_D, S_Dm, S_M, S_Me };
enum class InputSymbol { o_Ld, o_Pd, o_Fd, o_Dr, o_DFS, o_Sm, o_Se, o_M, o_E };

inline constexpr InputSymbol kAllSymbols[] = {
    InputSymbol::o_Ld, InputSymbol::o_Pd,  InputSymbol::o_Fd, InputSymbol::o_Dr, InputSymbol::o_DFS,
    InputSymbol::o_Sm, InputSymbol::o_Se, InputSymbol::o_M,  InputSymbol::o_E,
};

std::string_view to_string(FsmState state);
std::string_view to_string(InputSymbol symbol);
std::optional<InputSymbol> parse_symbol(std::string_view text);

bool is_accepting(FsmState state);
bool is_executable(InputSymbol symbol); // markers: o_Sm, o_Se

// Throws InvalidTransition for pairs missing from the state diagram.
FsmState fsm_next(FsmState state, InputSymbol symbol);
std::optional<FsmState> try_next(FsmState state, InputSymbol symbol);

// Throws RejectedInput at the first symbol without a transition, or at the
// end when the final state is not accepting.
FsmState check_sequence(const std::vector<InputSymbol>& symbols);

// One symbol per line, '#' starts a comment.
std::vector<InputSymbol> parse_sequence(std::istream& in, const std::string& origin = "<sequence>");
std::vector<InputSymbol> parse_sequence(std::string_view text);
std::vector<InputSymbol> read_sequence(const std::filesystem::path& path);

// KB node bound to the symbol via `params.symbol`; UnknownNode when unbound.
std::string symbol_node(const KnowledgeGraph& kb, InputSymbol symbol);

// Product of candidate counts per symbol; symbols bound to an operation node or
// to an abstract node with `branching = false` count once.
std::uint64_t theoretical_max(const std::vector<InputSymbol>& symbols, const KnowledgeGraph& kb);

struct PipelineSpace {
    std::vector<Pipeline> pipelines;
    std::vector<InputSymbol> consumed;
    FsmState state = FsmState::S_phi;
};

struct EngineConfig {
    CategoryToggles toggles;
    std::uint64_t seed = 0;
    bool reexecute_full = false;
    bool compute_feature_values = true;
};

struct Blocked {
    std::string node;
    std::string precondition;
};

struct TransitionSummary {
    InputSymbol symbol = InputSymbol::o_Ld;
    std::size_t count = 0;
    std::size_t pruned = 0;
    std::vector<std::string> replied;  // distinct replied node ids
    std::vector<Blocked> blocked;      // distinct (node, precondition) false verdicts
};

class SynthesisEngine {
public:
    SynthesisEngine(const KnowledgeGraph& pipeline_kb, const Dataset& data, EngineConfig config,
                    const KnowledgeGraph* feature_kb = nullptr, TraceSink* trace = nullptr,
                    const Registry& registry = builtin_registry());
    // The engine keeps references; temporaries would dangle.
    SynthesisEngine(const KnowledgeGraph&, Dataset&&, EngineConfig, const KnowledgeGraph* = nullptr,
                    TraceSink* = nullptr, const Registry& = builtin_registry()) = delete;
    SynthesisEngine(KnowledgeGraph&&, const Dataset&, EngineConfig, const KnowledgeGraph* = nullptr,
                    TraceSink* = nullptr, const Registry& = builtin_registry()) = delete;

    // Throws InvalidTransition and leaves the space unchanged.
    TransitionSummary transition(InputSymbol symbol);
    // Throws RejectedInput before doing any work.
    void run(const std::vector<InputSymbol>& symbols);

    const PipelineSpace& space() const { return space_; }
    void restore(PipelineSpace snapshot) { space_ = std::move(snapshot); }
    const EngineConfig& config() const { return config_; }
    const KnowledgeGraph& kb() const { return *kb_; }

private:
    void execute(Pipeline& p, const Pipeline& parent, bool emit);
    void run_op(Pipeline& p, std::size_t index, TraceSink* trace, const std::string& parent_id);

    const KnowledgeGraph* kb_;
    const Dataset* data_;
    EngineConfig config_;
    const Registry* registry_;
    TraceSink* trace_;
    KnowledgeSystem ks_;
    std::optional<KnowledgeSystem> feature_ks_;
    PipelineSpace space_;
};

PipelineSpace run_synthesis(const std::vector<InputSymbol>& symbols, const KnowledgeGraph& kb,
                            const Dataset& data, const EngineConfig& config,
                            const KnowledgeGraph* feature_kb = nullptr, TraceSink* trace = nullptr);

// Best-effort name of a kdsynth error class, used in traces and reports.
std::string error_kind(const std::exception& e);

} // namespace kdsynth
