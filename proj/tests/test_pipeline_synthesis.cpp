#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>
#include <type_traits>

#include "kdsynth/errors.hpp"
#include "kdsynth/pipeline_synthesis.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kdsynth;
using kdsynth::test::circles_kb;
using kdsynth::test::feature_kb;
using kdsynth::test::source_dir;
using kdsynth::test::oracle_accepts;
using kdsynth::test::random_sequence;

namespace {

using I = InputSymbol;

// One operation per symbol, all bound to a no-op implementation.
KnowledgeGraph stub_kb() {
    std::vector<KnowledgeNode> nodes{{"Root", NodeKind::Abstract, {}, {}, {}, {}}};
    std::vector<Link> links;
    for (auto s : kAllSymbols) {
        std::string id = "Op_" + std::string(to_string(s));
        KnowledgeNode n{id, NodeKind::Operation, "stub", {}, {}, {}};
        n.params.emplace("symbol", std::string(to_string(s)));
        nodes.push_back(n);
        links.push_back({id, "Root", LinkKind::Isa});
    }
    return KnowledgeGraph::build(nodes, links);
}

const Registry& stub_registry() {
    static const Registry reg = [] {
        Registry r;
        r.add_operation("stub", [](const ExecContext&, Pipeline&) {});
        return r;
    }();
    return reg;
}

std::vector<InputSymbol> row_sequence(int row) {
    return read_sequence(source_dir() / "sequences" / ("circles_row" + std::to_string(row) + ".seq"));
}

bool isa_reaches(const KnowledgeGraph& g, const std::string& from, const std::string& to) {
    if (from == to) return true;
    for (const auto& l : g.links())
        if (l.kind == LinkKind::Isa && l.src == from && isa_reaches(g, l.dst, to)) return true;
    return false;
}

} // namespace

TEST_CASE("state diagram transitions") {
    CHECK(fsm_next(FsmState::S_phi, I::o_Ld) == FsmState::S_D);
    for (auto s : {I::o_Pd, I::o_Fd, I::o_Dr, I::o_DFS, I::o_Se})
        CHECK(fsm_next(FsmState::S_D, s) == FsmState::S_D);
    CHECK(fsm_next(FsmState::S_D, I::o_Sm) == FsmState::S_Dm);
    for (auto s : {I::o_Fd, I::o_Dr, I::o_DFS, I::o_Se})
        CHECK(fsm_next(FsmState::S_Dm, s) == FsmState::S_Dm);
    CHECK(fsm_next(FsmState::S_Dm, I::o_M) == FsmState::S_M);
    CHECK(fsm_next(FsmState::S_M, I::o_E) == FsmState::S_Me);
    CHECK_THROWS_AS(fsm_next(FsmState::S_phi, I::o_Pd), InvalidTransition);
    CHECK_THROWS_AS(fsm_next(FsmState::S_Dm, I::o_Pd), InvalidTransition);
    CHECK_THROWS_AS(fsm_next(FsmState::S_D, I::o_M), InvalidTransition);
    CHECK_THROWS_AS(fsm_next(FsmState::S_Me, I::o_E), InvalidTransition);
    CHECK_FALSE(is_accepting(FsmState::S_phi));
    for (auto s : {FsmState::S_D, FsmState::S_Dm, FsmState::S_M, FsmState::S_Me}) CHECK(is_accepting(s));
    CHECK_FALSE(is_executable(I::o_Sm));
    CHECK_FALSE(is_executable(I::o_Se));
    CHECK(is_executable(I::o_M));
}

TEST_CASE("acceptance agrees with the regular expression on 1000 random strings") {
    std::mt19937_64 rng(11);
    int accepted = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto seq = random_sequence(rng);
        bool expected = oracle_accepts(seq);
        bool ok = true;
        try {
            check_sequence(seq);
        } catch (const RejectedInput&) {
            ok = false;
        }
        CHECK(ok == expected);
        accepted += expected;
    }
    CHECK(accepted > 50);
    CHECK(accepted < 950);
}

TEST_CASE("the engine accepts exactly the regular language") {
    auto kb = stub_kb();
    Dataset empty;
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 300; ++trial) {
        auto seq = random_sequence(rng);
        SynthesisEngine engine(kb, empty, {}, nullptr, nullptr, stub_registry());
        bool ok = true;
        try {
            engine.run(seq);
        } catch (const RejectedInput&) {
            ok = false;
            CHECK(engine.space().consumed.empty());
        }
        CHECK(ok == oracle_accepts(seq));
        if (ok) {
            REQUIRE(engine.space().pipelines.size() == 1);
            CHECK(engine.space().pipelines[0].ops.size() == seq.size());
        }
    }
}

TEST_CASE("rejection index") {
    try {
        check_sequence({I::o_Ld, I::o_Sm, I::o_Pd});
        FAIL("accepted");
    } catch (const RejectedInput& e) {
        CHECK(e.index() == 2);
        CHECK(e.symbol() == "o_Pd");
    }
    try {
        check_sequence({});
        FAIL("accepted");
    } catch (const RejectedInput& e) {
        CHECK(e.index() == 0);
    }
}

TEST_CASE("sequence files") {
    auto seq = parse_sequence("# comment\no_Ld\n  o_Pd  # trailing\n\no_Sm\n");
    CHECK(seq == std::vector<InputSymbol>{I::o_Ld, I::o_Pd, I::o_Sm});
    CHECK_THROWS_AS(parse_sequence("o_Ld\nbogus\n"), RejectedInput);
    CHECK_THROWS_AS(read_sequence("/nonexistent/seq"), IoError);
    for (int row = 1; row <= 5; ++row) CHECK_NOTHROW(check_sequence(row_sequence(row)));
    for (auto s : kAllSymbols) CHECK(parse_symbol(to_string(s)) == s);
}

TEST_CASE("theoretical maxima of the reference rows") {
    std::vector<std::uint64_t> expected{3, 9, 9, 27, 81};
    for (int row = 1; row <= 5; ++row)
        CHECK(theoretical_max(row_sequence(row), circles_kb()) == expected[static_cast<std::size_t>(row - 1)]);
}

TEST_CASE("pipeline ids and seeds") {
    std::vector<PipelineOp> ops;
    CHECK(pipeline_id(ops) == "cbf29ce484222325");
    ops.push_back({"LoadData", "load_data", "o_Ld", {}, {}});
    ops.push_back({"Standardize", "standardize", "o_Pd", {}, {}});
    // FNV-1a 64 over "LoadData\nStandardize\n"
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : std::string("LoadData\nStandardize\n")) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    CHECK(pipeline_id(ops) == buf);
    CHECK(pipeline_id(ops, 1) != pipeline_id(ops));
    CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
    CHECK(derive_seed(7, "a") != derive_seed(8, "a"));
    CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
}

TEST_CASE("lockstep, conformance and count bounds on every prefix") {
    auto data = make_circles(7);
    auto seq = row_sequence(4);
    CategoryToggles none;
    none.disabled.insert("data");
    SynthesisEngine all(circles_kb(), data, EngineConfig{{}, 7, false, true}, &feature_kb());
    SynthesisEngine fewer(circles_kb(), data, EngineConfig{none, 7, false, true}, &feature_kb());
    std::vector<InputSymbol> prefix;
    for (auto s : seq) {
        prefix.push_back(s);
        all.transition(s);
        fewer.transition(s);
        auto bound = theoretical_max(prefix, circles_kb());
        CHECK(all.space().pipelines.size() <= fewer.space().pipelines.size());
        CHECK(fewer.space().pipelines.size() <= bound);
        for (const auto* engine : {&all, &fewer}) {
            for (const auto& p : engine->space().pipelines) {
                REQUIRE(p.ops.size() == prefix.size());
                for (std::size_t i = 0; i < prefix.size(); ++i) {
                    CHECK(p.ops[i].symbol == to_string(prefix[i]));
                    CHECK(isa_reaches(circles_kb(), p.ops[i].node, symbol_node(circles_kb(), prefix[i])));
                }
                CHECK(p.id == pipeline_id(p.ops));
            }
        }
    }
    CHECK(all.space().pipelines.size() == 12);
    CHECK(fewer.space().pipelines.size() == 24);
}

TEST_CASE("marker operations keep the parent output") {
    auto data = make_circles(7);
    SynthesisEngine engine(circles_kb(), data, EngineConfig{{}, 7, false, true}, &feature_kb());
    for (auto s : {I::o_Ld, I::o_Pd}) engine.transition(s);
    auto before = engine.space().pipelines.at(0).cached_output;
    REQUIRE(before);
    engine.transition(I::o_Se);
    CHECK(engine.space().pipelines.at(0).cached_output == before);
}

TEST_CASE("invalid transition leaves the space unchanged") {
    auto data = make_circles(7);
    SynthesisEngine engine(circles_kb(), data, EngineConfig{{}, 7, false, true}, &feature_kb());
    engine.transition(I::o_Ld);
    auto ids = engine.space().pipelines.size();
    CHECK_THROWS_AS(engine.transition(I::o_M), InvalidTransition);
    CHECK(engine.space().pipelines.size() == ids);
    CHECK(engine.space().consumed.size() == 1);
    CHECK(engine.space().state == FsmState::S_D);
}

TEST_CASE("full re-execution matches cached execution") {
    auto data = make_circles(7);
    auto seq = row_sequence(2);
    CategoryToggles none;
    none.disabled.insert("data");
    TraceSink cached, full;
    auto a = run_synthesis(seq, circles_kb(), data, EngineConfig{none, 7, false, true}, &feature_kb(), &cached);
    auto b = run_synthesis(seq, circles_kb(), data, EngineConfig{none, 7, true, true}, &feature_kb(), &full);
    CHECK(cached.text() == full.text());
    REQUIRE(a.pipelines.size() == b.pipelines.size());
    for (std::size_t i = 0; i < a.pipelines.size(); ++i) {
        CHECK(a.pipelines[i].id == b.pipelines[i].id);
        CHECK(a.pipelines[i].metrics.has_value() == b.pipelines[i].metrics.has_value());
        if (a.pipelines[i].metrics) CHECK(a.pipelines[i].metrics->logloss == b.pipelines[i].metrics->logloss);
    }
}

TEST_CASE("execution errors stay attached to the pipeline") {
    auto data = make_circles(7);
    CategoryToggles none;
    none.disabled.insert("data");
    auto space = run_synthesis(row_sequence(3), circles_kb(), data, EngineConfig{none, 7, false, true},
                               &feature_kb());
    int errors = 0;
    for (const auto& p : space.pipelines) {
        if (!p.error) continue;
        ++errors;
        CHECK(p.contains("PCA"));
        CHECK(p.flags.count("exec_error") == 1);
        CHECK_FALSE(p.metrics.has_value());
        CHECK(p.error->rfind("TooFewFeatures: ", 0) == 0);
    }
    CHECK(errors == 3);
    CHECK(space.pipelines.size() == 9);
}

TEST_CASE("unbound symbol") {
    auto kb = stub_kb();
    CHECK_THROWS_AS(symbol_node(kdsynth::test::xor_kb(), I::o_Dr), UnknownNode);
    CHECK(symbol_node(kb, I::o_Fd) == "Op_o_Fd");
}

TEST_CASE("the engine refuses temporaries it would keep references to") {
    static_assert(!std::is_constructible_v<SynthesisEngine, const KnowledgeGraph&, Dataset, EngineConfig>);
    static_assert(!std::is_constructible_v<SynthesisEngine, KnowledgeGraph, const Dataset&, EngineConfig>);
    static_assert(std::is_constructible_v<SynthesisEngine, const KnowledgeGraph&, const Dataset&, EngineConfig>);
}
