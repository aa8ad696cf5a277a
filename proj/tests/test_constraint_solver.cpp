#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>
#include <set>

#include "kdsynth/constraint_solver.hpp"
#include "kdsynth/errors.hpp"
#include "kdsynth/feature_synthesis.hpp"
#include "kdsynth/ml/transforms.hpp"
#include "kdsynth/trace.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kdsynth;
using kdsynth::test::circles_kb;
using kdsynth::test::feature_kb;
using kdsynth::test::brute_force;
using kdsynth::test::random_program;
using kdsynth::test::to_assignment;

namespace {

std::shared_ptr<const Dataset> circles_standardized() {
    static auto ds = std::make_shared<const Dataset>(transforms::standardize(make_circles(7)));
    return ds;
}

Pipeline pipeline_with(const std::vector<std::pair<std::string, std::string>>& ops,
                       std::shared_ptr<const Dataset> data) {
    Pipeline p;
    for (const auto& [node, symbol] : ops) p.ops.push_back(PipelineOp{node, "", symbol, {}, {}});
    p.id = pipeline_id(p.ops);
    p.cached_output = std::move(data);
    return p;
}

std::set<std::vector<std::string>> tuple_set(const KsReply& r) {
    return {r.tuples.begin(), r.tuples.end()};
}

} // namespace

TEST_CASE("solution sets equal brute-force enumeration on 500 random programs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        auto p = random_program(rng);
        auto solved = solve(p);
        CHECK(std::is_sorted(solved.begin(), solved.end()));
        CHECK(solved == brute_force(p));
        for (const auto& pick : solved) {
            CHECK(pick.size() == p.groups.size());
            CHECK(satisfies(p, to_assignment(p, pick)));
        }
    }
}

TEST_CASE("satisfies rejects double selections and forced-false vars") {
    ConstraintProgram p;
    int g = p.add_group();
    int a = p.add_var(g, "a", true);
    int b = p.add_var(g, "b", false);
    p.add_var(g, "c", true);
    CHECK(p.vars[static_cast<std::size_t>(a)].group == g);
    CHECK(satisfies(p, {true, false, false}));
    CHECK_FALSE(satisfies(p, {true, false, true}));
    CHECK_FALSE(satisfies(p, {false, true, false}));
    CHECK_FALSE(satisfies(p, {false, false, false}));
    CHECK(solve(p) == std::vector<std::vector<int>>{{a}, {2}});
    CHECK(b == 1);
}

TEST_CASE("empty group yields no solutions") {
    ConstraintProgram p;
    p.add_group();
    int g = p.add_group();
    p.add_var(g, "x", true);
    CHECK(solve(p).empty());
}

TEST_CASE("disabled category evaluates to true without running the predicate") {
    const auto& g = circles_kb();
    auto pipe = pipeline_with({{"LoadData", "o_Ld"}}, circles_standardized());
    auto sd = SynthesisData::pipeline_step("o_Sm", "ClassifierSelection", pipe);
    const auto& pre = g.node("IsLinearlySeparable");
    const auto& cand = g.node("SelectLinearSVC");
    auto on = evaluate_precondition(pre, cand, sd, CategoryToggles::all_on());
    CHECK_FALSE(on.value);
    CHECK_FALSE(on.disabled);
    CategoryToggles off;
    off.disabled.insert("data");
    auto skipped = evaluate_precondition(pre, cand, sd, off);
    CHECK(skipped.value);
    CHECK(skipped.disabled);
}

TEST_CASE("query with feature kernel in the pipeline excludes kernel PCA") {
    const auto& g = circles_kb();
    auto kernel = std::make_shared<const Dataset>(
        transforms::feature_kernel(*circles_standardized(), 10, 20.0, 3));
    auto pipe = pipeline_with({{"LoadData", "o_Ld"}, {"Standardize", "o_Pd"}, {"FeatureKernel", "o_Fd"}},
                              kernel);
    KnowledgeSystem ks(g, CategoryToggles::all_on());
    auto reply = ks.query(SynthesisData::pipeline_step("o_Dr", "DimensionalityReduction", pipe));
    CHECK(reply.groups == std::vector<std::string>{"DimensionalityReduction"});
    CHECK(reply.tuples == std::vector<std::vector<std::string>>{{"NOP_dr"}, {"PCA"}});
}

TEST_CASE("symbol bound to an operation node gives a singleton reply") {
    const auto& g = circles_kb();
    auto pipe = pipeline_with({}, nullptr);
    KnowledgeSystem ks(g, CategoryToggles::all_on());
    auto reply = ks.query(SynthesisData::pipeline_step("o_Ld", "LoadData", pipe));
    CHECK(reply.tuples == std::vector<std::vector<std::string>>{{"LoadData"}});
}

TEST_CASE("entity query on the XOR table yields four component tuples") {
    auto td = single_table(make_xor_grid());
    KnowledgeSystem ks(feature_kb(), CategoryToggles::all_on());
    auto reply = ks.query(SynthesisData::feature_step("Entity", td, "x"));
    CHECK(reply.groups == std::vector<std::string>{"c_t", "f_t", "g_s", "g_t", "r_s", "r_t"});
    CHECK(reply.tuples.size() == 4);
    std::set<std::pair<std::string, std::string>> rs_rt;
    for (const auto& t : reply.tuples) {
        CHECK(t.size() == 6);
        rs_rt.emplace(t[4], t[5]);
    }
    CHECK(rs_rt.size() == 4);
    CHECK(rs_rt.count({"right_proj", "product_t"}) == 1);
}

TEST_CASE("disabling a category never shrinks the reply") {
    const auto& g = circles_kb();
    auto base = circles_standardized();
    std::vector<std::shared_ptr<const Dataset>> datasets = {
        base,
        std::make_shared<const Dataset>(transforms::kernel_pca(*base, 2, 1.0)),
        std::make_shared<const Dataset>(transforms::feature_product(*base)),
    };
    std::vector<std::vector<std::pair<std::string, std::string>>> prefixes = {
        {{"LoadData", "o_Ld"}},
        {{"LoadData", "o_Ld"}, {"FeatureKernel", "o_Fd"}},
        {{"LoadData", "o_Ld"}, {"SelectLinearSVC", "o_Sm"}},
        {{"LoadData", "o_Ld"}, {"SelectXGBoost", "o_Sm"}},
    };
    std::vector<std::pair<std::string, std::string>> queries = {
        {"o_Fd", "FeatureGeneration"}, {"o_Dr", "DimensionalityReduction"},
        {"o_Sm", "ClassifierSelection"}, {"o_M", "ClassifierTraining"}};
    std::vector<std::set<std::string, std::less<>>> subsets = {
        {}, {"data"}, {"structural"}, {"data", "structural"}, {"data", "structural", "input"}};
    int strict = 0;
    for (const auto& data : datasets)
        for (const auto& prefix : prefixes)
            for (const auto& [sym, node] : queries) {
                auto pipe = pipeline_with(prefix, data);
                auto sd = SynthesisData::pipeline_step(sym, node, pipe);
                for (std::size_t i = 0; i < subsets.size(); ++i)
                    for (std::size_t j = 0; j < subsets.size(); ++j) {
                        bool contained = std::includes(subsets[j].begin(), subsets[j].end(),
                                                       subsets[i].begin(), subsets[i].end());
                        if (!contained) continue;
                        auto narrow = tuple_set(KnowledgeSystem(g, {subsets[i]}).query(sd));
                        auto wide = tuple_set(KnowledgeSystem(g, {subsets[j]}).query(sd));
                        CHECK(std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end()));
                        strict += wide.size() > narrow.size();
                    }
            }
    CHECK(strict > 0);
}

TEST_CASE("preconditions short-circuit in lexicographic order and the trace records it") {
    std::vector<KnowledgeNode> nodes = {
        {"Root", NodeKind::Abstract, {}, {}, {}, {}},
        {"A", NodeKind::Operation, "nop", {}, {}, {}},
        {"B", NodeKind::Operation, "nop", {}, {}, {}},
        {"P1", NodeKind::Precondition, "no", {}, {}, "structural"},
        {"P2", NodeKind::Precondition, "count", {}, {}, "structural"},
        {"P3", NodeKind::Precondition, "count", {}, {}, "data"},
    };
    std::vector<Link> links = {
        {"A", "Root", LinkKind::Isa},
        {"B", "Root", LinkKind::Isa},
        {"A", "P3", LinkKind::PreconditionedBy},
        {"A", "P1", LinkKind::PreconditionedBy},
        {"A", "P2", LinkKind::PreconditionedBy},
        {"B", "P3", LinkKind::PreconditionedBy},
    };
    auto g = KnowledgeGraph::build(nodes, links);
    int calls = 0;
    Registry reg;
    reg.add_predicate("no", [](const PredicateContext&) { return false; });
    reg.add_predicate("count", [&calls](const PredicateContext&) {
        ++calls;
        return true;
    });
    TraceSink sink;
    CategoryToggles toggles;
    toggles.disabled.insert("data");
    KnowledgeSystem ks(g, toggles, reg, &sink);
    auto pipe = pipeline_with({}, nullptr);
    auto reply = ks.query(SynthesisData::pipeline_step("o_X", "Root", pipe));
    CHECK(reply.tuples == std::vector<std::vector<std::string>>{{"B"}});
    CHECK(calls == 0);
    auto lines = sink.text();
    CHECK(lines.find("PRECOND pipe=cbf29ce484222325 node=A pre=P1 cat=structural verdict=false skipped=2\n") !=
          std::string::npos);
    CHECK(lines.find("node=A pre=P2") == std::string::npos);
    CHECK(lines.find("PRECOND pipe=cbf29ce484222325 node=B pre=P3 cat=data verdict=true disabled=true\n") !=
          std::string::npos);
    CHECK(lines.find("REPLY pipe=cbf29ce484222325 node=Root nodes=B\n") != std::string::npos);
}

TEST_CASE("query errors") {
    const auto& g = circles_kb();
    auto pipe = pipeline_with({}, nullptr);
    KnowledgeSystem ks(g, CategoryToggles::all_on());
    CHECK_THROWS_AS(ks.query(SynthesisData::pipeline_step("o_X", "Nope", pipe)), UnknownNode);
    // data predicate without data output
    CHECK_THROWS_AS(ks.query(SynthesisData::pipeline_step("o_Sm", "ClassifierSelection", pipe)),
                    MissingContext);
}

TEST_CASE("identical queries give identical replies and trace bytes") {
    const auto& g = circles_kb();
    auto pipe = pipeline_with({{"LoadData", "o_Ld"}}, circles_standardized());
    auto sd = SynthesisData::pipeline_step("o_Sm", "ClassifierSelection", pipe);
    TraceSink a, b;
    auto ra = KnowledgeSystem(g, CategoryToggles::all_on(), builtin_registry(), &a).query(sd);
    auto rb = KnowledgeSystem(g, CategoryToggles::all_on(), builtin_registry(), &b).query(sd);
    CHECK(ra.tuples == rb.tuples);
    CHECK(a.text() == b.text());
}
