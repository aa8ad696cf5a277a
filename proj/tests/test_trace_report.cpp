#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "kdsynth/errors.hpp"
#include "kdsynth/ml/transforms.hpp"
#include "kdsynth/report.hpp"
#include "kdsynth/trace.hpp"
#include "support.hpp"

using namespace kdsynth;
using kdsynth::test::circles_kb;
using kdsynth::test::feature_kb;
using kdsynth::test::source_dir;
using kdsynth::test::xor_kb;

namespace {

std::vector<InputSymbol> row_sequence(int row) {
    return read_sequence(source_dir() / "sequences" / ("circles_row" + std::to_string(row) + ".seq"));
}

struct Run {
    PipelineSpace space;
    std::string trace;
    std::vector<TraceEvent> events;
};

Run run(const std::vector<InputSymbol>& seq, const KnowledgeGraph& kb, const Dataset& data,
        CategoryToggles toggles = {}) {
    std::ostringstream stream;
    TraceSink sink(&stream);
    Run r;
    r.space = run_synthesis(seq, kb, data, EngineConfig{std::move(toggles), 7, false, true}, &feature_kb(), &sink);
    r.trace = stream.str();
    r.events = sink.events();
    return r;
}

} // namespace

TEST_CASE("event formatting follows the line grammar") {
    TraceEvent ev{17, EventKind::Precond,
                  {{"pipe", "a3f"}, {"node", "SelectLinearSVC"}, {"pre", "IsLinearlySeparable"},
                   {"cat", "data"}, {"verdict", "false"}}};
    const std::string line = "17 PRECOND pipe=a3f node=SelectLinearSVC pre=IsLinearlySeparable cat=data verdict=false";
    CHECK(format_event(ev) == line);
    CHECK(parse_event(line) == ev);
    CHECK(ev.value("verdict") == "false");
    CHECK(ev.get("missing") == nullptr);
    CHECK_THROWS_AS(parse_event("x QUERY a=b"), ParseError);
    CHECK_THROWS_AS(parse_event("1 BOGUS a=b"), ParseError);
    CHECK_THROWS_AS(parse_event("1 QUERY novalue"), ParseError);
    std::istringstream out_of_order("2 QUERY pipe=a\n1 REPLY pipe=a nodes=-\n");
    CHECK_THROWS_AS(parse_trace(out_of_order), ParseError);
}

TEST_CASE("sink assigns increasing sequence numbers and enforces pairing") {
    TraceSink sink;
    CHECK(sink.emit(EventKind::Query, {{"pipe", "a"}}) == 1);
    CHECK_THROWS_AS(sink.emit(EventKind::Query, {{"pipe", "b"}}), TraceOrderError);
    CHECK_THROWS_AS(sink.emit(EventKind::Reply, {{"pipe", "b"}}), TraceOrderError);
    CHECK(sink.emit(EventKind::Precond, {{"pipe", "a"}, {"verdict", "true"}}) == 2);
    CHECK(sink.emit(EventKind::Reply, {{"pipe", "a"}, {"nodes", "-"}}) == 3);
    CHECK_THROWS_AS(sink.emit(EventKind::Reply, {{"pipe", "a"}}), TraceOrderError);
    CHECK_THROWS_AS(sink.emit(EventKind::Precond, {{"pipe", "a"}}), TraceOrderError);
    CHECK_THROWS_AS(sink.emit(EventKind::Exec, {{"pipe", "a b"}}), TraceOrderError);
    CHECK_THROWS_AS(sink.emit(EventKind::Exec, {{"pipe", ""}}), TraceOrderError);
    sink.close();
    CHECK_THROWS_AS(sink.emit(EventKind::Exec, {{"pipe", "a"}}), IoError);
    CHECK(sink.size() == 3);
}

TEST_CASE("streaming sink writes the same text it keeps") {
    std::ostringstream out;
    TraceSink sink(&out);
    sink.emit(EventKind::Query, {{"pipe", "a"}});
    sink.emit(EventKind::Reply, {{"pipe", "a"}, {"nodes", "X,Y"}});
    sink.emit(EventKind::Prune, {{"pipe", "a"}, {"reason", "empty_reply"}});
    CHECK(out.str() == sink.text());
    CHECK(out.str() == "1 QUERY pipe=a\n2 REPLY pipe=a nodes=X,Y\n3 PRUNE pipe=a reason=empty_reply\n");
    CHECK_THROWS(sink.rewind(1));
}

TEST_CASE("rewind drops later events") {
    TraceSink sink;
    sink.emit(EventKind::Exec, {{"pipe", "a"}});
    sink.emit(EventKind::Query, {{"pipe", "a"}});
    sink.rewind(1);
    CHECK(sink.size() == 1);
    CHECK(sink.emit(EventKind::Query, {{"pipe", "b"}}) == 2);
    CHECK(sink.since(1).size() == 1);
}

TEST_CASE("helpers") {
    CHECK(format_exact(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_exact(1.0 / 3)) == 1.0 / 3);
    CHECK(join({"a", "b"}) == "a,b");
    CHECK(split_list("a,b") == std::vector<std::string>{"a", "b"});
    CHECK(split_list("-").empty());
    CHECK(round6(0.123456789) == 0.123457);
    CHECK(round6(123456789.0) == 123457000.0);
    CHECK(round6(0) == 0);
}

TEST_CASE("logloss statistics use the sample deviation over trained pipelines") {
    std::vector<PipelineSummary> ps(4);
    ps[0].metrics = ml::Metrics{0.2, 1};
    ps[1].metrics = ml::Metrics{0.4, 1};
    ps[2].metrics = ml::Metrics{0.9, 1};
    ps[3].error = "TooFewFeatures";
    auto st = logloss_stats(ps);
    CHECK(st.trained == 3);
    double mean = (0.2 + 0.4 + 0.9) / 3;
    double ss = (0.2 - mean) * (0.2 - mean) + (0.4 - mean) * (0.4 - mean) + (0.9 - mean) * (0.9 - mean);
    CHECK(*st.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(*st.stddev == doctest::Approx(std::sqrt(ss / 2)).epsilon(1e-14));
    ps.resize(1);
    CHECK_FALSE(logloss_stats(ps).stddev.has_value());
}

TEST_CASE("empty space renders with zero count and no statistics") {
    ReportConfig cfg;
    auto j = render_report({}, cfg);
    CHECK(j["space"]["count"] == 0);
    CHECK(j["stats"]["trained"] == 0);
    CHECK_FALSE(j["stats"].contains("mean_logloss"));
    CHECK_FALSE(j["stats"].contains("stddev_logloss"));
    CHECK(j["stats"]["stddev_kind"] == "sample");
}

TEST_CASE("circles first row: report, replay and explainability") {
    auto seq = row_sequence(1);
    auto r = run(seq, circles_kb(), make_circles(7));
    auto summaries = summarize(r.space);
    CHECK(summaries.size() == 2);
    auto cfg = report_config(seq, circles_kb(), {}, 7);
    auto report = render_report(summaries, cfg);
    CHECK(report["space"]["count"] == 2);
    CHECK(report["space"]["theoretical_max"] == 3);
    CHECK(report["config"]["thresholds"]["IsLinearlySeparable"] == 0.95);

    // replay reconstructs every final pipeline and its results
    std::istringstream in(r.trace);
    auto replayed = replay(parse_trace(in));
    CHECK(replayed == summaries);
    CHECK(report_text(render_report(replayed, cfg)) == report_text(report));

    // every excluded candidate is explained by a false verdict in its query
    std::size_t i = 0;
    int explained = 0;
    while (i < r.events.size()) {
        const auto& q = r.events[i];
        if (q.kind != EventKind::Query || !q.get("pipe")) {
            ++i;
            continue;
        }
        std::set<std::pair<std::string, bool>> verdicts;
        std::size_t j = i + 1;
        for (; r.events[j].kind != EventKind::Reply; ++j)
            if (r.events[j].kind == EventKind::Precond)
                verdicts.emplace(r.events[j].value("node"), r.events[j].value("verdict") == "true");
        auto nodes = split_list(r.events[j].value("nodes"));
        std::set<std::string> replied(nodes.begin(), nodes.end());
        const auto& sym_node = circles_kb().node(q.value("node"));
        std::vector<std::string> candidates{sym_node.id};
        if (sym_node.kind == NodeKind::Abstract) candidates = operation_descendants(circles_kb(), sym_node.id);
        for (const auto& c : candidates) {
            if (replied.count(c)) continue;
            CHECK(verdicts.count({c, false}) == 1);
            ++explained;
        }
        i = j + 1;
    }
    CHECK(explained > 0);
}

TEST_CASE("each final op has query ancestry in the trace") {
    auto seq = row_sequence(3);
    auto r = run(seq, circles_kb(), make_circles(7));
    std::set<std::string> seen;
    for (const auto& ev : r.events)
        if (ev.kind == EventKind::Reply && ev.get("pipe"))
            for (const auto& n : split_list(ev.value("nodes"))) seen.insert(n);
    for (const auto& p : r.space.pipelines)
        for (const auto& op : p.ops) CHECK(seen.count(op.node) == 1);
}

TEST_CASE("identical inputs give byte-identical traces and reports") {
    auto seq = read_sequence(source_dir() / "sequences" / "xor.seq");
    auto a = run(seq, xor_kb(), make_xor_grid());
    auto b = run(seq, xor_kb(), make_xor_grid());
    CHECK(a.trace == b.trace);
    auto cfg = report_config(seq, xor_kb(), {}, 7);
    CHECK(report_text(render_report(summarize(a.space), cfg)) == report_text(render_report(summarize(b.space), cfg)));
    std::istringstream in(a.trace);
    CHECK(replay(parse_trace(in)) == summarize(a.space));
}

TEST_CASE("constant deep feature is flagged") {
    auto base = make_circles(7);
    Dataset ds;
    ds.columns = {"x", "y", "flat"};
    ds.X.resize(base.rows(), 3);
    ds.X << base.X, Eigen::VectorXd::Constant(base.rows(), 1.0);
    ds.y = base.y;
    CategoryToggles none;
    none.disabled.insert("data");
    auto r = run(row_sequence(1), circles_kb(), ds, none);
    auto summaries = summarize(r.space);
    REQUIRE_FALSE(summaries.empty());
    for (const auto& p : summaries) {
        CHECK(std::find(p.flags.begin(), p.flags.end(), "constant_feature") != p.flags.end());
    }
    auto report = render_report(summaries, report_config(row_sequence(1), circles_kb(), none, 7));
    CHECK(report["pipelines"][0]["flags"].dump().find("constant_feature") != std::string::npos);
}

TEST_CASE("report keys are sorted and numbers rounded") {
    auto seq = row_sequence(1);
    auto r = run(seq, circles_kb(), make_circles(7));
    auto text = report_text(render_report(summarize(r.space), report_config(seq, circles_kb(), {}, 7)));
    CHECK(text.find("\"config\"") < text.find("\"pipelines\""));
    CHECK(text.find("\"pipelines\"") < text.find("\"space\""));
    CHECK(text.find("\"space\"") < text.find("\"stats\""));
    auto j = nlohmann::json::parse(text);
    for (const auto& p : j["pipelines"]) {
        double ll = p["logloss"];
        CHECK(ll == round6(ll));
    }
}
