#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "kdsynth/cli.hpp"
#include "kdsynth/dataset.hpp"
#include "support.hpp"

using namespace kdsynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("kdsynth_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_args(std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("presets resolve to files in the source tree") {
    for (const auto& name : cli::preset_names()) {
        auto c = cli::preset(name);
        REQUIRE(c.has_value());
        CHECK(fs::exists(c->pipeline_kb));
        CHECK(fs::exists(*c->sequence));
        CHECK(fs::exists(*c->feature_kb));
        CHECK((name.ends_with("-none") ? c->disabled == std::vector<std::string>{"data"} : c->disabled.empty()));
    }
    CHECK_FALSE(cli::preset("circles-row6").has_value());
}

TEST_CASE("validate exit codes") {
    TempDir tmp("validate");
    std::ostringstream out, err;
    auto root = kdsynth::test::source_dir() / "kb";
    CHECK(cli::cmd_validate({root / "pipeline_circles.toml", root / "pipeline_xor.toml", root / "features.toml"}, out,
                            err) == cli::kOk);
    auto bad = tmp.path / "bad.toml";
    spit(bad, "[[node]]\nid = \"Lonely\"\nkind = \"precondition\"\nimpl = \"model_selected\"\ncategory = \"data\"\n"
              "[[node]]\nid = \"Orphan\"\nkind = \"operation\"\nimpl = \"nop\"\n");
    std::ostringstream out2, err2;
    CHECK(cli::cmd_validate({bad}, out2, err2) == cli::kInvalidKb);
    CHECK(err2.str().find("each precondition must be linked to at least one operation") != std::string::npos);
    CHECK(err2.str().find("'Orphan' has no ISA parent") != std::string::npos);
    spit(bad, "[[node]\n");
    CHECK(cli::cmd_validate({bad}, out2, err2) == cli::kInvalidKb);
}

TEST_CASE("synth rejects sequences outside the language") {
    TempDir tmp("rejected");
    auto seq = tmp.path / "bad.seq";
    spit(seq, "o_Ld\no_M\n");
    auto c = *cli::preset("circles-row1");
    c.sequence = seq;
    c.out = tmp.path / "out";
    std::ostringstream out, err;
    CHECK(cli::cmd_synth(c, out, err) == cli::kRejected);
    CHECK(err.str().find("index 1") != std::string::npos);
    CHECK_FALSE(fs::exists(c.out / "report.json"));
}

TEST_CASE("synth with an invalid knowledge base") {
    TempDir tmp("badkb");
    auto kb = tmp.path / "kb.toml";
    spit(kb, "[[node]]\nid = \"X\"\nkind = \"operation\"\nimpl = \"nop\"\n");
    auto c = *cli::preset("circles-row1");
    c.pipeline_kb = kb;
    c.out = tmp.path / "out";
    std::ostringstream out, err;
    CHECK(cli::cmd_synth(c, out, err) == cli::kInvalidKb);
}

TEST_CASE("synth, replay and step agree") {
    TempDir tmp("agree");
    auto c = *cli::preset("circles-row1");
    c.out = tmp.path / "synth";
    std::ostringstream out, err;
    REQUIRE(cli::cmd_synth(c, out, err) == cli::kOk);
    CHECK(out.str().rfind("2 pipelines (theoretical max 3)", 0) == 0);
    auto report = slurp(c.out / "report.json");
    auto trace = slurp(c.out / "trace.log");

    std::ostringstream replayed, err2;
    REQUIRE(cli::cmd_replay(c, c.out / "trace.log", replayed, err2) == cli::kOk);
    CHECK(replayed.str() == report);

    auto step = c;
    step.out = tmp.path / "step";
    std::istringstream in("o_Ld\no_Pd\no_Se\no_Sm\no_M\no_Pd\nundo\no_M\no_E\nquit\n");
    std::ostringstream step_out, err3;
    REQUIRE(cli::cmd_step(step, in, step_out, err3) == cli::kOk);
    CHECK(step_out.str().find("SelectLinearSVC blocked by IsLinearlySeparable=false") != std::string::npos);
    CHECK(step_out.str().find("rejected: no transition from S_M on o_Pd") != std::string::npos);
    CHECK(slurp(step.out / "report.json") == report);
    CHECK(slurp(step.out / "trace.log") == trace);
}

TEST_CASE("gendata writes the XOR grid") {
    TempDir tmp("gendata");
    std::ostringstream err;
    CHECK(cli::cmd_gendata("xor", 7, tmp.path / "xor.csv", err) == cli::kOk);
    auto ds = read_dataset_csv(tmp.path / "xor.csv");
    CHECK(ds.rows() == 100);
    CHECK(ds.X == make_xor_grid().X);
    CHECK(cli::cmd_gendata("circles", 7, tmp.path / "c.csv", err) == cli::kOk);
    CHECK(read_dataset_csv(tmp.path / "c.csv").rows() == 1000);
    CHECK(cli::cmd_gendata("spiral", 7, tmp.path / "s.csv", err) == cli::kInternal);
}

TEST_CASE("argument parsing and seed fallback") {
    TempDir tmp("args");
    auto out = (tmp.path / "o").string();
    CHECK(run_args({"kdsynth", "synth", "--preset", "circles-row1", "--out", out, "--seed", "7"}) == cli::kOk);
    auto with_flag = slurp(tmp.path / "o" / "report.json");
    setenv("KDSYNTH_SEED", "7", 1);
    auto out2 = (tmp.path / "o2").string();
    CHECK(run_args({"kdsynth", "synth", "--preset", "circles-row1", "--out", out2}) == cli::kOk);
    unsetenv("KDSYNTH_SEED");
    CHECK(slurp(tmp.path / "o2" / "report.json") == with_flag);
    CHECK(run_args({"kdsynth", "synth", "--preset", "nonsense"}) == cli::kInternal);
    CHECK(run_args({"kdsynth"}) == cli::kInternal);
    CHECK(run_args({"kdsynth", "validate", (kdsynth::test::source_dir() / "kb" / "features.toml").string()}) ==
          cli::kOk);
}
