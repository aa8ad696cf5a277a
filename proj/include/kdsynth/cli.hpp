#pragma once
// kdsynth command-line front end.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kdsynth/dataset.hpp"

namespace kdsynth::cli {

enum ExitCode { kOk = 0, kInternal = 1, kRejected = 2, kInvalidKb = 3 };

struct RunConfig {
    std::filesystem::path pipeline_kb;
    std::optional<std::filesystem::path> feature_kb;
    std::optional<std::filesystem::path> dataset;
    std::string generator; // "xor" | "circles" when no dataset path
    std::optional<std::filesystem::path> sequence;
    std::vector<std::string> disabled;
    std::uint64_t seed = 7;
    std::filesystem::path out = "out";
    bool reexecute_full = false;
    bool compute_feature_values = true;
};

// Root of kb/ and sequences/ (KDSYNTH_DATA_DIR or the build-time source dir).
std::filesystem::path data_dir();

// xor, circles-row1..5 (all preconditions), circles-row1..5-none (data off).
std::optional<RunConfig> preset(const std::string& name);
std::vector<std::string> preset_names();

Dataset load_dataset(const RunConfig& config);

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_step(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& err);
int cmd_gendata(const std::string& name, std::uint64_t seed, const std::filesystem::path& out,
                std::ostream& err);
int cmd_validate(const std::vector<std::filesystem::path>& kbs, std::ostream& out, std::ostream& err);
int cmd_replay(const RunConfig& config, const std::filesystem::path& trace, std::ostream& out,
               std::ostream& err);

int run(int argc, char** argv);

} // namespace kdsynth::cli
