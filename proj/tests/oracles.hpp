#pragma once
// Independent oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cstdint>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "kdsynth/constraint_solver.hpp"
#include "kdsynth/pipeline_synthesis.hpp"

namespace kdsynth::test {

// At most 12 variables spread over 1..4 exactly-one groups.
inline ConstraintProgram random_program(std::mt19937_64& rng) {
    ConstraintProgram p;
    int budget = 1 + static_cast<int>(rng() % 12);
    int n_groups = 1 + static_cast<int>(rng() % 4);
    for (int g = 0; g < n_groups; ++g) p.add_group();
    for (int v = 0; v < budget; ++v) {
        int g = static_cast<int>(rng() % static_cast<std::uint64_t>(n_groups));
        p.add_var(g, "n" + std::to_string(v), rng() % 4 != 0);
    }
    return p;
}

// Enumerates all 2^n assignments and keeps those where each group has exactly
// one true var and no true var has a false literal.
inline std::vector<std::vector<int>> brute_force(const ConstraintProgram& p) {
    const std::size_t n = p.vars.size();
    std::vector<std::vector<int>> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        bool ok = true;
        for (std::size_t v = 0; v < n && ok; ++v)
            if ((mask >> v & 1) && !p.literal[v]) ok = false;
        std::vector<int> pick;
        for (const auto& group : p.groups) {
            if (!ok) break;
            int count = 0, chosen = -1;
            for (int v : group)
                if (mask >> v & 1) {
                    ++count;
                    chosen = v;
                }
            if (count != 1) ok = false;
            pick.push_back(chosen);
        }
        if (ok) out.push_back(pick);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline Assignment to_assignment(const ConstraintProgram& p, const std::vector<int>& pick) {
    Assignment a(p.vars.size(), false);
    for (int v : pick) a[static_cast<std::size_t>(v)] = true;
    return a;
}

// Hand transcription of the control-flow diagram as a regular expression over
// one letter per symbol.
inline bool oracle_accepts(const std::vector<InputSymbol>& seq) {
    static const std::regex language("^L[PFDXT]*(S[FDXT]*(ME?)?)?$");
    std::string word;
    for (auto s : seq) {
        switch (s) {
        case InputSymbol::o_Ld: word += 'L'; break;
        case InputSymbol::o_Pd: word += 'P'; break;
        case InputSymbol::o_Fd: word += 'F'; break;
        case InputSymbol::o_Dr: word += 'D'; break;
        case InputSymbol::o_DFS: word += 'X'; break;
        case InputSymbol::o_Sm: word += 'S'; break;
        case InputSymbol::o_Se: word += 'T'; break;
        case InputSymbol::o_M: word += 'M'; break;
        case InputSymbol::o_E: word += 'E'; break;
        }
    }
    return std::regex_match(word, language);
}

// Length 0..12; half the draws start with o_Ld so both outcomes are common.
inline std::vector<InputSymbol> random_sequence(std::mt19937_64& rng) {
    std::size_t len = rng() % 13;
    std::vector<InputSymbol> seq;
    const bool guided = rng() % 2 == 0;
    for (std::size_t i = 0; i < len; ++i) {
        if (guided && i == 0) {
            seq.push_back(InputSymbol::o_Ld);
            continue;
        }
        seq.push_back(kAllSymbols[rng() % std::size(kAllSymbols)]);
    }
    return seq;
}

} // namespace kdsynth::test
