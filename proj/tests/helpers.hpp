#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sas/domain.hpp"
#include "sas/ir.hpp"

namespace sas::test {

inline std::string source_dir() { return SAS_SOURCE_DIR; }
inline std::string corpus_path(const std::string& name) {
    return source_dir() + "/corpus/" + name;
}
inline std::string fixture_path(const std::string& name) {
    return source_dir() + "/tests/fixtures/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Program parse_or_die(const std::string& text, unsigned width = 32) {
    ParseResult pr = parse_program(text, width);
    if (!pr.ok()) {
        std::string msg = "fixture failed to parse:";
        for (const auto& d : pr.diagnostics) msg += "\n  " + to_string(d);
        throw std::runtime_error(msg);
    }
    return *pr.program;
}

inline std::vector<std::string> corpus_files() {
    return {"aes_like.sir",       "modexp_window.sir", "scatter_gather_aligned.sir",
            "masked_index.sir",   "secret_branch.sir", "store_via_p.sir",
            "summary_fp.sir"};
}

// Random abstract values built through reduce() so every generated tree
// satisfies the construction invariants of the domain.
inline Av random_av(std::mt19937_64& rng, unsigned width, int depth = 3) {
    std::uniform_int_distribution<int> leaf_pick(0, 9);
    std::uniform_int_distribution<int> op_pick(0, 8);
    std::uniform_int_distribution<std::uint64_t> val(0, width_mask(width));
    if (depth == 0 || leaf_pick(rng) < 5) {
        switch (leaf_pick(rng)) {
        case 0: return Av::top();
        case 1: case 2: return Av::pub();
        case 3: return Av::secret(1);
        case 4: return Av::secret(2);
        case 5: return Av::header();
        case 6: return Av::stack_base();
        default: return Av::constant(val(rng), width);
        }
    }
    Av a = random_av(rng, width, depth - 1);
    Av b = random_av(rng, width, depth - 1);
    return reduce(static_cast<BinOp>(op_pick(rng)), a, b, width);
}

inline std::vector<Av> random_av_vector(std::mt19937_64& rng, unsigned width, int max_len = 6) {
    std::uniform_int_distribution<int> len(0, max_len);
    std::vector<Av> out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) out.push_back(random_av(rng, width, 2));
    return out;
}

inline ValueSet random_value_set(std::mt19937_64& rng, unsigned width,
                                 std::uint32_t bound = kDefaultBound) {
    return ValueSet(random_av_vector(rng, width), bound);
}

} // namespace sas::test
