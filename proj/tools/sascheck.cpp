#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sas/pipeline.hpp"

namespace {

void add_config_flags(CLI::App* cmd, sas::Config& cfg) {
    cmd->add_option("--width", cfg.width, "bit width of registers and addresses");
    cmd->add_option("--line-bits", cfg.line_bits, "cache line bits L (line size 2^L)");
    cmd->add_option("--bound", cfg.bound, "maximum value-set size N");
    cmd->add_flag_callback(
        "--no-branches", [&cfg] { cfg.check_branches = false; },
        "do not flag secret-dependent branch conditions");
    cmd->add_option("--enum-budget", cfg.enum_budget, "candidate budget for the built-in solver");
    cmd->add_option("--exhaustive-cap", cfg.exhaustive_cap_bits,
                    "total variable bits up to which enumeration is exhaustive");
    cmd->add_option("--seed", cfg.seed, "RNG seed for the solver and the oracle");
    cmd->add_option("--oracle-runs", cfg.oracle_runs, "number of random concrete runs");
    cmd->add_option("--call-depth", cfg.call_depth_budget, "interprocedural recursion budget");
    cmd->add_option("--iteration-budget", cfg.iteration_budget, "worklist iteration budget");
}

int deliver(const sas::CommandResult& res, const std::string& out_path) {
    for (const auto& e : res.errors) std::cerr << e << "\n";
    if (!res.output.empty()) {
        if (out_path.empty()) {
            std::cout << res.output;
        } else {
            std::ofstream of(out_path, std::ios::binary);
            if (!of) {
                std::cerr << "cannot write " << out_path << "\n";
                return 1;
            }
            of << res.output;
        }
    }
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"static detector of secret-dependent cache and branch behavior"};
    app.require_subcommand(1);

    sas::Config cfg;
    std::string path, out_path, outdir = "smt_out", secrets_path;
    bool pretty = false, dump_states = false, as_json = false, dump_trace = false;

    CLI::App* analyze = app.add_subcommand("analyze", "analyze an IR file and report verdicts");
    analyze->add_option("file", path, "IR source file")->required();
    add_config_flags(analyze, cfg);
    analyze->add_flag("--pretty", pretty, "human-readable report instead of JSON");
    analyze->add_flag("--dump-states", dump_states, "include per-pc abstract states in the report");
    analyze->add_option("--out", out_path, "write the report to a file instead of stdout");

    CLI::App* oracle = app.add_subcommand("oracle",
                                          "differential soundness check against concrete runs");
    oracle->add_option("file", path, "IR source file")->required();
    add_config_flags(oracle, cfg);
    oracle->add_option("--secrets", secrets_path,
                       "JSON secret assignment for one reproducible run");
    oracle->add_flag("--dump-trace", dump_trace, "print the trace of the reproducible run");
    oracle->add_option("--out", out_path, "write the report to a file instead of stdout");

    CLI::App* emit = app.add_subcommand("emit-smt", "emit one SMT-LIB 2 script per flagged site");
    emit->add_option("file", path, "IR source file")->required();
    add_config_flags(emit, cfg);
    emit->add_option("--outdir", outdir, "output directory for .smt2 files");

    CLI::App* corpus = app.add_subcommand("corpus", "list the bundled fixture corpus");
    corpus->add_flag("--json", as_json, "machine-readable listing");

    CLI11_PARSE(app, argc, argv);

    cfg.dump_states = dump_states;
    if (auto err = cfg.validate()) {
        std::cerr << *err << "\n";
        return 1;
    }

    if (analyze->parsed()) return deliver(sas::cmd_analyze(path, cfg, pretty), out_path);
    if (oracle->parsed()) {
        if (!secrets_path.empty())
            return deliver(sas::cmd_oracle_replay(path, cfg, secrets_path, dump_trace), out_path);
        return deliver(sas::cmd_oracle(path, cfg), out_path);
    }
    if (emit->parsed()) return deliver(sas::cmd_emit_smt(path, cfg, outdir), "");
    if (corpus->parsed()) return deliver(sas::cmd_corpus_list(as_json), "");
    return 1;
}
