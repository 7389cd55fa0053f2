#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sas/absint.hpp"
#include "sas/checker.hpp"
#include "sas/ir.hpp"
#include "sas/log.hpp"
#include "sas/oracle.hpp"

namespace sas {

using json = nlohmann::json;

struct Config {
    unsigned width = 32;
    unsigned line_bits = 6;
    std::uint32_t bound = kDefaultBound;
    bool check_branches = true;
    unsigned exhaustive_cap_bits = 24;
    std::uint64_t enum_budget = 10000;
    std::uint64_t seed = 1;
    std::uint32_t oracle_runs = 100;
    std::uint32_t call_depth_budget = 16;
    std::uint64_t iteration_budget = 1000000;
    bool dump_states = false;

    std::optional<std::string> validate() const {
        if (width == 0 || width > kMaxWidth) return "width must be between 1 and 32";
        if (line_bits >= width) return "line-bits must satisfy 0 <= L < width";
        if (bound < 1) return "bound must be at least 1";
        return std::nullopt;
    }

    EngineConfig engine() const {
        return {width, bound, call_depth_budget, iteration_budget, check_branches};
    }
    CheckerConfig checker() const {
        return {width, line_bits, enum_budget, seed, exhaustive_cap_bits};
    }
    OracleConfig oracle() const { return OracleConfig::for_width(width); }

    json to_json() const {
        json j;
        j["width"] = width;
        j["line_bits"] = line_bits;
        j["bound"] = bound;
        j["check_branches"] = check_branches;
        j["exhaustive_cap_bits"] = exhaustive_cap_bits;
        j["enum_budget"] = enum_budget;
        j["seed"] = seed;
        j["oracle_runs"] = oracle_runs;
        j["call_depth_budget"] = call_depth_budget;
        j["iteration_budget"] = iteration_budget;
        return j;
    }
};

// ---------------------------------------------------------------------------

struct LoadedProgram {
    std::optional<Program> program;
    std::vector<Diagnostic> diagnostics;
    std::string name;
};

inline LoadedProgram load_program(const std::string& path, const Config& cfg) {
    LoadedProgram out;
    out.name = std::filesystem::path(path).filename().string();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        out.diagnostics.push_back({Diagnostic::Severity::Error, 0, 0, "cannot open " + path});
        return out;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    ParseResult pr = parse_program(ss.str(), cfg.width);
    out.diagnostics = std::move(pr.diagnostics);
    if (!pr.program) return out;
    auto vd = validate(*pr.program);
    out.diagnostics.insert(out.diagnostics.end(), vd.begin(), vd.end());
    if (!has_errors(out.diagnostics)) out.program = std::move(pr.program);
    return out;
}

struct AnalyzedProgram {
    AnalysisResult analysis;
    std::vector<SiteVerdict> verdicts; // sorted by pc
};

inline AnalyzedProgram analyze_program(const Program& p, const Config& cfg) {
    AnalyzedProgram out;
    log_info("running worklist analysis");
    out.analysis = run_worklist(p, cfg.engine());
    log_info("checking " + std::to_string(out.analysis.sites.size()) + " flagged sites");
    for (const auto& site : out.analysis.sites)
        out.verdicts.push_back(check_site(site, cfg.checker()));
    return out;
}

inline json termination_json(const Termination& t) {
    json j;
    switch (t.cause) {
    case TermCause::Fixpoint: j["cause"] = "fixpoint"; break;
    case TermCause::StoreEscape: j["cause"] = "terminated"; break;
    case TermCause::IterationBudget: j["cause"] = "iteration-budget"; break;
    }
    if (t.pc) j["pc"] = *t.pc;
    if (!t.detail.empty()) j["detail"] = t.detail;
    if (!t.pending.empty()) j["pending_pcs"] = std::vector<std::size_t>(t.pending.begin(),
                                                                        t.pending.end());
    return j;
}

inline json report_json(const std::string& name, const Config& cfg, const AnalyzedProgram& ap) {
    json j;
    j["schema"] = 1;
    j["program"] = name;
    j["config"] = cfg.to_json();
    json sites = json::array();
    for (const auto& v : ap.verdicts) {
        json s;
        s["pc"] = v.pc;
        s["kind"] = site_kind_name(v.kind);
        s["verdict"] = verdict_name(v.verdict);
        if (!v.witness.empty()) {
            json w;
            w["pc"] = v.pc;
            w["kind"] = site_kind_name(v.kind);
            w["assignment"] = v.witness;
            s["witness"] = w;
        }
        json details = json::array();
        for (const auto& d : v.details) {
            json e;
            e["formula"] = d.formula;
            e["verdict"] = verdict_name(d.verdict.kind);
            if (!d.verdict.witness.empty()) e["assignment"] = d.verdict.witness;
            if (!d.verdict.reason.empty()) e["reason"] = d.verdict.reason;
            details.push_back(e);
        }
        s["details"] = details;
        // The raw formula set of the site record, for grep and goldens.
        for (const auto& site : ap.analysis.sites)
            if (site.pc == v.pc && site.kind == v.kind) {
                json fs = json::array();
                for (const auto& f : site.formulas) fs.push_back(to_string(f));
                s["formulas"] = fs;
            }
        sites.push_back(s);
    }
    j["sites"] = sites;
    json stats;
    stats["iterations"] = ap.analysis.stats.iterations;
    stats["contexts_analyzed"] = ap.analysis.stats.contexts_analyzed;
    stats["functions_analyzed"] = ap.analysis.stats.functions_analyzed;
    stats["instructions_reached"] = ap.analysis.stats.instructions_reached;
    stats["peak_state_entries"] = ap.analysis.stats.peak_state_entries;
    j["statistics"] = stats;
    j["termination"] = termination_json(ap.analysis.termination);
    if (cfg.dump_states) {
        json st;
        for (const auto& [pc, state] : ap.analysis.states) {
            json entries;
            for (const auto& [k, vs] : state.entries()) entries[to_string(k)] = to_string(vs);
            st[std::to_string(pc)] = entries;
        }
        j["states"] = st;
    }
    return j;
}

inline bool report_has_leaks(const AnalyzedProgram& ap) {
    for (const auto& v : ap.verdicts)
        if (v.verdict == VerdictKind::Sat || v.verdict == VerdictKind::TopAccess) return true;
    return false;
}

struct CommandResult {
    int exit_code = 0;
    std::string output; // report JSON or human-readable text
    std::vector<std::string> errors;
};

inline std::string render_pretty(const json& report) {
    std::string out;
    out += "program: " + report["program"].get<std::string>() + "\n";
    out += "termination: " + report["termination"]["cause"].get<std::string>();
    if (report["termination"].contains("pc"))
        out += " at pc " + std::to_string(report["termination"]["pc"].get<std::size_t>());
    out += "\n";
    for (const auto& s : report["sites"]) {
        out += "  pc " + std::to_string(s["pc"].get<std::size_t>()) + " [" +
               s["kind"].get<std::string>() + "] " + s["verdict"].get<std::string>();
        if (s.contains("witness")) {
            out += "  witness:";
            const auto& asgn = s["witness"]["assignment"];
            for (auto it = asgn.begin(); it != asgn.end(); ++it)
                out += " " + it.key() + "=" + std::to_string(it.value().get<std::uint64_t>());
        }
        out += "\n";
    }
    const auto& st = report["statistics"];
    out += "stats: iterations=" + std::to_string(st["iterations"].get<std::uint64_t>()) +
           " contexts=" + std::to_string(st["contexts_analyzed"].get<std::uint64_t>()) +
           " functions=" + std::to_string(st["functions_analyzed"].get<std::uint64_t>()) +
           " instructions=" + std::to_string(st["instructions_reached"].get<std::uint64_t>()) +
           " peak_entries=" + std::to_string(st["peak_state_entries"].get<std::uint64_t>()) + "\n";
    return out;
}

// analyze: parse, validate, run the fixpoint, check every flagged site.
// Exit 0 = clean run, 2 = leaks found, 1 = error.
inline CommandResult cmd_analyze(const std::string& path, const Config& cfg, bool pretty = false) {
    CommandResult res;
    if (auto err = cfg.validate()) {
        res.exit_code = 1;
        res.errors.push_back(*err);
        return res;
    }
    LoadedProgram lp = load_program(path, cfg);
    for (const auto& d : lp.diagnostics)
        if (d.severity == Diagnostic::Severity::Error) res.errors.push_back(to_string(d));
    if (!lp.program) {
        res.exit_code = 1;
        return res;
    }
    AnalyzedProgram ap = analyze_program(*lp.program, cfg);
    json report = report_json(lp.name, cfg, ap);
    res.output = pretty ? render_pretty(report) : report.dump(2) + "\n";
    res.exit_code = report_has_leaks(ap) ? 2 : 0;
    return res;
}

// oracle: differential soundness check of the fixpoint against random
// concrete executions. Exit 0 iff no violations.
inline CommandResult cmd_oracle(const std::string& path, const Config& cfg) {
    CommandResult res;
    if (auto err = cfg.validate()) {
        res.exit_code = 1;
        res.errors.push_back(*err);
        return res;
    }
    LoadedProgram lp = load_program(path, cfg);
    for (const auto& d : lp.diagnostics)
        if (d.severity == Diagnostic::Severity::Error) res.errors.push_back(to_string(d));
    if (!lp.program) {
        res.exit_code = 1;
        return res;
    }
    AnalysisResult analysis = run_worklist(*lp.program, cfg.engine());
    SoundnessReport sr = check_soundness(*lp.program, analysis, cfg.oracle_runs, cfg.seed,
                                         cfg.oracle(), analysis.annotation_secrets);
    json j;
    j["schema"] = 1;
    j["program"] = lp.name;
    j["runs"] = sr.runs;
    j["checked_values"] = sr.checked_values;
    json viol = json::array();
    for (const auto& v : sr.violations) {
        json e;
        e["run"] = v.run;
        e["step"] = v.step;
        e["pc"] = v.pc;
        e["key"] = v.key;
        e["concrete"] = v.concrete;
        e["label"] = v.concrete_hi ? "hi" : "lo";
        e["abstract"] = v.abstract_set;
        viol.push_back(e);
    }
    j["violations"] = viol;
    j["faults"] = sr.faults;
    if (sr.partial_analysis)
        j["warning"] = "analysis stopped before the fixpoint: coverage checks were skipped";
    if (cfg.oracle_runs == 0) j["warning"] = "oracle_runs=0: vacuous pass";
    res.output = j.dump(2) + "\n";
    res.exit_code = sr.violations.empty() ? 0 : 1;
    return res;
}

// Single reproducible run from a secret-assignment file, optionally dumping
// the trace in the pc=<n> <key>=<value>/<label> format.
inline CommandResult cmd_oracle_replay(const std::string& path, const Config& cfg,
                                       const std::string& secrets_path, bool dump) {
    CommandResult res;
    LoadedProgram lp = load_program(path, cfg);
    for (const auto& d : lp.diagnostics)
        if (d.severity == Diagnostic::Severity::Error) res.errors.push_back(to_string(d));
    if (!lp.program) {
        res.exit_code = 1;
        return res;
    }
    std::ifstream sf(secrets_path);
    if (!sf) {
        res.exit_code = 1;
        res.errors.push_back("cannot open " + secrets_path);
        return res;
    }
    json sj;
    try {
        sf >> sj;
    } catch (const std::exception& e) {
        res.exit_code = 1;
        res.errors.push_back(std::string("bad secrets file: ") + e.what());
        return res;
    }
    SecretAssignment secrets;
    std::map<std::uint64_t, std::uint64_t> memory;
    if (sj.contains("registers"))
        for (auto it = sj["registers"].begin(); it != sj["registers"].end(); ++it)
            secrets.registers[it.key()] = it.value().get<std::uint64_t>();
    if (sj.contains("region"))
        for (auto it = sj["region"].begin(); it != sj["region"].end(); ++it)
            secrets.region[std::stoull(it.key())] = it.value().get<std::uint64_t>();
    if (sj.contains("memory"))
        for (auto it = sj["memory"].begin(); it != sj["memory"].end(); ++it)
            memory[std::stoull(it.key())] = it.value().get<std::uint64_t>();

    Trace tr = crun(*lp.program, cfg.oracle(), secrets, cfg.iteration_budget, memory);
    if (dump) res.output = dump_trace(tr);
    json j;
    j["steps"] = tr.steps.size();
    switch (tr.outcome) {
    case Trace::Outcome::Returned: j["outcome"] = "returned"; break;
    case Trace::Outcome::Fault:
        j["outcome"] = "fault";
        j["fault"] = tr.fault;
        j["fault_pc"] = tr.fault_pc;
        break;
    case Trace::Outcome::FuelExhausted: j["outcome"] = "fuel-exhausted"; break;
    }
    if (!dump) res.output = j.dump(2) + "\n";
    res.exit_code = tr.outcome == Trace::Outcome::Fault ? 1 : 0;
    return res;
}

// emit-smt: one SMT-LIB 2 script per secret-dependent site.
inline CommandResult cmd_emit_smt(const std::string& path, const Config& cfg,
                                  const std::string& outdir) {
    CommandResult res;
    if (auto err = cfg.validate()) {
        res.exit_code = 1;
        res.errors.push_back(*err);
        return res;
    }
    LoadedProgram lp = load_program(path, cfg);
    for (const auto& d : lp.diagnostics)
        if (d.severity == Diagnostic::Severity::Error) res.errors.push_back(to_string(d));
    if (!lp.program) {
        res.exit_code = 1;
        return res;
    }
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    AnalysisResult analysis = run_worklist(*lp.program, cfg.engine());
    std::vector<std::string> files;
    for (const auto& site : analysis.sites) {
        std::vector<std::string> asserts;
        for (const auto& f : site.formulas) {
            if (!f.has_secret() || f.is_top()) continue;
            BvExpr bv = translate(f, cfg.width);
            LeakConstraint c = site.kind == SiteKind::Branch
                                   ? make_branch_constraint(bv, cfg.width)
                                   : make_cache_constraint(bv, cfg.line_bits, cfg.width);
            asserts.push_back(emit_smtlib(c));
        }
        if (asserts.empty()) continue;
        std::string name = "site_" + std::to_string(site.pc) + "_" + site_kind_name(site.kind) +
                           ".smt2";
        std::filesystem::path out = std::filesystem::path(outdir) / name;
        std::ofstream of(out);
        if (!of) {
            res.exit_code = 1;
            res.errors.push_back("cannot write " + out.string());
            return res;
        }
        // One script per site; independent constraints are separated by
        // reset so each formula of the set gets its own (check-sat).
        for (std::size_t i = 0; i < asserts.size(); ++i) {
            if (i) of << "(reset)\n";
            of << asserts[i];
        }
        files.push_back(out.string());
    }
    for (const auto& f : files) res.output += f + "\n";
    if (files.empty()) res.output = "no secret-dependent sites; nothing emitted\n";
    return res;
}

// ---------------------------------------------------------------------------
// Bundled corpus metadata

struct CorpusEntry {
    std::string file;
    std::string summary;
};

inline std::vector<CorpusEntry> corpus_entries() {
    return {
        {"aes_like.sir",
         "secret byte indexes a byte table spanning several cache lines; the load is SAT"},
        {"modexp_window.sir",
         "secret window bits select a pointer from a precomputed table; the pointer fetch stays "
         "inside one line (UNSAT) but the dereference crosses lines (SAT)"},
        {"scatter_gather_aligned.sir",
         "constant-order gather over an aligned stack buffer; base alignment is not modeled, so "
         "the masked index is still flagged SAT (known false positive)"},
        {"masked_index.sir",
         "table index masked to stay inside a single cache line; the load is UNSAT"},
        {"secret_branch.sir", "conditional jump on a secret bit; the branch constraint is SAT"},
        {"store_via_p.sir",
         "store through an unknown public pointer; the analysis terminates early and reports the "
         "cause"},
        {"summary_fp.sir",
         "function summary reuse: a top-argument context subsumes a later constant-argument "
         "call, so the branch on its result is flagged (known false positive)"},
    };
}

inline CommandResult cmd_corpus_list(bool as_json) {
    CommandResult res;
    const auto entries = corpus_entries();
    if (as_json) {
        json j = json::array();
        for (const auto& e : entries) {
            json o;
            o["file"] = e.file;
            o["summary"] = e.summary;
            j.push_back(o);
        }
        res.output = j.dump(2) + "\n";
    } else {
        for (const auto& e : entries) res.output += e.file + "\n    " + e.summary + "\n";
    }
    return res;
}

} // namespace sas
