#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sas/absint.hpp"
#include "sas/domain.hpp"
#include "sas/ir.hpp"

namespace sas {

// Executable concrete semantics with two-point security labels, used as a
// differential-testing oracle against the abstract fixpoint.

struct CVal {
    std::uint64_t n = 0;
    bool hi = false; // security label, lo when false
};

inline CVal labeled(std::uint64_t n, bool hi, unsigned w) { return {truncate(n, w), hi}; }

struct OracleConfig {
    unsigned width = 32;
    std::uint64_t stack_base = 0;  // initial esp; stack grows down
    std::uint64_t stack_size = 0;  // bytes of legal stack below stack_base
    std::uint64_t region_base = 0; // base of the secret memory region
    std::uint64_t fuel = 100000;

    static OracleConfig for_width(unsigned w) {
        OracleConfig c;
        c.width = w;
        c.stack_base = truncate(7ull << (w - 3), w); // 0xE0... pattern at any width
        c.stack_size = std::min<std::uint64_t>(4096, 1ull << (w - 3));
        c.region_base = 1ull << (w - 1);
        return c;
    }
};

struct SecretAssignment {
    std::map<std::string, std::uint64_t> registers; // @secret register values
    std::map<std::uint64_t, std::uint64_t> region;  // offset -> value
};

struct CState {
    std::map<std::string, CVal> regs;
    std::map<std::uint64_t, CVal> mem;
    std::size_t pc = 0;
    std::vector<std::size_t> return_stack;
    std::vector<std::uint64_t> frame_bases; // concrete esp at entry of each live frame
};

struct TraceStep {
    std::size_t pc = 0;             // command executed
    std::uint64_t frame_base = 0;   // frame of the executing function, pre-execution
    CState post;
};

struct Trace {
    enum class Outcome : std::uint8_t { Returned, Fault, FuelExhausted };
    CState initial;
    std::vector<TraceStep> steps;
    Outcome outcome = Outcome::Returned;
    std::string fault;
    std::size_t fault_pc = 0;
};

namespace oracle_detail {

inline CVal read_reg(const CState& s, const std::string& r) {
    auto it = s.regs.find(r);
    if (it == s.regs.end()) return {0, false};
    return it->second;
}

inline CVal read_mem(const CState& s, std::uint64_t addr) {
    auto it = s.mem.find(addr);
    if (it == s.mem.end()) return {0, false};
    return it->second;
}

inline CVal eval_cexpr(const Expr& e, const CState& s, unsigned w) {
    if (e.is_leaf()) {
        if (e.leaf.is_literal) return labeled(e.leaf.value, false, w);
        return read_reg(s, e.leaf.reg);
    }
    CVal a = eval_cexpr(*e.lhs, s, w);
    CVal b = eval_cexpr(*e.rhs, s, w);
    return labeled(eval_binop(*e.op, a.n, b.n, w), a.hi || b.hi, w);
}

} // namespace oracle_detail

struct StepOutcome {
    bool faulted = false;
    bool returned = false; // ret from the entry function
    std::string fault;
};

// One small-step transition. Mixed labels join to hi; loading via a secret
// address or from the secret region yields hi; is_zero always yields lo.
inline StepOutcome cstep(const Program& p, const OracleConfig& cfg, CState& s) {
    using oracle_detail::eval_cexpr;
    using oracle_detail::read_mem;
    using oracle_detail::read_reg;
    const unsigned w = cfg.width;
    const Instr& in = p.commands.at(s.pc);
    const std::uint64_t stack_floor = truncate(cfg.stack_base - cfg.stack_size, w);

    auto in_region = [&](std::uint64_t a) {
        std::uint64_t size = 0;
        for (const auto& f : p.functions)
            for (const auto& ann : f.annotations)
                if (ann.kind == SecretAnnotation::Kind::RegionBase)
                    size = std::max(size, ann.region_size);
        return a >= cfg.region_base && a < truncate(cfg.region_base + size, w);
    };
    auto bounds_fault = [&](std::uint64_t a) {
        // The band just below the configured stack is a guard: descending
        // into it means the program ran off its stack.
        const std::uint64_t guard_lo = truncate(stack_floor - cfg.stack_size, w);
        return a >= guard_lo && a < stack_floor;
    };

    switch (in.op) {
    case Opcode::Assign:
        s.regs[in.dst] = eval_cexpr(in.rhs, s, w);
        s.pc += 1;
        break;
    case Opcode::Load: {
        CVal a = read_reg(s, in.addr);
        if (bounds_fault(a.n)) return {true, false, "out-of-bounds load"};
        CVal m = read_mem(s, a.n);
        const bool hi = m.hi || a.hi || in_region(a.n);
        s.regs[in.dst] = labeled(m.n, hi, w);
        s.pc += 1;
        break;
    }
    case Opcode::Store: {
        CVal v = read_reg(s, in.src);
        CVal a = read_reg(s, in.addr);
        if (bounds_fault(a.n)) return {true, false, "out-of-bounds store"};
        s.mem[a.n] = v;
        s.pc += 1;
        break;
    }
    case Opcode::IsZero: {
        CVal v = read_reg(s, in.src);
        s.regs[in.dst] = labeled(v.n == 0 ? 1 : 0, false, w);
        s.pc += 1;
        break;
    }
    case Opcode::Jcc: {
        CVal c = read_reg(s, in.src);
        if (c.n == 0) {
            s.pc += 1;
            break;
        }
        const Function* f = p.function_of(s.pc);
        if (!in.target.is_register) {
            s.pc = *p.resolve_label(*f, in.target.name);
            break;
        }
        CVal t = read_reg(s, in.target.name);
        std::optional<std::size_t> dest;
        for (const auto& lbl : in.target.candidates)
            if (auto lp = p.resolve_label(*f, lbl))
                if (*lp == t.n) dest = *lp;
        if (!dest) return {true, false, "unresolved jump target"};
        s.pc = *dest;
        break;
    }
    case Opcode::Call: {
        const Function* callee = p.find_function(in.callee);
        s.return_stack.push_back(s.pc + 1);
        s.frame_bases.push_back(read_reg(s, kStackRegister).n);
        s.pc = callee->entry_pc;
        break;
    }
    case Opcode::Ret: {
        if (s.return_stack.empty()) return {false, true, ""};
        s.pc = s.return_stack.back();
        s.return_stack.pop_back();
        s.frame_bases.pop_back();
        break;
    }
    }
    return {};
}

// Runs the program from its entry function under a secret assignment. The
// trace carries the post-state of every executed command plus the frame
// base, so a checker can relate stack slots back to frame offsets.
inline Trace crun(const Program& p, const OracleConfig& cfg, const SecretAssignment& secrets,
                  std::uint64_t fuel,
                  const std::map<std::uint64_t, std::uint64_t>& initial_memory = {}) {
    const unsigned w = cfg.width;
    Trace tr;
    CState s;
    const Function* entry = p.find_function(p.entry);
    s.pc = entry->entry_pc;
    s.regs[kStackRegister] = labeled(cfg.stack_base, false, w);
    s.frame_bases.push_back(cfg.stack_base);
    for (const auto& [addr, val] : initial_memory) s.mem[truncate(addr, w)] = labeled(val, false, w);
    for (const auto& ann : entry->annotations) {
        if (ann.kind == SecretAnnotation::Kind::Register) {
            auto it = secrets.registers.find(ann.reg);
            s.regs[ann.reg] = labeled(it == secrets.registers.end() ? 0 : it->second, true, w);
        } else {
            s.regs[ann.reg] = labeled(cfg.region_base, false, w);
            for (std::uint64_t off = 0; off < ann.region_size; ++off) {
                auto it = secrets.region.find(off);
                s.mem[truncate(cfg.region_base + off, w)] =
                    labeled(it == secrets.region.end() ? 0 : it->second, true, w);
            }
        }
    }
    tr.initial = s;

    for (std::uint64_t step = 0; step < fuel; ++step) {
        const std::size_t pc = s.pc;
        const std::uint64_t frame = s.frame_bases.back();
        StepOutcome o = cstep(p, cfg, s);
        if (o.faulted) {
            tr.outcome = Trace::Outcome::Fault;
            tr.fault = o.fault;
            tr.fault_pc = pc;
            return tr;
        }
        tr.steps.push_back({pc, frame, s});
        if (o.returned) {
            tr.outcome = Trace::Outcome::Returned;
            return tr;
        }
    }
    tr.outcome = Trace::Outcome::FuelExhausted;
    return tr;
}

inline std::string dump_trace(const Trace& tr) {
    std::string out;
    const CState* prev = &tr.initial;
    for (const auto& st : tr.steps) {
        out += "pc=" + std::to_string(st.pc);
        for (const auto& [r, v] : st.post.regs) {
            auto it = prev->regs.find(r);
            if (it == prev->regs.end() || it->second.n != v.n || it->second.hi != v.hi)
                out += " " + r + "=" + std::to_string(v.n) + "/" + (v.hi ? "hi" : "lo");
        }
        for (const auto& [a, v] : st.post.mem) {
            auto it = prev->mem.find(a);
            if (it == prev->mem.end() || it->second.n != v.n || it->second.hi != v.hi)
                out += " mem[" + std::to_string(a) + "]=" + std::to_string(v.n) + "/" +
                       (v.hi ? "hi" : "lo");
        }
        out += "\n";
        prev = &st.post;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concretization membership

struct Valuation {
    std::map<std::uint32_t, std::uint64_t> secrets; // annotation secrets only
    std::uint64_t frame_base = 0;                   // concrete value of e
    std::uint64_t region_base = 0;                  // concrete value of u
    std::uint64_t region_size = 0;
    std::uint64_t stack_lo = 0, stack_hi = 0;       // the stack range
    unsigned width = 32;
};

namespace oracle_detail {

// Evaluates a formula under the valuation; fails when a secret identifier
// has no recorded concrete value (minted secrets of the analysis).
inline std::optional<std::uint64_t> eval_av(const Av& f, const Valuation& val) {
    switch (f.kind()) {
    case Av::Kind::Const: return f.const_value();
    case Av::Kind::StackBase: return val.frame_base;
    case Av::Kind::Header: return val.region_base;
    case Av::Kind::Secret: {
        auto it = val.secrets.find(f.secret_id());
        if (it == val.secrets.end()) return std::nullopt;
        return it->second;
    }
    case Av::Kind::Node: {
        auto a = eval_av(f.lhs(), val);
        auto b = eval_av(f.rhs(), val);
        if (!a || !b) return std::nullopt;
        return eval_binop(f.op(), *a, *b, val.width);
    }
    default:
        return std::nullopt; // top and p are not evaluable
    }
}

} // namespace oracle_detail

// Membership in the concretization of one abstract value. Top covers
// everything and p covers every lo value. Secret-carrying formulas require a
// hi label, and when every secret in the formula has a known concrete value
// the numeric result must match as well. All other formulas must evaluate to
// the value with a lo label; the bare e and u leaves accept any address of
// their range.
inline bool gamma_member(const Av& f, const CVal& v, const Valuation& val) {
    switch (f.kind()) {
    case Av::Kind::Top: return true;
    case Av::Kind::Pub: return !v.hi;
    case Av::Kind::StackBase:
        return !v.hi && v.n >= val.stack_lo && v.n <= val.stack_hi;
    case Av::Kind::Header:
        return !v.hi && v.n >= val.region_base && v.n < val.region_base + val.region_size;
    default:
        break;
    }
    if (f.has_secret()) {
        auto n = oracle_detail::eval_av(f, val);
        // Secrets minted at load sites have no recorded concrete value and
        // may stand for public cells (a u-shaped address can leave the
        // region), so they concretize to every value. Annotation-backed
        // formulas evaluate exactly and must be hi.
        if (!n) return true;
        return v.hi && *n == v.n;
    }
    auto n = oracle_detail::eval_av(f, val);
    return !v.hi && n && *n == v.n;
}

inline bool covered_by(const ValueSet& vs, const CVal& v, const Valuation& val) {
    for (const auto& f : vs)
        if (gamma_member(f, v, val)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Differential soundness harness

struct Violation {
    std::uint32_t run = 0;
    std::size_t step = 0;
    std::size_t pc = 0;
    std::string key;
    std::uint64_t concrete = 0;
    bool concrete_hi = false;
    std::string abstract_set;
};

struct SoundnessReport {
    std::vector<Violation> violations;
    std::vector<std::string> faults; // surfaced, not counted as violations
    std::uint32_t runs = 0;
    std::uint64_t checked_values = 0;
    bool partial_analysis = false; // no fixpoint: coverage checks were skipped
};

inline SecretAssignment random_assignment(const Program& p, std::mt19937_64& rng, unsigned w) {
    SecretAssignment a;
    const Function* entry = p.find_function(p.entry);
    std::uniform_int_distribution<std::uint64_t> dist(0, width_mask(w));
    for (const auto& ann : entry->annotations) {
        if (ann.kind == SecretAnnotation::Kind::Register)
            a.registers[ann.reg] = dist(rng);
        else
            for (std::uint64_t off = 0; off < ann.region_size; ++off) a.region[off] = dist(rng);
    }
    return a;
}

// Replays random concrete executions and checks every value the analysis
// makes a claim about against the fixpoint state at that pc. An analysis
// that stopped before the fixpoint (store escape, iteration budget) makes no
// final per-pc claims: its stored states are mid-iteration snapshots, so the
// runs still execute (surfacing faults) but coverage is not checked.
inline SoundnessReport check_soundness(const Program& p, const AnalysisResult& analysis,
                                       std::uint32_t runs, std::uint64_t seed,
                                       const OracleConfig& cfg,
                                       const std::map<std::string, std::uint32_t>& annotation_ids,
                                       std::uint64_t fuel = 100000) {
    SoundnessReport rep;
    rep.runs = runs;
    rep.partial_analysis = !analysis.fixpoint_reached();
    std::mt19937_64 rng(seed);
    const Function* entry = p.find_function(p.entry);
    std::uint64_t region_size = 0;
    for (const auto& ann : entry->annotations)
        if (ann.kind == SecretAnnotation::Kind::RegionBase)
            region_size = std::max(region_size, ann.region_size);

    for (std::uint32_t run = 0; run < runs; ++run) {
        SecretAssignment secrets = random_assignment(p, rng, cfg.width);
        Trace tr = crun(p, cfg, secrets, fuel);
        if (tr.outcome == Trace::Outcome::Fault)
            rep.faults.push_back("run " + std::to_string(run) + ": " + tr.fault + " at pc " +
                                 std::to_string(tr.fault_pc));

        Valuation val;
        val.width = cfg.width;
        val.region_base = cfg.region_base;
        val.region_size = region_size;
        val.stack_lo = truncate(cfg.stack_base - cfg.stack_size, cfg.width);
        val.stack_hi = cfg.stack_base;
        for (const auto& ann : entry->annotations)
            if (ann.kind == SecretAnnotation::Kind::Register) {
                auto it = annotation_ids.find(entry->name + ":" + ann.reg);
                if (it != annotation_ids.end())
                    val.secrets[it->second] = secrets.registers.at(ann.reg);
            }

        const CState* pre = &tr.initial;
        for (std::size_t i = 0; !rep.partial_analysis && i < tr.steps.size(); ++i) {
            const TraceStep& step = tr.steps[i];
            auto ait = analysis.states.find(step.pc);
            if (ait == analysis.states.end()) {
                pre = &step.post;
                continue;
            }
            val.frame_base = step.frame_base;
            for (const auto& [key, vs] : ait->second.entries()) {
                std::optional<CVal> cv;
                switch (key.kind) {
                case StateKey::Kind::Register: {
                    auto it = pre->regs.find(key.reg);
                    if (it != pre->regs.end()) cv = it->second;
                    break;
                }
                case StateKey::Kind::StackSlot: {
                    std::uint64_t addr = truncate(
                        step.frame_base + static_cast<std::uint64_t>(key.offset), cfg.width);
                    auto it = pre->mem.find(addr);
                    if (it != pre->mem.end()) cv = it->second;
                    break;
                }
                case StateKey::Kind::AccessExpr: {
                    auto rit = pre->regs.find(key.reg);
                    if (rit == pre->regs.end()) break;
                    std::uint64_t addr = truncate(
                        rit->second.n + static_cast<std::uint64_t>(key.offset), cfg.width);
                    auto it = pre->mem.find(addr);
                    if (it != pre->mem.end()) cv = it->second;
                    break;
                }
                }
                if (!cv) continue;
                ++rep.checked_values;
                if (!covered_by(vs, *cv, val)) {
                    rep.violations.push_back({run, i, step.pc, to_string(key), cv->n, cv->hi,
                                              to_string(vs)});
                }
            }
            pre = &step.post;
        }
    }
    return rep;
}

} // namespace sas
