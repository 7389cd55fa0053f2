#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sas/domain.hpp"
#include "sas/ir.hpp"

namespace sas {

// Program-state lookup tables: registers, stack slots addressed relative to
// the initial stack pointer, and syntactic access expressions !(reg+off) for
// everything else. An absent key is the empty value set.

struct StateKey {
    enum class Kind : std::uint8_t { Register, StackSlot, AccessExpr };
    Kind kind = Kind::Register;
    std::string reg;          // Register name or AccessExpr base
    std::int64_t offset = 0;  // StackSlot / AccessExpr offset

    static StateKey make_register(std::string r) { return {Kind::Register, std::move(r), 0}; }
    static StateKey stack_slot(std::int64_t off) { return {Kind::StackSlot, {}, off}; }
    static StateKey access(std::string base, std::int64_t off) {
        return {Kind::AccessExpr, std::move(base), off};
    }

    friend bool operator<(const StateKey& a, const StateKey& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.reg != b.reg) return a.reg < b.reg;
        return a.offset < b.offset;
    }
    friend bool operator==(const StateKey& a, const StateKey& b) {
        return a.kind == b.kind && a.reg == b.reg && a.offset == b.offset;
    }
};

inline std::string to_string(const StateKey& k) {
    switch (k.kind) {
    case StateKey::Kind::Register: return k.reg;
    case StateKey::Kind::StackSlot:
        return "stack[" + std::to_string(k.offset) + "]";
    case StateKey::Kind::AccessExpr: {
        std::string off;
        if (k.offset > 0) off = "+" + std::to_string(k.offset);
        else if (k.offset < 0) off = std::to_string(k.offset);
        return "!(" + k.reg + off + ")";
    }
    }
    return "?";
}

class AbsState {
public:
    const std::map<StateKey, ValueSet>& entries() const { return map_; }

    ValueSet get(const StateKey& k, std::uint32_t bound) const {
        auto it = map_.find(k);
        if (it == map_.end()) return ValueSet(bound);
        return it->second;
    }
    bool has(const StateKey& k) const { return map_.count(k) != 0; }

    void set(const StateKey& k, ValueSet v) {
        if (v.empty()) map_.erase(k);
        else map_[k] = std::move(v);
    }
    void weak_set(const StateKey& k, const ValueSet& v) {
        set(k, join(get(k, v.bound()), v));
    }
    // Assigning a register invalidates every access-expression entry based
    // on it; the stored addresses no longer describe the same cells.
    void kill_access_entries(const std::string& reg) {
        for (auto it = map_.begin(); it != map_.end();) {
            if (it->first.kind == StateKey::Kind::AccessExpr && it->first.reg == reg)
                it = map_.erase(it);
            else
                ++it;
        }
    }
    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }

    friend bool operator==(const AbsState& a, const AbsState& b) { return a.map_ == b.map_; }

private:
    std::map<StateKey, ValueSet> map_;
};

inline AbsState merge_states(const AbsState& a, const AbsState& b) {
    AbsState out = a;
    for (const auto& [k, v] : b.entries()) {
        auto existing = out.get(k, v.bound());
        out.set(k, join(existing, v));
    }
    return out;
}

inline bool state_leq(const AbsState& a, const AbsState& b) {
    for (const auto& [k, v] : a.entries())
        if (!leq_vs(v, b.get(k, v.bound()))) return false;
    return true;
}

// ---------------------------------------------------------------------------

struct Context {
    std::string callee;
    std::string caller;
    std::vector<ValueSet> args;
};

inline std::string context_key(const Context& c) {
    std::string k = c.callee + "<" + c.caller;
    for (const auto& a : c.args) k += "|" + to_string(a);
    return k;
}

struct Summary {
    Context ctx;
    ValueSet ret;   // joined eax at return points, callee frame coordinates
    AbsState exit;  // caller-visible effects, callee frame coordinates
};

enum class SiteKind : std::uint8_t { MemLoad, MemStore, Branch };

inline const char* site_kind_name(SiteKind k) {
    switch (k) {
    case SiteKind::MemLoad: return "memload";
    case SiteKind::MemStore: return "memstore";
    case SiteKind::Branch: return "branch";
    }
    return "?";
}

struct SiteRecord {
    std::size_t pc = 0;
    SiteKind kind = SiteKind::MemLoad;
    std::vector<Av> formulas; // the address / condition value set at fixpoint
};

enum class TermCause : std::uint8_t { Fixpoint, StoreEscape, IterationBudget };

struct Termination {
    TermCause cause = TermCause::Fixpoint;
    std::optional<std::size_t> pc; // StoreEscape: the offending store
    std::string detail;
    std::set<std::size_t> pending; // IterationBudget: pcs still on the worklist
};

struct AnalysisStats {
    std::uint64_t iterations = 0;          // transfer applications
    std::uint32_t contexts_analyzed = 0;   // intra-procedural fixpoints run
    std::uint32_t functions_analyzed = 0;  // distinct functions reached
    std::size_t instructions_reached = 0;  // distinct pcs with a state
    std::size_t peak_state_entries = 0;    // largest lookup table seen
};

struct AnalysisResult {
    std::map<std::size_t, AbsState> states; // per-pc in-states, joined over contexts
    std::vector<SiteRecord> sites;
    Termination termination;
    AnalysisStats stats;
    std::map<std::string, std::uint32_t> annotation_secrets; // "fn:reg" -> secret id

    bool fixpoint_reached() const { return termination.cause == TermCause::Fixpoint; }
};

// Deterministic fresh-secret allocation: the same site in the same calling
// context always yields the same identifier, which is what lets the fixpoint
// stabilize in the presence of secret-minting loads.
class FreshSecretTable {
public:
    std::uint32_t id_for(const std::string& site) {
        auto it = ids_.find(site);
        if (it != ids_.end()) return it->second;
        std::uint32_t id = next_++;
        ids_.emplace(site, id);
        return id;
    }
    std::uint32_t allocated() const { return next_ - 1; }

private:
    std::map<std::string, std::uint32_t> ids_;
    std::uint32_t next_ = 1;
};

struct EngineConfig {
    unsigned width = 32;
    std::uint32_t bound = kDefaultBound;
    std::uint32_t call_depth_budget = 16;
    std::uint64_t iteration_budget = 1000000;
    bool check_branches = true;
};

class Engine {
public:
    Engine(const Program& program, EngineConfig cfg) : prog_(program), cfg_(cfg) {
        compute_access_exprs();
    }

    AnalysisResult run() {
        const Function* entry = prog_.find_function(prog_.entry);
        Context ctx{entry->name, "", {}};
        analyze_function(*entry, ctx, 0);

        AnalysisResult res;
        res.states = global_states_;
        res.termination = term_;
        res.annotation_secrets = annotation_ids_;
        res.stats.iterations = iterations_;
        res.stats.contexts_analyzed = contexts_analyzed_;
        res.stats.functions_analyzed = static_cast<std::uint32_t>(functions_seen_.size());
        res.stats.instructions_reached = global_states_.size();
        res.stats.peak_state_entries = peak_entries_;
        collect_sites(res);
        return res;
    }

    // Entry state for a function analyzed in its own frame: esp holds e and
    // the annotations introduce the initial secret and region symbols.
    AbsState init_state(const Function& fn) {
        AbsState st;
        st.set(StateKey::make_register(kStackRegister), single(Av::stack_base()));
        for (const auto& ann : fn.annotations) {
            if (ann.kind == SecretAnnotation::Kind::Register) {
                std::uint32_t id = fresh_.id_for("ann:" + fn.name + ":" + ann.reg);
                annotation_ids_[fn.name + ":" + ann.reg] = id;
                st.set(StateKey::make_register(ann.reg), single(Av::secret(id)));
            } else {
                st.set(StateKey::make_register(ann.reg), single(Av::header()));
            }
        }
        return st;
    }

    ValueSet eval_operand(const Operand& o, const AbsState& st) const {
        if (o.is_literal) return single(Av::constant(o.value, cfg_.width));
        StateKey k = StateKey::make_register(o.reg);
        if (!st.has(k)) return single(Av::pub()); // reading an unknown variable
        return st.get(k, cfg_.bound);
    }

    ValueSet eval_expr(const Expr& e, const AbsState& st) const {
        if (e.is_leaf()) return eval_operand(e.leaf, st);
        ValueSet l = eval_expr(*e.lhs, st);
        ValueSet r = eval_expr(*e.rhs, st);
        std::vector<Av> out;
        out.reserve(l.size() * r.size());
        for (const auto& a : l)
            for (const auto& b : r) out.push_back(reduce(*e.op, a, b, cfg_.width));
        return ValueSet(std::move(out), cfg_.bound);
    }

    struct StepResult {
        AbsState state;
        bool terminated = false;
    };

    // Transfer function for one command. Call instructions recurse into the
    // summary machinery; a store through p or top ends the whole analysis.
    StepResult transfer_at(std::size_t pc, const AbsState& in,
                           const std::string& ctx_tag = "test", std::uint32_t depth = 0,
                           const std::string& caller = "") {
        const Instr& instr = prog_.commands.at(pc);
        AbsState out = in;
        switch (instr.op) {
        case Opcode::Assign: {
            ValueSet v = eval_expr(instr.rhs, in);
            out.set(StateKey::make_register(instr.dst), std::move(v));
            out.kill_access_entries(instr.dst);
            break;
        }
        case Opcode::Load: {
            ValueSet addr = in.get(StateKey::make_register(instr.addr), cfg_.bound);
            ValueSet v = load_value(pc, addr, in, ctx_tag, instr.addr);
            out.set(StateKey::make_register(instr.dst), std::move(v));
            out.kill_access_entries(instr.dst);
            break;
        }
        case Opcode::Store: {
            ValueSet addr = in.get(StateKey::make_register(instr.addr), cfg_.bound);
            if (addr.has_top() || addr.has_pub()) {
                term_.cause = TermCause::StoreEscape;
                term_.pc = pc;
                term_.detail = addr.has_top() ? "store through top rewrites all of memory"
                                              : "store through p rewrites all of memory";
                return {std::move(out), true};
            }
            ValueSet val = reg_or_pub(instr.src, in);
            bool non_stack = addr.empty();
            for (const auto& a : addr) {
                if (a.is_stack_offset())
                    out.weak_set(StateKey::stack_slot(slot_offset(a)), val);
                else
                    non_stack = true;
            }
            if (non_stack) {
                auto [base, off] = access_expr(pc, instr.addr);
                out.weak_set(StateKey::access(base, off), val);
            }
            break;
        }
        case Opcode::IsZero: {
            ValueSet src = reg_or_pub(instr.src, in);
            bool all_const = !src.empty();
            bool has_zero = false;
            for (const auto& v : src) {
                if (!v.is_const()) {
                    all_const = false;
                    break;
                }
                has_zero |= v.const_value() == 0;
            }
            std::vector<Av> bits;
            const Av zero = Av::constant(0, cfg_.width);
            const Av one = Av::constant(1, cfg_.width);
            if (all_const && src.size() == 1 && has_zero) bits = {one};
            else if (all_const && !has_zero) bits = {zero};
            else bits = {zero, one};
            out.set(StateKey::make_register(instr.dst), ValueSet(std::move(bits), cfg_.bound));
            out.kill_access_entries(instr.dst);
            break;
        }
        case Opcode::Jcc:
        case Opcode::Ret:
            break;
        case Opcode::Call: {
            const Function* callee = prog_.find_function(instr.callee);
            if (!apply_call(*callee, caller, out, depth)) return {std::move(out), true};
            break;
        }
        }
        return {std::move(out), false};
    }

    const FreshSecretTable& fresh_table() const { return fresh_; }
    const std::vector<Summary>& summaries() const { return summaries_; }

private:
    ValueSet single(const Av& v) const { return ValueSet::single(v, cfg_.bound); }

    ValueSet reg_or_pub(const std::string& r, const AbsState& st) const {
        StateKey k = StateKey::make_register(r);
        if (!st.has(k)) return single(Av::pub());
        return st.get(k, cfg_.bound);
    }

    std::int64_t slot_offset(const Av& v) const {
        return to_signed(v.stack_offset(), cfg_.width);
    }

    std::pair<std::string, std::int64_t> access_expr(std::size_t pc, const std::string& addr) const {
        auto it = access_exprs_.find(pc);
        if (it == access_exprs_.end()) return {addr, 0};
        return it->second;
    }

    // A load resolves each address value separately: top and p read unknown
    // memory (top), stack offsets read their slots, anything else goes through
    // the syntactic access-expression entry. Missing cells read p, or a fresh
    // secret when the address itself is secret-tainted or points at the
    // secret region.
    ValueSet load_value(std::size_t pc, const ValueSet& addr, const AbsState& in,
                        const std::string& ctx_tag, const std::string& addr_reg) {
        if (addr.has_top() || addr.has_pub()) return single(Av::top());
        const bool want_fresh = addr.has_secret_value() || addr.has_header_value();
        std::vector<Av> acc;
        bool any_absent = false;
        bool non_stack = addr.empty();
        for (const auto& a : addr) {
            if (a.is_stack_offset()) {
                StateKey k = StateKey::stack_slot(slot_offset(a));
                if (in.has(k)) {
                    const ValueSet& v = in.get(k, cfg_.bound);
                    acc.insert(acc.end(), v.begin(), v.end());
                } else {
                    any_absent = true;
                }
            } else {
                non_stack = true;
            }
        }
        if (non_stack) {
            auto [base, off] = access_expr(pc, addr_reg);
            StateKey k = StateKey::access(base, off);
            if (in.has(k)) {
                const ValueSet& v = in.get(k, cfg_.bound);
                acc.insert(acc.end(), v.begin(), v.end());
            } else {
                any_absent = true;
            }
        }
        if (any_absent) {
            if (want_fresh)
                acc.push_back(Av::secret(fresh_.id_for("pc:" + std::to_string(pc) + "|" + ctx_tag)));
            else
                acc.push_back(Av::pub());
        }
        return ValueSet(std::move(acc), cfg_.bound);
    }

    // Rebuilds a value with the stack-base leaf shifted by delta, used when
    // values cross a call boundary between frame coordinate systems.
    Av rebase(const Av& v, std::uint64_t delta) const {
        switch (v.kind()) {
        case Av::Kind::StackBase:
            return make_stack_offset(delta, cfg_.width);
        case Av::Kind::Node:
            return reduce(v.op(), rebase(v.lhs(), delta), rebase(v.rhs(), delta), cfg_.width);
        default:
            return v;
        }
    }
    Av demote_stack(const Av& v) const {
        switch (v.kind()) {
        case Av::Kind::StackBase:
            return Av::pub();
        case Av::Kind::Node:
            return reduce(v.op(), demote_stack(v.lhs()), demote_stack(v.rhs()), cfg_.width);
        default:
            return v;
        }
    }
    ValueSet map_values(const ValueSet& vs, std::optional<std::uint64_t> delta) const {
        std::vector<Av> out;
        out.reserve(vs.size());
        for (const auto& v : vs) out.push_back(delta ? rebase(v, *delta) : demote_stack(v));
        return ValueSet(std::move(out), cfg_.bound);
    }

    // Depth-budget widening: one bound step up the lattice. Secret-carrying
    // sets widen to top, top stays top, everything else becomes p.
    static ValueSet degrade(const ValueSet& v, std::uint32_t bound) {
        if (v.has_top() || v.has_secret_value()) return ValueSet({Av::top()}, bound);
        return ValueSet({Av::pub()}, bound);
    }

    // Resolves arguments from the caller frame, obtains (or computes) the
    // callee summary and folds its effects back into the caller state.
    // Returns false when the callee terminated the analysis.
    bool apply_call(const Function& callee, const std::string& caller, AbsState& out,
                    std::uint32_t depth) {
        ValueSet esp = out.get(StateKey::make_register(kStackRegister), cfg_.bound);
        std::optional<std::int64_t> frame; // caller esp offset at the call
        if (esp.size() == 1 && esp.all_stack_offsets()) frame = slot_offset(*esp.begin());

        Context ctx;
        ctx.callee = callee.name;
        ctx.caller = caller;
        for (std::uint32_t i = 0; i < callee.param_count; ++i) {
            ValueSet arg(cfg_.bound);
            if (frame) {
                StateKey k = StateKey::stack_slot(*frame + 4 * static_cast<std::int64_t>(i));
                if (out.has(k))
                    arg = map_values(out.get(k, cfg_.bound),
                                     truncate(static_cast<std::uint64_t>(-*frame), cfg_.width));
            }
            if (arg.empty()) arg = single(Av::pub());
            ctx.args.push_back(std::move(arg));
        }
        if (depth >= cfg_.call_depth_budget)
            for (auto& a : ctx.args) a = degrade(a, cfg_.bound);

        auto sub = analyze_function(callee, ctx, depth + 1);
        if (!sub) return false;
        const Summary& sm = *sub;

        std::optional<std::uint64_t> back;
        if (frame) back = truncate(static_cast<std::uint64_t>(*frame), cfg_.width);
        for (const auto& [k, v] : sm.exit.entries()) {
            switch (k.kind) {
            case StateKey::Kind::Register: {
                if (k.reg == kStackRegister) break; // convention: callee restores esp
                ValueSet tv = map_values(v, back);
                out.weak_set(k, tv);
                out.kill_access_entries(k.reg);
                break;
            }
            case StateKey::Kind::StackSlot:
                // Offsets >= 0 lie in the caller-visible part of the stack;
                // negative ones are callee locals and die with the frame.
                if (k.offset >= 0 && frame)
                    out.weak_set(StateKey::stack_slot(k.offset + *frame), map_values(v, back));
                break;
            case StateKey::Kind::AccessExpr:
                break; // callee-relative pointer entries do not survive the return
            }
        }
        return true;
    }

    // One intra-procedural fixpoint for a calling context, with summary reuse:
    // a context subsumed by an already-recorded one is never re-analyzed.
    std::optional<Summary> analyze_function(const Function& fn, const Context& ctx,
                                            std::uint32_t depth) {
        for (std::size_t idx : summary_index_[fn.name]) {
            const Summary& s = summaries_[idx];
            if (s.ctx.caller != ctx.caller) continue;
            bool covered = s.ctx.args.size() == ctx.args.size();
            for (std::size_t i = 0; covered && i < ctx.args.size(); ++i)
                covered = leq_vs(ctx.args[i], s.ctx.args[i]);
            if (covered) return s;
        }
        const std::string key = context_key(ctx);
        if (in_progress_.count(key)) {
            // Recursive cycle at the depth cap: cut with the coarsest answer.
            Summary cut;
            cut.ctx = ctx;
            cut.ret = single(Av::top());
            return cut;
        }
        in_progress_.insert(key);
        functions_seen_.insert(fn.name);
        ++contexts_analyzed_;

        std::map<std::size_t, AbsState> states;
        AbsState entry = init_state(fn);
        for (std::size_t i = 0; i < ctx.args.size(); ++i)
            entry.set(StateKey::stack_slot(4 * static_cast<std::int64_t>(i)), ctx.args[i]);
        states[fn.entry_pc] = std::move(entry);

        std::set<std::size_t> worklist{fn.entry_pc};
        AbsState exit_join;
        bool stopped = false;
        while (!worklist.empty()) {
            if (iterations_ >= cfg_.iteration_budget) {
                term_.cause = TermCause::IterationBudget;
                term_.pending = worklist;
                stopped = true;
                break;
            }
            const std::size_t pc = *worklist.begin();
            worklist.erase(worklist.begin());
            const AbsState in = states[pc];
            ++iterations_;
            peak_entries_ = std::max(peak_entries_, in.size());

            StepResult step = transfer_at(pc, in, key, depth, fn.name);
            if (step.terminated || term_.cause != TermCause::Fixpoint) {
                stopped = true;
                break;
            }
            if (prog_.commands[pc].op == Opcode::Ret) {
                exit_join = merge_states(exit_join, in);
                continue;
            }
            for (std::size_t s : successors(prog_, pc)) {
                AbsState& stored = states[s];
                if (!state_leq(step.state, stored)) {
                    stored = merge_states(stored, step.state);
                    worklist.insert(s);
                }
            }
        }

        for (const auto& [pc, st] : states) {
            auto& g = global_states_[pc];
            g = merge_states(g, st);
        }
        in_progress_.erase(key);
        if (stopped) return std::nullopt;

        Summary sm;
        sm.ctx = ctx;
        sm.ret = exit_join.get(StateKey::make_register("eax"), cfg_.bound);
        for (const auto& [k, v] : exit_join.entries()) {
            if (k.kind == StateKey::Kind::AccessExpr) continue;
            if (k.kind == StateKey::Kind::StackSlot && k.offset < 0) continue;
            if (k.kind == StateKey::Kind::Register && k.reg == kStackRegister) continue;
            sm.exit.set(k, v);
        }
        summaries_.push_back(sm);
        summary_index_[fn.name].push_back(summaries_.size() - 1);
        return sm;
    }

    // Sites are read off the fixpoint states: any load/store whose address
    // set carries a secret or top, and any branch condition likewise.
    void collect_sites(AnalysisResult& res) const {
        for (const auto& [pc, st] : res.states) {
            const Instr& in = prog_.commands[pc];
            SiteKind kind;
            std::string reg;
            if (in.op == Opcode::Load) {
                kind = SiteKind::MemLoad;
                reg = in.addr;
            } else if (in.op == Opcode::Store) {
                kind = SiteKind::MemStore;
                reg = in.addr;
            } else if (in.op == Opcode::Jcc && cfg_.check_branches) {
                kind = SiteKind::Branch;
                reg = in.src;
            } else {
                continue;
            }
            ValueSet v = st.get(StateKey::make_register(reg), cfg_.bound);
            if (v.has_top() || v.has_secret_value())
                res.sites.push_back({pc, kind, v.values()});
        }
    }

    // Block-local recovery of access expressions: when a load/store address
    // register provably holds base+offset of another live register at that
    // point, the table entry is keyed on the base so separately computed
    // temporaries still hit the same cell.
    void compute_access_exprs() {
        for (const auto& fn : prog_.functions) {
            std::set<std::size_t> leaders{fn.entry_pc};
            for (std::size_t pc = fn.body_begin; pc < fn.body_end; ++pc) {
                const Instr& in = prog_.commands[pc];
                if (in.op == Opcode::Jcc || in.op == Opcode::Call) {
                    if (pc + 1 < fn.body_end) leaders.insert(pc + 1);
                    for (std::size_t s : successors(prog_, pc))
                        if (s >= fn.body_begin && s < fn.body_end) leaders.insert(s);
                }
            }
            std::map<std::string, std::pair<std::string, std::int64_t>> env;
            for (std::size_t pc = fn.body_begin; pc < fn.body_end; ++pc) {
                if (leaders.count(pc)) env.clear();
                const Instr& in = prog_.commands[pc];
                if (in.op == Opcode::Load || in.op == Opcode::Store) {
                    auto it = env.find(in.addr);
                    if (it != env.end())
                        access_exprs_[pc] = {it->second.first,
                                             to_signed(truncate(static_cast<std::uint64_t>(
                                                                    it->second.second),
                                                                cfg_.width),
                                                       cfg_.width)};
                    else
                        access_exprs_[pc] = {in.addr, 0};
                }
                auto invalidate = [&](const std::string& r) {
                    env.erase(r);
                    for (auto it = env.begin(); it != env.end();)
                        it = it->second.first == r ? env.erase(it) : ++it;
                };
                if (in.op == Opcode::Assign) {
                    std::optional<std::pair<std::string, std::int64_t>> resolved;
                    const Expr& e = in.rhs;
                    auto chase = [&](const std::string& r) -> std::pair<std::string, std::int64_t> {
                        auto it = env.find(r);
                        return it != env.end() ? it->second : std::make_pair(r, std::int64_t{0});
                    };
                    if (e.is_leaf() && !e.leaf.is_literal) {
                        resolved = chase(e.leaf.reg);
                    } else if (e.op && (*e.op == BinOp::Add || *e.op == BinOp::Sub) &&
                               e.lhs->is_leaf() && e.rhs->is_leaf()) {
                        const Operand& a = e.lhs->leaf;
                        const Operand& b = e.rhs->leaf;
                        const std::int64_t sign = *e.op == BinOp::Sub ? -1 : 1;
                        if (!a.is_literal && b.is_literal) {
                            auto base = chase(a.reg);
                            resolved = {base.first,
                                        base.second + sign * to_signed(b.value, cfg_.width)};
                        } else if (a.is_literal && !b.is_literal && *e.op == BinOp::Add) {
                            auto base = chase(b.reg);
                            resolved = {base.first, base.second + to_signed(a.value, cfg_.width)};
                        }
                    }
                    invalidate(in.dst);
                    if (resolved && resolved->first != in.dst) env[in.dst] = *resolved;
                } else if (in.op == Opcode::Load || in.op == Opcode::IsZero) {
                    invalidate(in.dst);
                } else if (in.op == Opcode::Call) {
                    env.clear();
                }
            }
        }
    }

    const Program& prog_;
    EngineConfig cfg_;
    FreshSecretTable fresh_;
    std::map<std::string, std::uint32_t> annotation_ids_;
    std::vector<Summary> summaries_;
    std::map<std::string, std::vector<std::size_t>> summary_index_;
    std::set<std::string> in_progress_;
    std::map<std::size_t, AbsState> global_states_;
    std::map<std::size_t, std::pair<std::string, std::int64_t>> access_exprs_;
    Termination term_;
    std::uint64_t iterations_ = 0;
    std::uint32_t contexts_analyzed_ = 0;
    std::set<std::string> functions_seen_;
    std::size_t peak_entries_ = 0;
};

inline AnalysisResult run_worklist(const Program& program, const EngineConfig& cfg) {
    Engine engine(program, cfg);
    return engine.run();
}

} // namespace sas
