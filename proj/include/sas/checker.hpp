#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sas/absint.hpp"
#include "sas/domain.hpp"

namespace sas {

// Bitvector constraints over the abstract formulas of flagged sites. Secret
// symbols become per-identifier variables; p, e and u are shared free
// variables, identical in the original and the renamed copy, so the check
// asks whether two secrets can differ while all public inputs stay fixed.

struct BvVar {
    enum class Kind : std::uint8_t { Secret, SecretPrime, Public, Stack, Header };
    Kind kind = Kind::Secret;
    std::uint32_t id = 0;

    std::string name() const {
        switch (kind) {
        case Kind::Secret: return "s" + std::to_string(id);
        case Kind::SecretPrime: return "sp" + std::to_string(id);
        case Kind::Public: return "pub";
        case Kind::Stack: return "stk";
        case Kind::Header: return "hdr";
        }
        return "?";
    }
    friend bool operator<(const BvVar& a, const BvVar& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.id < b.id;
    }
    friend bool operator==(const BvVar& a, const BvVar& b) {
        return a.kind == b.kind && a.id == b.id;
    }
};

class BvExpr {
public:
    enum class Kind : std::uint8_t { Const, Var, Op };

    static BvExpr constant(std::uint64_t v) {
        BvExpr e;
        e.kind_ = Kind::Const;
        e.value_ = v;
        return e;
    }
    static BvExpr var(BvVar v) {
        BvExpr e;
        e.kind_ = Kind::Var;
        e.var_ = v;
        return e;
    }
    static BvExpr op(BinOp o, BvExpr a, BvExpr b) {
        BvExpr e;
        e.kind_ = Kind::Op;
        e.op_ = o;
        e.lhs_ = std::make_shared<BvExpr>(std::move(a));
        e.rhs_ = std::make_shared<BvExpr>(std::move(b));
        return e;
    }

    Kind kind() const { return kind_; }
    std::uint64_t value() const { return value_; }
    BvVar variable() const { return var_; }
    BinOp binop() const { return op_; }
    const BvExpr& lhs() const { return *lhs_; }
    const BvExpr& rhs() const { return *rhs_; }

    std::uint64_t eval(const std::map<BvVar, std::uint64_t>& asgn, unsigned w) const {
        switch (kind_) {
        case Kind::Const: return truncate(value_, w);
        case Kind::Var: return truncate(asgn.at(var_), w);
        case Kind::Op: return eval_binop(op_, lhs_->eval(asgn, w), rhs_->eval(asgn, w), w);
        }
        return 0;
    }

    void collect_vars(std::set<BvVar>& out) const {
        switch (kind_) {
        case Kind::Const: return;
        case Kind::Var: out.insert(var_); return;
        case Kind::Op:
            lhs_->collect_vars(out);
            rhs_->collect_vars(out);
        }
    }

    BvExpr rename_secrets() const {
        switch (kind_) {
        case Kind::Const: return *this;
        case Kind::Var:
            if (var_.kind == BvVar::Kind::Secret)
                return var({BvVar::Kind::SecretPrime, var_.id});
            return *this;
        case Kind::Op:
            return op(op_, lhs_->rename_secrets(), rhs_->rename_secrets());
        }
        return *this;
    }

private:
    Kind kind_ = Kind::Const;
    std::uint64_t value_ = 0;
    BvVar var_;
    BinOp op_ = BinOp::Add;
    std::shared_ptr<BvExpr> lhs_, rhs_;
};

// Leaf-by-leaf translation of an abstract formula. Top never reaches here:
// top-valued accesses are flagged before constraint construction.
inline BvExpr translate(const Av& f, unsigned width) {
    switch (f.kind()) {
    case Av::Kind::Top:
        throw std::logic_error("translate: top has no bitvector form");
    case Av::Kind::Pub: return BvExpr::var({BvVar::Kind::Public, 0});
    case Av::Kind::Secret: return BvExpr::var({BvVar::Kind::Secret, f.secret_id()});
    case Av::Kind::Header: return BvExpr::var({BvVar::Kind::Header, 0});
    case Av::Kind::StackBase: return BvExpr::var({BvVar::Kind::Stack, 0});
    case Av::Kind::Const: return BvExpr::constant(truncate(f.const_value(), width));
    case Av::Kind::Node:
        return BvExpr::op(f.op(), translate(f.lhs(), width), translate(f.rhs(), width));
    }
    throw std::logic_error("translate: unreachable");
}

struct LeakConstraint {
    enum class Kind : std::uint8_t { CacheLine, Branch };
    Kind kind = Kind::CacheLine;
    unsigned line_bits = 6;
    unsigned width = 32;
    BvExpr original, renamed;

    bool holds(const std::map<BvVar, std::uint64_t>& asgn) const {
        std::uint64_t a = original.eval(asgn, width);
        std::uint64_t b = renamed.eval(asgn, width);
        if (kind == Kind::CacheLine) {
            a >>= line_bits;
            b >>= line_bits;
        }
        return a != b;
    }

    std::vector<BvVar> variables() const {
        std::set<BvVar> vs;
        original.collect_vars(vs);
        renamed.collect_vars(vs);
        return {vs.begin(), vs.end()};
    }
};

inline bool has_secret_var(const BvExpr& e) {
    std::set<BvVar> vs;
    e.collect_vars(vs);
    for (const auto& v : vs)
        if (v.kind == BvVar::Kind::Secret) return true;
    return false;
}

// Cache-line reachability: can two secrets steer the address to different
// lines, i.e. (f >> L) != (f[s'/s] >> L) with everything public shared.
inline LeakConstraint make_cache_constraint(const BvExpr& f, unsigned line_bits, unsigned width) {
    LeakConstraint c;
    c.kind = LeakConstraint::Kind::CacheLine;
    c.line_bits = line_bits;
    c.width = width;
    c.original = f;
    c.renamed = f.rename_secrets();
    return c;
}

// Branch variant: f != f[s'/s] on a condition value.
inline LeakConstraint make_branch_constraint(const BvExpr& f, unsigned width) {
    LeakConstraint c;
    c.kind = LeakConstraint::Kind::Branch;
    c.width = width;
    c.original = f;
    c.renamed = f.rename_secrets();
    return c;
}

enum class VerdictKind : std::uint8_t { Sat, Unsat, TopAccess, NotApplicable, Unknown };

inline const char* verdict_name(VerdictKind v) {
    switch (v) {
    case VerdictKind::Sat: return "SAT";
    case VerdictKind::Unsat: return "UNSAT";
    case VerdictKind::TopAccess: return "TOP_ACCESS";
    case VerdictKind::NotApplicable: return "NOT_APPLICABLE";
    case VerdictKind::Unknown: return "UNKNOWN";
    }
    return "?";
}

struct Verdict {
    VerdictKind kind = VerdictKind::Unknown;
    std::map<std::string, std::uint64_t> witness; // variable name -> value, Sat only
    std::string reason;

    static Verdict sat(const LeakConstraint& c, const std::map<BvVar, std::uint64_t>& asgn) {
        if (!c.holds(asgn)) throw std::logic_error("witness does not satisfy its constraint");
        Verdict v;
        v.kind = VerdictKind::Sat;
        for (const auto& [var, val] : asgn) v.witness[var.name()] = val;
        return v;
    }
    static Verdict of(VerdictKind k, std::string reason = {}) {
        Verdict v;
        v.kind = k;
        v.reason = std::move(reason);
        return v;
    }
};

// Decides a constraint by search: structured candidates first, then seeded
// random sampling, then full enumeration whenever the combined variable
// width fits under the exhaustive cap (which makes the answer definitive).
inline Verdict solve_enum(const LeakConstraint& c, std::uint64_t budget, std::uint64_t seed,
                          unsigned exhaustive_cap_bits = 24) {
    const std::vector<BvVar> vars = c.variables();
    const unsigned w = c.width;
    if (vars.empty())
        return Verdict::of(VerdictKind::Unsat, "no variables");

    std::map<BvVar, std::uint64_t> asgn;
    for (const auto& v : vars) asgn[v] = 0;
    std::uint64_t tried = 0;
    auto check = [&]() -> bool {
        ++tried;
        return c.holds(asgn);
    };

    // Phase 1: structured candidates; single-bit values, line multiples and
    // boundary values exercised pairwise on each secret while everything
    // else stays at a handful of presets.
    std::vector<std::uint64_t> pool{0, width_mask(w)};
    for (unsigned b = 0; b < w; ++b) pool.push_back(1ull << b);
    for (std::uint64_t k = 1; k <= 16 && (k << c.line_bits) <= width_mask(w); ++k)
        pool.push_back(k << c.line_bits);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    std::vector<std::uint32_t> secret_ids;
    for (const auto& v : vars)
        if (v.kind == BvVar::Kind::Secret) secret_ids.push_back(v.id);
    const std::vector<std::uint64_t> shared_presets{0, 1ull << c.line_bits, width_mask(w)};

    for (std::uint64_t preset : shared_presets) {
        for (auto& [v, val] : asgn)
            val = (v.kind != BvVar::Kind::Secret && v.kind != BvVar::Kind::SecretPrime) ? preset
                                                                                        : 0;
        for (std::uint32_t id : secret_ids) {
            for (std::uint64_t a : pool) {
                for (std::uint64_t b : pool) {
                    if (tried >= budget) break;
                    asgn[{BvVar::Kind::Secret, id}] = a;
                    asgn[{BvVar::Kind::SecretPrime, id}] = b;
                    if (check()) return Verdict::sat(c, asgn);
                }
            }
            asgn[{BvVar::Kind::Secret, id}] = 0;
            asgn[{BvVar::Kind::SecretPrime, id}] = 0;
        }
    }

    // Phase 2: seeded random sampling.
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, width_mask(w));
    while (tried < budget) {
        for (auto& [v, val] : asgn) val = dist(rng);
        if (check()) return Verdict::sat(c, asgn);
    }

    // Phase 3: exhaustive when the search space is small enough.
    const std::uint64_t total_bits = static_cast<std::uint64_t>(vars.size()) * w;
    if (total_bits <= exhaustive_cap_bits) {
        const std::uint64_t space = 1ull << total_bits;
        for (std::uint64_t ix = 0; ix < space; ++ix) {
            std::uint64_t rest = ix;
            for (const auto& v : vars) {
                asgn[v] = rest & width_mask(w);
                rest >>= w;
            }
            if (c.holds(asgn)) return Verdict::sat(c, asgn);
        }
        return Verdict::of(VerdictKind::Unsat);
    }
    return Verdict::of(VerdictKind::Unknown,
                       "search budget exhausted; " + std::to_string(total_bits) +
                           " variable bits exceed the exhaustive cap");
}

// ---------------------------------------------------------------------------
// SMT-LIB 2 emission

namespace checker_detail {

inline std::string bv_literal(std::uint64_t v, unsigned w) {
    if (w % 4 == 0) {
        static const char* hex = "0123456789abcdef";
        std::string digits;
        for (unsigned i = 0; i < w / 4; ++i) {
            digits += hex[(v >> (w - 4 * (i + 1))) & 0xf];
        }
        return "#x" + digits;
    }
    return "(_ bv" + std::to_string(truncate(v, w)) + " " + std::to_string(w) + ")";
}

inline std::string to_smt(const BvExpr& e, unsigned w) {
    switch (e.kind()) {
    case BvExpr::Kind::Const: return bv_literal(e.value(), w);
    case BvExpr::Kind::Var: return e.variable().name();
    case BvExpr::Kind::Op: {
        const std::string a = to_smt(e.lhs(), w);
        const std::string b = to_smt(e.rhs(), w);
        switch (e.binop()) {
        case BinOp::Add: return "(bvadd " + a + " " + b + ")";
        case BinOp::Sub: return "(bvsub " + a + " " + b + ")";
        case BinOp::Mul: return "(bvmul " + a + " " + b + ")";
        case BinOp::Div: return "(bvudiv " + a + " " + b + ")";
        case BinOp::Mod: return "(bvurem " + a + " " + b + ")";
        case BinOp::And: return "(bvand " + a + " " + b + ")";
        case BinOp::Or: return "(bvor " + a + " " + b + ")";
        case BinOp::Xor: return "(bvxor " + a + " " + b + ")";
        case BinOp::Bsh:
            // Sign of the amount picks the direction, matching eval_bsh.
            return "(ite (bvslt " + b + " " + bv_literal(0, w) + ") (bvlshr " + a + " (bvneg " +
                   b + ")) (bvshl " + a + " " + b + "))";
        }
    }
    }
    return "";
}

} // namespace checker_detail

inline std::string emit_smtlib(const LeakConstraint& c) {
    using checker_detail::bv_literal;
    using checker_detail::to_smt;
    const unsigned w = c.width;
    std::string out = "(set-logic QF_BV)\n";

    const std::vector<BvVar> vars = c.variables();
    std::set<std::uint32_t> secret_ids;
    bool pub = false, stk = false, hdr = false;
    for (const auto& v : vars) {
        if (v.kind == BvVar::Kind::Secret || v.kind == BvVar::Kind::SecretPrime)
            secret_ids.insert(v.id);
        pub |= v.kind == BvVar::Kind::Public;
        stk |= v.kind == BvVar::Kind::Stack;
        hdr |= v.kind == BvVar::Kind::Header;
    }
    auto declare = [&](const std::string& name) {
        out += "(declare-const " + name + " (_ BitVec " + std::to_string(w) + "))\n";
    };
    for (std::uint32_t id : secret_ids) {
        declare("s" + std::to_string(id));
        declare("sp" + std::to_string(id));
    }
    if (pub) declare("pub");
    if (stk) declare("stk");
    if (hdr) declare("hdr");

    std::string lhs = to_smt(c.original, w);
    std::string rhs = to_smt(c.renamed, w);
    if (c.kind == LeakConstraint::Kind::CacheLine) {
        const std::string shift = bv_literal(c.line_bits, w);
        lhs = "(bvlshr " + lhs + " " + shift + ")";
        rhs = "(bvlshr " + rhs + " " + shift + ")";
    }
    out += "(assert (distinct " + lhs + " " + rhs + "))\n";
    out += "(check-sat)\n(get-model)\n";
    return out;
}

// ---------------------------------------------------------------------------
// Per-site verdicts

struct CheckerConfig {
    unsigned width = 32;
    unsigned line_bits = 6;
    std::uint64_t enum_budget = 10000;
    std::uint64_t seed = 1;
    unsigned exhaustive_cap_bits = 24;
};

struct FormulaVerdict {
    std::string formula;
    Verdict verdict;
};

struct SiteVerdict {
    std::size_t pc = 0;
    SiteKind kind = SiteKind::MemLoad;
    VerdictKind verdict = VerdictKind::NotApplicable;
    std::map<std::string, std::uint64_t> witness;
    std::vector<FormulaVerdict> details;
};

inline int verdict_strength(VerdictKind k) {
    switch (k) {
    case VerdictKind::Sat: return 4;
    case VerdictKind::TopAccess: return 3;
    case VerdictKind::Unknown: return 2;
    case VerdictKind::Unsat: return 1;
    case VerdictKind::NotApplicable: return 0;
    }
    return 0;
}

// Checks one flagged site: top-valued formulas are vulnerable outright, each
// secret-carrying formula gets the kind-appropriate constraint, and the
// strongest per-formula outcome is the site verdict.
inline SiteVerdict check_site(const SiteRecord& site, const CheckerConfig& cfg) {
    SiteVerdict out;
    out.pc = site.pc;
    out.kind = site.kind;
    for (const auto& f : site.formulas) {
        if (f.is_top()) {
            out.details.push_back({to_string(f), Verdict::of(VerdictKind::TopAccess,
                                                             "address abstraction is top")});
            continue;
        }
        if (!f.has_secret()) continue;
        BvExpr bv = translate(f, cfg.width);
        LeakConstraint c = site.kind == SiteKind::Branch
                               ? make_branch_constraint(bv, cfg.width)
                               : make_cache_constraint(bv, cfg.line_bits, cfg.width);
        out.details.push_back({to_string(f),
                               solve_enum(c, cfg.enum_budget, cfg.seed, cfg.exhaustive_cap_bits)});
    }
    for (const auto& d : out.details) {
        if (verdict_strength(d.verdict.kind) > verdict_strength(out.verdict)) {
            out.verdict = d.verdict.kind;
            out.witness = d.verdict.witness;
        }
    }
    return out;
}

} // namespace sas
