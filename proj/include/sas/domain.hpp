#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sas/bits.hpp"

namespace sas {

// Abstract values are formula trees over the atoms {top, p, s_i, u, e, n}.
// Trees are immutable and shared; every node caches its hash and the atom
// occurrence flags so classification and set operations stay cheap.

enum class Category : std::uint8_t { Top, P, S, U, E, N, Sym };

inline const char* category_name(Category c) {
    switch (c) {
    case Category::Top: return "TOP";
    case Category::P: return "P";
    case Category::S: return "S";
    case Category::U: return "U";
    case Category::E: return "E";
    case Category::N: return "N";
    case Category::Sym: return "SYM";
    }
    return "?";
}

class Av {
public:
    enum class Kind : std::uint8_t { Top, Pub, Secret, Header, StackBase, Const, Node };

private:
    struct Data {
        Kind kind;
        BinOp op = BinOp::Add;
        std::uint32_t secret_id = 0;
        std::uint64_t value = 0; // Const payload
        std::shared_ptr<const Data> lhs, rhs;
        bool has_secret = false;
        bool has_header = false;
        bool has_stack = false;
        std::size_t hash = 0;
    };

    std::shared_ptr<const Data> d_;

    explicit Av(std::shared_ptr<const Data> d) : d_(std::move(d)) {}

    static std::size_t mix(std::size_t h, std::size_t v) {
        return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
    }

    static Av make_leaf(Kind k, std::uint32_t id, std::uint64_t v) {
        auto d = std::make_shared<Data>();
        d->kind = k;
        d->secret_id = id;
        d->value = v;
        d->has_secret = k == Kind::Secret;
        d->has_header = k == Kind::Header;
        d->has_stack = k == Kind::StackBase;
        d->hash = mix(mix(static_cast<std::size_t>(k), id), static_cast<std::size_t>(v));
        return Av(std::move(d));
    }

public:
    Av() : Av(top()) {}

    static Av top() {
        static const Av v = make_leaf(Kind::Top, 0, 0);
        return v;
    }
    static Av pub() {
        static const Av v = make_leaf(Kind::Pub, 0, 0);
        return v;
    }
    static Av header() {
        static const Av v = make_leaf(Kind::Header, 0, 0);
        return v;
    }
    static Av stack_base() {
        static const Av v = make_leaf(Kind::StackBase, 0, 0);
        return v;
    }
    static Av secret(std::uint32_t id) { return make_leaf(Kind::Secret, id, 0); }
    static Av constant(std::uint64_t n, unsigned width) {
        return make_leaf(Kind::Const, 0, truncate(n, width));
    }

    // Raw node constructor; reduction logic is in reduce(). Operands of
    // commutative operators are sorted so structural equality is canonical.
    static Av node(BinOp op, const Av& a, const Av& b) {
        const bool commutative = op == BinOp::Add || op == BinOp::Mul || op == BinOp::And ||
                                 op == BinOp::Or || op == BinOp::Xor;
        const Av* l = &a;
        const Av* r = &b;
        if (commutative && compare(b, a) < 0) std::swap(l, r);
        auto d = std::make_shared<Data>();
        d->kind = Kind::Node;
        d->op = op;
        d->lhs = l->d_;
        d->rhs = r->d_;
        d->has_secret = l->d_->has_secret || r->d_->has_secret;
        d->has_header = l->d_->has_header || r->d_->has_header;
        d->has_stack = l->d_->has_stack || r->d_->has_stack;
        d->hash = mix(mix(mix(static_cast<std::size_t>(Kind::Node),
                              static_cast<std::size_t>(op)),
                          l->d_->hash),
                      r->d_->hash);
        return Av(std::move(d));
    }

    Kind kind() const { return d_->kind; }
    BinOp op() const { return d_->op; }
    std::uint32_t secret_id() const { return d_->secret_id; }
    std::uint64_t const_value() const { return d_->value; }
    Av lhs() const { return Av(d_->lhs); }
    Av rhs() const { return Av(d_->rhs); }
    std::size_t hash() const { return d_->hash; }

    bool is_top() const { return d_->kind == Kind::Top; }
    bool is_pub() const { return d_->kind == Kind::Pub; }
    bool is_const() const { return d_->kind == Kind::Const; }
    bool is_node() const { return d_->kind == Kind::Node; }
    bool has_secret() const { return d_->has_secret; }
    bool has_header() const { return d_->has_header; }
    bool has_stack() const { return d_->has_stack; }

    // e-values keep the canonical shape e or (+ e n); offset in [0, 2^w).
    bool is_stack_offset() const {
        if (d_->kind == Kind::StackBase) return true;
        return d_->kind == Kind::Node && d_->op == BinOp::Add &&
               d_->lhs->kind == Kind::StackBase && d_->rhs->kind == Kind::Const;
    }
    std::uint64_t stack_offset() const {
        return d_->kind == Kind::StackBase ? 0 : d_->rhs->value;
    }

    Category category() const {
        switch (d_->kind) {
        case Kind::Top: return Category::Top;
        case Kind::Pub: return Category::P;
        case Kind::Secret: return Category::S;
        case Kind::Header: return Category::U;
        case Kind::StackBase: return Category::E;
        case Kind::Const: return Category::N;
        case Kind::Node:
            if (d_->has_secret) return Category::S;
            if (d_->has_header) return Category::U;
            if (d_->has_stack) return Category::E;
            return Category::Sym;
        }
        return Category::Sym;
    }

    static int compare(const Av& a, const Av& b) {
        if (a.d_ == b.d_) return 0;
        // Leaf rank puts symbolic material before constants so printed terms
        // read naturally, e.g. (+ s1 1) rather than (+ 1 s1).
        auto rank = [](const Data& d) -> int {
            switch (d.kind) {
            case Kind::Node: return 0;
            case Kind::Secret: return 1;
            case Kind::Header: return 2;
            case Kind::StackBase: return 3;
            case Kind::Pub: return 4;
            case Kind::Top: return 5;
            case Kind::Const: return 6;
            }
            return 7;
        };
        const int ra = rank(*a.d_);
        const int rb = rank(*b.d_);
        if (ra != rb) return ra < rb ? -1 : 1;
        switch (a.d_->kind) {
        case Kind::Secret:
            if (a.d_->secret_id != b.d_->secret_id)
                return a.d_->secret_id < b.d_->secret_id ? -1 : 1;
            return 0;
        case Kind::Const:
            if (a.d_->value != b.d_->value) return a.d_->value < b.d_->value ? -1 : 1;
            return 0;
        case Kind::Node: {
            if (a.d_->op != b.d_->op) return a.d_->op < b.d_->op ? -1 : 1;
            const int l = compare(a.lhs(), b.lhs());
            if (l != 0) return l;
            return compare(a.rhs(), b.rhs());
        }
        default:
            return 0;
        }
    }

    friend bool operator==(const Av& a, const Av& b) {
        if (a.d_ == b.d_) return true;
        if (a.d_->hash != b.d_->hash) return false;
        return compare(a, b) == 0;
    }
    friend bool operator!=(const Av& a, const Av& b) { return !(a == b); }
    friend bool operator<(const Av& a, const Av& b) { return compare(a, b) < 0; }
};

inline std::string to_string(const Av& v) {
    switch (v.kind()) {
    case Av::Kind::Top: return "top";
    case Av::Kind::Pub: return "p";
    case Av::Kind::Secret: return "s" + std::to_string(v.secret_id());
    case Av::Kind::Header: return "u";
    case Av::Kind::StackBase: return "e";
    case Av::Kind::Const: return std::to_string(v.const_value());
    case Av::Kind::Node:
        return "(" + std::string(binop_name(v.op())) + " " + to_string(v.lhs()) + " " +
               to_string(v.rhs()) + ")";
    }
    return "?";
}

inline Av make_stack_offset(std::uint64_t offset, unsigned width) {
    offset = truncate(offset, width);
    if (offset == 0) return Av::stack_base();
    return Av::node(BinOp::Add, Av::stack_base(), Av::constant(offset, width));
}

// Reduction rule for binary operations on abstract values. Top and p collapse
// eagerly; constants fold in w-bit arithmetic; stack offsets stay in the
// linear e+n form and demote to p for anything non-linear; u survives only
// next to constants. Everything carrying a secret concatenates syntactically.
inline Av reduce(BinOp op, const Av& a, const Av& b, unsigned width) {
    if (a.is_top() || b.is_top()) return Av::top();
    if (a.is_pub()) return b.has_secret() ? Av::top() : Av::pub();
    if (b.is_pub()) return a.has_secret() ? Av::top() : Av::pub();
    if (a.is_const() && b.is_const()) {
        if ((op == BinOp::Div || op == BinOp::Mod) && b.const_value() == 0) return Av::top();
        return Av::constant(eval_binop(op, a.const_value(), b.const_value(), width), width);
    }
    if (a.has_secret() || b.has_secret()) return Av::node(op, a, b);
    const bool ae = a.is_stack_offset();
    const bool be = b.is_stack_offset();
    if (op == BinOp::Add && ae && b.is_const())
        return make_stack_offset(a.stack_offset() + b.const_value(), width);
    if (op == BinOp::Add && a.is_const() && be)
        return make_stack_offset(b.stack_offset() + a.const_value(), width);
    if (op == BinOp::Sub && ae && b.is_const())
        return make_stack_offset(a.stack_offset() - b.const_value(), width);
    if (op == BinOp::Sub && ae && be)
        return Av::constant(a.stack_offset() - b.stack_offset(), width);
    if (a.has_stack() || b.has_stack()) return Av::pub();
    if (a.has_header() && b.is_const()) return Av::node(op, a, b);
    if (a.is_const() && b.has_header()) return Av::node(op, a, b);
    if (a.has_header() || b.has_header()) return Av::pub();
    return Av::node(op, a, b);
}

// ---------------------------------------------------------------------------
// Value sets: elements of the powerset domain, kept canonical (COL then BOU)
// at every construction site. The empty set is bottom.

inline constexpr std::uint32_t kDefaultBound = 50;

namespace detail {

inline void sort_unique(std::vector<Av>& vs) {
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
}

inline bool contains_secret_value(const std::vector<Av>& vs) {
    for (const auto& v : vs)
        if (v.has_secret()) return true;
    return false;
}

} // namespace detail

// COL: collapse mixed-abstraction sets to a single safe symbol.
inline std::vector<Av> col(std::vector<Av> xs) {
    detail::sort_unique(xs);
    bool has_top = false;
    bool has_pub = false;
    for (const auto& v : xs) {
        has_top |= v.is_top();
        has_pub |= v.is_pub();
    }
    if (has_top) return {Av::top()};
    if (has_pub && detail::contains_secret_value(xs)) return {Av::top()};
    if (has_pub) return {Av::pub()};
    return xs;
}

// BOU: bound the size of a set by n, widening to top or p.
inline std::vector<Av> bou(std::vector<Av> xs, std::uint32_t n) {
    detail::sort_unique(xs);
    if (xs.size() > n) {
        if (detail::contains_secret_value(xs)) return {Av::top()};
        return {Av::pub()};
    }
    return xs;
}

class ValueSet {
public:
    ValueSet() = default;
    explicit ValueSet(std::uint32_t bound) : bound_(bound) {}
    ValueSet(std::vector<Av> vals, std::uint32_t bound) : bound_(bound) {
        vals_ = bou(col(std::move(vals)), bound_);
    }
    static ValueSet single(const Av& v, std::uint32_t bound = kDefaultBound) {
        return ValueSet({v}, bound);
    }

    bool empty() const { return vals_.empty(); }
    std::size_t size() const { return vals_.size(); }
    std::uint32_t bound() const { return bound_; }
    const std::vector<Av>& values() const { return vals_; }
    auto begin() const { return vals_.begin(); }
    auto end() const { return vals_.end(); }

    bool contains(const Av& v) const {
        return std::binary_search(vals_.begin(), vals_.end(), v);
    }
    bool has_top() const { return !vals_.empty() && vals_.front().is_top(); }
    bool has_pub() const {
        for (const auto& v : vals_)
            if (v.is_pub()) return true;
        return false;
    }
    bool has_secret_value() const { return detail::contains_secret_value(vals_); }
    bool has_header_value() const {
        for (const auto& v : vals_)
            if (v.has_header() && !v.has_secret()) return true;
        return false;
    }

    // True when every element has the canonical e+n shape.
    bool all_stack_offsets() const {
        if (vals_.empty()) return false;
        for (const auto& v : vals_)
            if (!v.is_stack_offset()) return false;
        return true;
    }

    friend bool operator==(const ValueSet& a, const ValueSet& b) { return a.vals_ == b.vals_; }
    friend bool operator!=(const ValueSet& a, const ValueSet& b) { return !(a == b); }

private:
    std::vector<Av> vals_;
    std::uint32_t bound_ = kDefaultBound;
};

inline ValueSet join(const ValueSet& x, const ValueSet& y) {
    std::vector<Av> u = x.values();
    u.insert(u.end(), y.values().begin(), y.values().end());
    return ValueSet(std::move(u), x.bound());
}

// x is covered by Y if x is in Y, or Y holds top, or Y holds p and x is a
// non-secret value below p. Top is above p, so p never covers it.
inline bool covers(const ValueSet& ys, const Av& x) {
    if (ys.has_top()) return true;
    if (ys.contains(x)) return true;
    if (!x.has_secret() && !x.is_top() && ys.has_pub()) return true;
    return false;
}

inline bool leq_vs(const ValueSet& xs, const ValueSet& ys) {
    for (const auto& x : xs)
        if (!covers(ys, x)) return false;
    return true;
}

inline Category classify(const Av& v) { return v.category(); }

inline std::string to_string(const ValueSet& vs) {
    std::string out = "{";
    bool first = true;
    for (const auto& v : vs) {
        if (!first) out += ", ";
        out += to_string(v);
        first = false;
    }
    out += "}";
    return out;
}

} // namespace sas
