#pragma once

#include <cassert>
#include <cstdint>
#include <string>

namespace sas {

// Fixed-width machine arithmetic shared by the abstract constant folder, the
// concrete interpreter and the bitvector evaluator. Everything here must stay
// bit-exact with the SMT-LIB QF_BV semantics the emitted scripts rely on.

inline constexpr unsigned kMaxWidth = 32;

inline constexpr std::uint64_t width_mask(unsigned w) {
    return w >= 64 ? ~0ull : ((1ull << w) - 1ull);
}

inline constexpr std::uint64_t truncate(std::uint64_t v, unsigned w) {
    return v & width_mask(w);
}

// Two's-complement reading of a w-bit value.
inline constexpr std::int64_t to_signed(std::uint64_t v, unsigned w) {
    v = truncate(v, w);
    const std::uint64_t sign = 1ull << (w - 1);
    return (v & sign) ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(1ull << w)
                      : static_cast<std::int64_t>(v);
}

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Mod, And, Or, Xor, Bsh };

inline const char* binop_name(BinOp op) {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::And: return "&";
    case BinOp::Or: return "|";
    case BinOp::Xor: return "^";
    case BinOp::Bsh: return "bsh";
    }
    return "?";
}

// Bidirectional shift: the amount is read as a signed w-bit value, positive
// shifts left, negative shifts right (logical). Shifting by >= w bits gives 0.
inline std::uint64_t eval_bsh(std::uint64_t x, std::uint64_t amount, unsigned w) {
    const std::int64_t a = to_signed(amount, w);
    x = truncate(x, w);
    if (a >= 0) {
        if (a >= static_cast<std::int64_t>(w)) return 0;
        return truncate(x << a, w);
    }
    const std::int64_t r = -a;
    if (r >= static_cast<std::int64_t>(w)) return 0;
    return x >> r;
}

// Division and modulo follow the QF_BV conventions (x/0 = all ones, x%0 = x)
// so the built-in evaluator agrees with external solvers on emitted scripts.
inline std::uint64_t eval_binop(BinOp op, std::uint64_t a, std::uint64_t b, unsigned w) {
    a = truncate(a, w);
    b = truncate(b, w);
    switch (op) {
    case BinOp::Add: return truncate(a + b, w);
    case BinOp::Sub: return truncate(a - b, w);
    case BinOp::Mul: return truncate(a * b, w);
    case BinOp::Div: return b == 0 ? width_mask(w) : truncate(a / b, w);
    case BinOp::Mod: return b == 0 ? a : truncate(a % b, w);
    case BinOp::And: return a & b;
    case BinOp::Or: return a | b;
    case BinOp::Xor: return a ^ b;
    case BinOp::Bsh: return eval_bsh(a, b, w);
    }
    return 0;
}

} // namespace sas
