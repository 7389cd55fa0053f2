#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sas/bits.hpp"

namespace sas {

// A small three-address IR: numbered commands grouped into functions, with
// explicit loads/stores, a bidirectional-shift expression language and
// secret annotations. Programs are immutable once parsed.

inline const std::string kStackRegister = "esp";

struct Operand {
    bool is_literal = false;
    std::string reg;
    std::uint64_t value = 0;

    static Operand make_reg(std::string name) {
        Operand o;
        o.reg = std::move(name);
        return o;
    }
    static Operand make_lit(std::uint64_t v) {
        Operand o;
        o.is_literal = true;
        o.value = v;
        return o;
    }
};

struct Expr {
    // Leaf when op is absent; otherwise an interior node.
    std::optional<BinOp> op;
    Operand leaf;
    std::shared_ptr<const Expr> lhs, rhs;

    static Expr make_leaf(Operand o) {
        Expr e;
        e.leaf = std::move(o);
        return e;
    }
    static Expr make_node(BinOp op, Expr a, Expr b) {
        Expr e;
        e.op = op;
        e.lhs = std::make_shared<const Expr>(std::move(a));
        e.rhs = std::make_shared<const Expr>(std::move(b));
        return e;
    }
    bool is_leaf() const { return !op.has_value(); }
};

enum class Opcode : std::uint8_t { Assign, Load, Store, IsZero, Jcc, Call, Ret };

inline const char* opcode_name(Opcode op) {
    switch (op) {
    case Opcode::Assign: return "assign";
    case Opcode::Load: return "load";
    case Opcode::Store: return "store";
    case Opcode::IsZero: return "iszero";
    case Opcode::Jcc: return "jcc";
    case Opcode::Call: return "call";
    case Opcode::Ret: return "ret";
    }
    return "?";
}

struct JumpTarget {
    bool is_register = false;
    std::string name;                     // label or register
    std::vector<std::string> candidates;  // declared label set for register targets
};

struct Instr {
    Opcode op = Opcode::Ret;
    std::string dst;   // assign/load/iszero destination
    std::string src;   // load/store/iszero/jcc source register (store: value, jcc: condition)
    std::string addr;  // load/store address register
    Expr rhs;          // assign right-hand side
    JumpTarget target; // jcc
    std::string callee;
    int line = 0; // source line, for diagnostics and reports
};

struct SecretAnnotation {
    enum class Kind : std::uint8_t { Register, RegionBase } kind = Kind::Register;
    std::string reg;
    std::uint64_t region_size = 64; // bytes, RegionBase only
    int line = 0;
};

struct Function {
    std::string name;
    std::uint32_t param_count = 0;
    std::size_t entry_pc = 0;
    std::size_t body_begin = 0; // [body_begin, body_end)
    std::size_t body_end = 0;
    std::vector<SecretAnnotation> annotations;
    std::map<std::string, std::size_t> labels; // label -> pc
};

struct Diagnostic {
    enum class Severity : std::uint8_t { Error, Warning } severity = Severity::Error;
    int line = 0;
    int column = 0;
    std::string message;
};

inline std::string to_string(const Diagnostic& d) {
    return (d.severity == Diagnostic::Severity::Error ? "error" : "warning") + std::string(":") +
           std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
}

struct Program {
    std::vector<Instr> commands; // dense pc -> command table
    std::vector<Function> functions;
    std::string entry; // first function in the file
    unsigned width = 32;

    const Function* find_function(const std::string& name) const {
        for (const auto& f : functions)
            if (f.name == name) return &f;
        return nullptr;
    }
    const Function* function_of(std::size_t pc) const {
        for (const auto& f : functions)
            if (pc >= f.body_begin && pc < f.body_end) return &f;
        return nullptr;
    }
    std::optional<std::size_t> resolve_label(const Function& f, const std::string& label) const {
        auto it = f.labels.find(label);
        if (it == f.labels.end()) return std::nullopt;
        return it->second;
    }
};

// Successor pcs of a command: jcc adds its resolved targets, ret has none,
// call falls through (the callee is handled interprocedurally).
inline std::set<std::size_t> successors(const Program& p, std::size_t pc) {
    std::set<std::size_t> out;
    const Instr& in = p.commands.at(pc);
    if (in.op == Opcode::Ret) return out;
    out.insert(pc + 1);
    if (in.op == Opcode::Jcc) {
        const Function* f = p.function_of(pc);
        if (in.target.is_register) {
            for (const auto& lbl : in.target.candidates)
                if (auto t = p.resolve_label(*f, lbl)) out.insert(*t);
        } else if (auto t = p.resolve_label(*f, in.target.name)) {
            out.insert(*t);
        }
    }
    return out;
}

struct ParseResult {
    std::optional<Program> program;
    std::vector<Diagnostic> diagnostics;

    bool ok() const {
        if (!program) return false;
        for (const auto& d : diagnostics)
            if (d.severity == Diagnostic::Severity::Error) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Parser

namespace ir_detail {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    int line;

    bool eof() const { return i >= s.size(); }
    char peek() const { return eof() ? '\0' : s[i]; }
    void skip_ws() {
        while (!eof() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }
    int col() const { return static_cast<int>(i) + 1; }
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
inline bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

inline std::string read_ident(Cursor& c) {
    c.skip_ws();
    std::string out;
    while (!c.eof() && ident_char(c.peek())) out += c.s[c.i++];
    return out;
}

struct ExprParser {
    Cursor& c;
    std::vector<Diagnostic>& diags;
    unsigned width;
    bool failed = false;

    void fail(const std::string& msg) {
        if (!failed) diags.push_back({Diagnostic::Severity::Error, c.line, c.col(), msg});
        failed = true;
    }

    std::optional<std::uint64_t> read_literal() {
        c.skip_ws();
        std::size_t start = c.i;
        int base = 10;
        if (c.peek() == '0' && c.i + 1 < c.s.size() && (c.s[c.i + 1] == 'x' || c.s[c.i + 1] == 'X')) {
            base = 16;
            c.i += 2;
        }
        std::uint64_t v = 0;
        bool any = false;
        bool overflow = false;
        while (!c.eof()) {
            char ch = c.peek();
            int digit;
            if (ch >= '0' && ch <= '9') digit = ch - '0';
            else if (base == 16 && ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
            else if (base == 16 && ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
            else if (ch == '_') { ++c.i; continue; }
            else break;
            if (v > (~0ull - digit) / base) overflow = true;
            v = v * base + digit;
            ++c.i;
            any = true;
        }
        if (!any) {
            c.i = start;
            fail("expected literal");
            return std::nullopt;
        }
        if (overflow || v > width_mask(width)) {
            diags.push_back({Diagnostic::Severity::Error, c.line, static_cast<int>(start) + 1,
                             "literal does not fit in " + std::to_string(width) + " bits"});
            failed = true;
            return std::nullopt;
        }
        return v;
    }

    std::optional<Expr> primary() {
        c.skip_ws();
        if (c.peek() == '(') {
            ++c.i;
            auto e = parse_or();
            c.skip_ws();
            if (c.peek() != ')') {
                fail("expected ')'");
                return std::nullopt;
            }
            ++c.i;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c.peek()))) {
            auto v = read_literal();
            if (!v) return std::nullopt;
            return Expr::make_leaf(Operand::make_lit(*v));
        }
        if (ident_start(c.peek())) {
            return Expr::make_leaf(Operand::make_reg(read_ident(c)));
        }
        fail("expected operand");
        return std::nullopt;
    }

    std::optional<BinOp> peek_op(int level) {
        c.skip_ws();
        char ch = c.peek();
        switch (level) {
        case 0: // |
            if (ch == '|') { ++c.i; return BinOp::Or; }
            return std::nullopt;
        case 1: // ^
            if (ch == '^') { ++c.i; return BinOp::Xor; }
            return std::nullopt;
        case 2: // &
            if (ch == '&') { ++c.i; return BinOp::And; }
            return std::nullopt;
        case 3: // <<>> bidirectional shift
            if (ch == '<' && c.s.compare(c.i, 4, "<<>>") == 0) {
                c.i += 4;
                return BinOp::Bsh;
            }
            return std::nullopt;
        case 4: // + -
            if (ch == '+') { ++c.i; return BinOp::Add; }
            if (ch == '-') { ++c.i; return BinOp::Sub; }
            return std::nullopt;
        case 5: // * / %
            if (ch == '*') { ++c.i; return BinOp::Mul; }
            if (ch == '/') { ++c.i; return BinOp::Div; }
            if (ch == '%') { ++c.i; return BinOp::Mod; }
            return std::nullopt;
        }
        return std::nullopt;
    }

    std::optional<Expr> parse_level(int level) {
        if (level == 6) return primary();
        auto lhs = parse_level(level + 1);
        if (!lhs) return std::nullopt;
        while (auto op = peek_op(level)) {
            auto rhs = parse_level(level + 1);
            if (!rhs) return std::nullopt;
            lhs = Expr::make_node(*op, std::move(*lhs), std::move(*rhs));
        }
        return lhs;
    }

    std::optional<Expr> parse_or() { return parse_level(0); }
};

// Collects every register mentioned by an expression.
inline void expr_registers(const Expr& e, std::set<std::string>& out) {
    if (e.is_leaf()) {
        if (!e.leaf.is_literal) out.insert(e.leaf.reg);
        return;
    }
    expr_registers(*e.lhs, out);
    expr_registers(*e.rhs, out);
}

} // namespace ir_detail

// Parses the textual IR. Never throws: failures come back as diagnostics with
// line/column positions and a missing program. Literal register positions
// (load/store/iszero/jcc operands) are desugared into a fresh temporary
// assignment so downstream passes only ever see register operands there.
inline ParseResult parse_program(const std::string& text, unsigned width = 32) {
    using Sev = Diagnostic::Severity;
    ParseResult result;
    auto& diags = result.diagnostics;
    if (width == 0 || width > kMaxWidth) {
        diags.push_back({Sev::Error, 0, 0, "unsupported width " + std::to_string(width)});
        return result;
    }

    Program prog;
    prog.width = width;
    Function* cur = nullptr;
    bool seen_instr_in_cur = false;
    int temp_counter = 0;

    auto error = [&](int line, int col, const std::string& msg) {
        diags.push_back({Sev::Error, line, col, msg});
    };

    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        ir_detail::Cursor c{line, 0, line_no};
        c.skip_ws();
        if (c.eof()) continue;

        if (line.compare(c.i, 5, "func ") == 0 || line.compare(c.i, 5, "func\t") == 0) {
            c.i += 5;
            std::string name = ir_detail::read_ident(c);
            if (name.empty()) {
                error(line_no, c.col(), "missing function name");
                continue;
            }
            std::uint32_t params = 0;
            c.skip_ws();
            if (!c.eof()) {
                if (line.compare(c.i, 7, "params=") == 0) {
                    c.i += 7;
                    std::uint64_t v = 0;
                    bool any = false;
                    while (!c.eof() && std::isdigit(static_cast<unsigned char>(c.peek()))) {
                        v = v * 10 + (c.peek() - '0');
                        ++c.i;
                        any = true;
                    }
                    if (!any) error(line_no, c.col(), "expected parameter count");
                    params = static_cast<std::uint32_t>(v);
                } else {
                    error(line_no, c.col(), "expected params=<k>");
                }
            }
            if (cur) cur->body_end = prog.commands.size();
            for (const auto& f : prog.functions)
                if (f.name == name) error(line_no, 1, "duplicate function name '" + name + "'");
            Function f;
            f.name = name;
            f.param_count = params;
            f.entry_pc = f.body_begin = prog.commands.size();
            prog.functions.push_back(std::move(f));
            cur = &prog.functions.back();
            seen_instr_in_cur = false;
            if (prog.entry.empty()) prog.entry = name;
            continue;
        }

        if (c.peek() == '@') {
            ++c.i;
            std::string kind = ir_detail::read_ident(c);
            if (!cur) {
                error(line_no, 1, "annotation outside of a function");
                continue;
            }
            if (seen_instr_in_cur)
                error(line_no, 1, "annotations must appear immediately after the func line");
            SecretAnnotation ann;
            ann.line = line_no;
            if (kind == "secret") {
                ann.kind = SecretAnnotation::Kind::Register;
            } else if (kind == "secret_region") {
                ann.kind = SecretAnnotation::Kind::RegionBase;
            } else {
                error(line_no, 2, "unknown annotation '@" + kind + "'");
                continue;
            }
            ann.reg = ir_detail::read_ident(c);
            if (ann.reg.empty()) {
                error(line_no, c.col(), "annotation needs a register name");
                continue;
            }
            c.skip_ws();
            if (ann.kind == SecretAnnotation::Kind::RegionBase && line.compare(c.i, 5, "size=") == 0) {
                c.i += 5;
                std::uint64_t v = 0;
                while (!c.eof() && std::isdigit(static_cast<unsigned char>(c.peek()))) {
                    v = v * 10 + (c.peek() - '0');
                    ++c.i;
                }
                if (v == 0) error(line_no, c.col(), "region size must be positive");
                ann.region_size = v;
            }
            cur->annotations.push_back(std::move(ann));
            continue;
        }

        if (!cur) {
            error(line_no, c.col(), "instruction outside of a function");
            continue;
        }

        // Optional label prefix.
        std::size_t save = c.i;
        std::string first = ir_detail::read_ident(c);
        std::string label;
        c.skip_ws();
        if (!first.empty() && c.peek() == ':') {
            ++c.i;
            label = first;
            first = ir_detail::read_ident(c);
        } else if (first.empty()) {
            error(line_no, static_cast<int>(save) + 1, "expected instruction");
            continue;
        }
        if (!label.empty()) {
            if (cur->labels.count(label))
                error(line_no, 1, "duplicate label '" + label + "'");
            cur->labels[label] = prog.commands.size();
            if (first.empty()) {
                error(line_no, c.col(), "label must be followed by an instruction");
                continue;
            }
        }
        seen_instr_in_cur = true;

        auto expect_comma = [&]() {
            c.skip_ws();
            if (c.peek() != ',') {
                error(line_no, c.col(), "expected ','");
                return false;
            }
            ++c.i;
            return true;
        };
        auto read_reg_operand = [&](const char* what) -> std::optional<Operand> {
            c.skip_ws();
            if (std::isdigit(static_cast<unsigned char>(c.peek()))) {
                ir_detail::ExprParser ep{c, diags, width};
                auto v = ep.read_literal();
                if (!v) return std::nullopt;
                return Operand::make_lit(*v);
            }
            std::string r = ir_detail::read_ident(c);
            if (r.empty()) {
                error(line_no, c.col(), std::string("expected ") + what);
                return std::nullopt;
            }
            return Operand::make_reg(r);
        };
        // Literal in a register position: materialize through a temporary.
        auto as_register = [&](const Operand& o) -> std::string {
            if (!o.is_literal) return o.reg;
            std::string tmp = ".t" + std::to_string(temp_counter++);
            Instr imm;
            imm.op = Opcode::Assign;
            imm.dst = tmp;
            imm.rhs = Expr::make_leaf(o);
            imm.line = line_no;
            prog.commands.push_back(std::move(imm));
            return tmp;
        };
        auto trailing_junk = [&]() {
            c.skip_ws();
            if (!c.eof()) error(line_no, c.col(), "trailing characters");
        };

        Instr in;
        in.line = line_no;
        if (first == "assign") {
            in.op = Opcode::Assign;
            in.dst = ir_detail::read_ident(c);
            if (in.dst.empty()) {
                error(line_no, c.col(), "assign needs a destination register");
                continue;
            }
            if (!expect_comma()) continue;
            ir_detail::ExprParser ep{c, diags, width};
            auto e = ep.parse_or();
            if (!e || ep.failed) continue;
            in.rhs = std::move(*e);
            trailing_junk();
        } else if (first == "load" || first == "store" || first == "iszero") {
            auto a = read_reg_operand("register");
            if (!a || !expect_comma()) continue;
            auto b = read_reg_operand("register");
            if (!b) continue;
            trailing_junk();
            if (first == "load") {
                in.op = Opcode::Load;
                if (a->is_literal) {
                    error(line_no, 1, "load destination must be a register");
                    continue;
                }
                in.dst = a->reg;
                in.addr = as_register(*b);
            } else if (first == "store") {
                in.op = Opcode::Store;
                in.src = as_register(*a);
                in.addr = as_register(*b);
            } else {
                in.op = Opcode::IsZero;
                if (a->is_literal) {
                    error(line_no, 1, "iszero destination must be a register");
                    continue;
                }
                in.dst = a->reg;
                in.src = as_register(*b);
            }
        } else if (first == "jcc") {
            in.op = Opcode::Jcc;
            auto cond = read_reg_operand("condition register");
            if (!cond || !expect_comma()) continue;
            in.src = as_register(*cond);
            c.skip_ws();
            std::string tgt = ir_detail::read_ident(c);
            if (tgt.empty()) {
                error(line_no, c.col(), "jcc needs a target");
                continue;
            }
            in.target.name = tgt;
            c.skip_ws();
            if (c.peek() == '[') {
                // Register target with its declared candidate label set.
                in.target.is_register = true;
                ++c.i;
                while (true) {
                    c.skip_ws();
                    std::string lb = ir_detail::read_ident(c);
                    if (lb.empty()) break;
                    in.target.candidates.push_back(lb);
                    c.skip_ws();
                    if (c.peek() == ',') {
                        ++c.i;
                        continue;
                    }
                    break;
                }
                c.skip_ws();
                if (c.peek() != ']') {
                    error(line_no, c.col(), "expected ']'");
                    continue;
                }
                ++c.i;
            }
            trailing_junk();
        } else if (first == "call") {
            in.op = Opcode::Call;
            in.callee = ir_detail::read_ident(c);
            if (in.callee.empty()) {
                error(line_no, c.col(), "call needs a function name");
                continue;
            }
            trailing_junk();
        } else if (first == "ret") {
            in.op = Opcode::Ret;
            trailing_junk();
        } else {
            error(line_no, static_cast<int>(save) + 1, "unknown opcode '" + first + "'");
            continue;
        }
        prog.commands.push_back(std::move(in));
    }
    if (cur) cur->body_end = prog.commands.size();

    if (prog.functions.empty())
        error(0, 0, "no functions defined");

    bool fatal = false;
    for (const auto& d : diags)
        if (d.severity == Sev::Error) fatal = true;
    if (!fatal) result.program = std::move(prog);
    return result;
}

namespace ir_detail {

// Registers read / written by one command. Reads of never-defined registers
// model unknown public inputs and are fine; a register defined on some paths
// to a read but not all of them gets a validation warning, because the
// analysis merges per-path claims and an absent binding joins as bottom.
inline void instr_reads(const Instr& in, std::set<std::string>& out) {
    switch (in.op) {
    case Opcode::Assign: expr_registers(in.rhs, out); break;
    case Opcode::Load: out.insert(in.addr); break;
    case Opcode::Store:
        out.insert(in.src);
        out.insert(in.addr);
        break;
    case Opcode::IsZero: out.insert(in.src); break;
    case Opcode::Jcc:
        out.insert(in.src);
        if (in.target.is_register) out.insert(in.target.name);
        break;
    default: break;
    }
}

inline std::optional<std::string> instr_def(const Instr& in) {
    switch (in.op) {
    case Opcode::Assign:
    case Opcode::Load:
    case Opcode::IsZero: return in.dst;
    case Opcode::Call: return std::string("eax"); // return-value convention
    default: return std::nullopt;
    }
}

} // namespace ir_detail

// Structural validation beyond what parsing enforces. Errors flag broken
// invariants; unreachable instructions come back as warnings.
inline std::vector<Diagnostic> validate(const Program& p) {
    using Sev = Diagnostic::Severity;
    std::vector<Diagnostic> diags;
    auto error = [&](int line, const std::string& msg) {
        diags.push_back({Sev::Error, line, 0, msg});
    };

    for (const auto& f : p.functions) {
        if (f.body_begin == f.body_end) {
            error(0, "function '" + f.name + "' has an empty body");
            continue;
        }
        std::set<std::string> regs_in_body;
        for (std::size_t pc = f.body_begin; pc < f.body_end; ++pc) {
            const Instr& in = p.commands[pc];
            if (!in.dst.empty()) regs_in_body.insert(in.dst);
            if (!in.src.empty()) regs_in_body.insert(in.src);
            if (!in.addr.empty()) regs_in_body.insert(in.addr);
            if (in.op == Opcode::Assign) ir_detail::expr_registers(in.rhs, regs_in_body);
            switch (in.op) {
            case Opcode::Jcc:
                if (in.target.is_register) {
                    regs_in_body.insert(in.target.name);
                    if (in.target.candidates.empty())
                        error(in.line, "jcc through register '" + in.target.name +
                                           "' has no declared label set");
                    for (const auto& lbl : in.target.candidates)
                        if (!f.labels.count(lbl))
                            error(in.line, "jcc candidate label '" + lbl + "' is not defined in '" +
                                               f.name + "'");
                } else if (!f.labels.count(in.target.name)) {
                    error(in.line, "unresolved label '" + in.target.name + "'");
                }
                break;
            case Opcode::Call:
                if (!p.find_function(in.callee))
                    error(in.line, "call to unknown function '" + in.callee + "'");
                break;
            default:
                break;
            }
            // Control must not fall off the end of a function body.
            if (in.op != Opcode::Ret) {
                auto succ = successors(p, pc);
                for (std::size_t s : succ)
                    if (s < f.body_begin || s >= f.body_end)
                        error(in.line, "control flow leaves function '" + f.name + "'");
            }
        }
        for (const auto& ann : f.annotations) {
            if (!regs_in_body.count(ann.reg))
                error(ann.line, "annotated register '" + ann.reg + "' does not occur in '" +
                                    f.name + "'");
            if (f.name != p.entry)
                diags.push_back({Sev::Warning, ann.line, 0,
                                 "secret annotation outside the entry function '" + p.entry +
                                     "' is ignored by concrete runs"});
        }
        int regions = 0;
        for (const auto& ann : f.annotations)
            if (ann.kind == SecretAnnotation::Kind::RegionBase) ++regions;
        if (regions > 1)
            error(0, "function '" + f.name + "' declares more than one secret region");

        // Reachability within the function, from its entry.
        std::set<std::size_t> seen{f.entry_pc};
        std::vector<std::size_t> work{f.entry_pc};
        while (!work.empty()) {
            std::size_t pc = work.back();
            work.pop_back();
            for (std::size_t s : successors(p, pc)) {
                if (s < f.body_begin || s >= f.body_end) continue;
                if (seen.insert(s).second) work.push_back(s);
            }
        }
        for (std::size_t pc = f.body_begin; pc < f.body_end; ++pc)
            if (!seen.count(pc))
                diags.push_back({Sev::Warning, p.commands[pc].line, 0,
                                 "dead code at pc " + std::to_string(pc)});

        // Partially-defined reads: a register written on some paths to a
        // read but not all of them. The merged state then only describes the
        // defining paths, which is the one discipline the differential
        // oracle asks fixtures to respect.
        std::set<std::string> entry_defs{kStackRegister};
        for (const auto& ann : f.annotations) entry_defs.insert(ann.reg);
        std::map<std::size_t, std::set<std::string>> must, may;
        must[f.entry_pc] = may[f.entry_pc] = entry_defs;
        std::set<std::size_t> dwork{f.entry_pc};
        while (!dwork.empty()) {
            const std::size_t pc = *dwork.begin();
            dwork.erase(dwork.begin());
            if (!seen.count(pc)) continue;
            std::set<std::string> out_must = must[pc];
            std::set<std::string> out_may = may[pc];
            if (auto def = ir_detail::instr_def(p.commands[pc])) {
                out_must.insert(*def);
                out_may.insert(*def);
            }
            for (std::size_t s : successors(p, pc)) {
                if (s < f.body_begin || s >= f.body_end) continue;
                bool changed = false;
                if (!may.count(s)) {
                    may[s] = out_may;
                    must[s] = out_must;
                    changed = true;
                } else {
                    for (const auto& r : out_may) changed |= may[s].insert(r).second;
                    std::set<std::string> narrowed;
                    for (const auto& r : must[s])
                        if (out_must.count(r)) narrowed.insert(r);
                    if (narrowed != must[s]) {
                        must[s] = std::move(narrowed);
                        changed = true;
                    }
                }
                if (changed) dwork.insert(s);
            }
        }
        std::set<std::pair<std::size_t, std::string>> reported;
        for (std::size_t pc = f.body_begin; pc < f.body_end; ++pc) {
            if (!seen.count(pc)) continue;
            std::set<std::string> reads;
            ir_detail::instr_reads(p.commands[pc], reads);
            for (const auto& r : reads)
                if (may[pc].count(r) && !must[pc].count(r) &&
                    reported.insert({pc, r}).second)
                    diags.push_back({Sev::Warning, p.commands[pc].line, 0,
                                     "register '" + r + "' is defined on some paths but not all "
                                     "at pc " + std::to_string(pc)});
        }
    }
    return diags;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Diagnostic::Severity::Error) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Pretty printer; parse(pretty_print(p)) is structurally identical to p.

inline std::string to_string(const Expr& e) {
    if (e.is_leaf()) {
        if (e.leaf.is_literal) return std::to_string(e.leaf.value);
        return e.leaf.reg;
    }
    std::string op;
    switch (*e.op) {
    case BinOp::Add: op = "+"; break;
    case BinOp::Sub: op = "-"; break;
    case BinOp::Mul: op = "*"; break;
    case BinOp::Div: op = "/"; break;
    case BinOp::Mod: op = "%"; break;
    case BinOp::And: op = "&"; break;
    case BinOp::Or: op = "|"; break;
    case BinOp::Xor: op = "^"; break;
    case BinOp::Bsh: op = "<<>>"; break;
    }
    return "(" + to_string(*e.lhs) + " " + op + " " + to_string(*e.rhs) + ")";
}

inline std::string pretty_print(const Program& p) {
    std::string out;
    for (const auto& f : p.functions) {
        out += "func " + f.name + " params=" + std::to_string(f.param_count) + "\n";
        for (const auto& ann : f.annotations) {
            if (ann.kind == SecretAnnotation::Kind::Register)
                out += "  @secret " + ann.reg + "\n";
            else
                out += "  @secret_region " + ann.reg + " size=" + std::to_string(ann.region_size) +
                       "\n";
        }
        std::map<std::size_t, std::string> label_at;
        for (const auto& [lbl, pc] : f.labels) label_at[pc] = lbl;
        for (std::size_t pc = f.body_begin; pc < f.body_end; ++pc) {
            const Instr& in = p.commands[pc];
            out += "  ";
            if (auto it = label_at.find(pc); it != label_at.end()) out += it->second + ": ";
            switch (in.op) {
            case Opcode::Assign:
                out += "assign " + in.dst + ", " + to_string(in.rhs);
                break;
            case Opcode::Load:
                out += "load " + in.dst + ", " + in.addr;
                break;
            case Opcode::Store:
                out += "store " + in.src + ", " + in.addr;
                break;
            case Opcode::IsZero:
                out += "iszero " + in.dst + ", " + in.src;
                break;
            case Opcode::Jcc:
                out += "jcc " + in.src + ", " + in.target.name;
                if (in.target.is_register) {
                    out += " [";
                    for (std::size_t i = 0; i < in.target.candidates.size(); ++i) {
                        if (i) out += ", ";
                        out += in.target.candidates[i];
                    }
                    out += "]";
                }
                break;
            case Opcode::Call:
                out += "call " + in.callee;
                break;
            case Opcode::Ret:
                out += "ret";
                break;
            }
            out += "\n";
        }
    }
    return out;
}

} // namespace sas
