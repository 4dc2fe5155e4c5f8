#ifndef MIMICRY_SAL_HPP
#define MIMICRY_SAL_HPP

// Structured Assembly Language frontend: a restricted control-flow AST
// (if/while/break/continue/end) whose straight-line statements are
// mini-asm instruction lines.

#include <mimicry/asm_model.hpp>
#include <mimicry/errors.hpp>

#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace mimicry {

enum class CfKind { End, Break, Continue, If, While };

inline const char* to_string(CfKind k) {
    switch (k) {
        case CfKind::End: return "End";
        case CfKind::Break: return "Break";
        case CfKind::Continue: return "Continue";
        case CfKind::If: return "If";
        case CfKind::While: return "While";
    }
    return "?";
}

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "==";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

struct Condition {
    enum class Form { RegCmpImm, RegCmpReg, OpaqueTrue, OpaqueFalse };
    Form form;
    int lhs = 0;
    CmpOp op = CmpOp::Eq;
    int rhs_reg = 0;
    int64_t rhs_imm = 0;

    static Condition opaque_true() { return Condition{Form::OpaqueTrue}; }
    static Condition opaque_false() { return Condition{Form::OpaqueFalse}; }
    static Condition cmp_imm(int lhs, CmpOp op, int64_t imm) {
        return Condition{Form::RegCmpImm, lhs, op, 0, imm};
    }
    static Condition cmp_reg(int lhs, CmpOp op, int rhs) {
        return Condition{Form::RegCmpReg, lhs, op, rhs, 0};
    }

    bool is_opaque() const { return form == Form::OpaqueTrue || form == Form::OpaqueFalse; }
    bool operator==(const Condition&) const = default;
};

inline std::string to_string(const Condition& c) {
    switch (c.form) {
        case Condition::Form::OpaqueTrue: return "OPAQUE_TRUE";
        case Condition::Form::OpaqueFalse: return "OPAQUE_FALSE";
        case Condition::Form::RegCmpImm:
            return "r" + std::to_string(c.lhs) + " " + to_string(c.op) + " " +
                   std::to_string(c.rhs_imm);
        case Condition::Form::RegCmpReg:
            return "r" + std::to_string(c.lhs) + " " + to_string(c.op) + " r" +
                   std::to_string(c.rhs_reg);
    }
    return "?";
}

enum class NodeOrigin { PayloadOriginal, DummyFromTarget, Matched };

// One node of the control-flow tree: a straight-line instruction prefix
// followed by a control construct. If/While own a body and the tail
// (the code after the construct); End/Break/Continue are leaves.
struct CfTree {
    std::vector<Instruction> instructions;
    CfKind kind = CfKind::End;
    std::optional<Condition> condition;  // If/While only
    std::unique_ptr<CfTree> body;        // If/While only
    std::unique_ptr<CfTree> tail;        // If/While only
    NodeOrigin origin = NodeOrigin::PayloadOriginal;

    bool is_leaf() const { return kind != CfKind::If && kind != CfKind::While; }

    std::unique_ptr<CfTree> clone() const {
        auto out = std::make_unique<CfTree>();
        out->instructions = instructions;
        out->kind = kind;
        out->condition = condition;
        out->origin = origin;
        if (body) out->body = body->clone();
        if (tail) out->tail = tail->clone();
        return out;
    }
};

inline bool structurally_equal(const CfTree& a, const CfTree& b) {
    if (a.kind != b.kind) return false;
    if (a.condition != b.condition) return false;
    if (a.instructions.size() != b.instructions.size()) return false;
    for (size_t i = 0; i < a.instructions.size(); ++i)
        if (!a.instructions[i].same_text(b.instructions[i])) return false;
    if (a.is_leaf()) return true;
    return structurally_equal(*a.body, *b.body) && structurally_equal(*a.tail, *b.tail);
}

// Number of If/While/Break/Continue nodes (End excluded).
inline int count_cf_nodes(const CfTree& t) {
    switch (t.kind) {
        case CfKind::End: return 0;
        case CfKind::Break:
        case CfKind::Continue: return 1;
        default:
            return 1 + count_cf_nodes(*t.body) + count_cf_nodes(*t.tail);
    }
}

// Preorder node-kind sequence, e.g. "While(While(End,End),If(End,End))"
// flattened to "While While End End If End End". End leaves included so
// the sequence determines the tree shape.
inline void kind_preorder(const CfTree& t, std::string& out) {
    if (!out.empty()) out += ' ';
    out += to_string(t.kind);
    if (!t.is_leaf()) {
        kind_preorder(*t.body, out);
        kind_preorder(*t.tail, out);
    }
}

inline std::string kind_preorder(const CfTree& t) {
    std::string out;
    kind_preorder(t, out);
    return out;
}

struct SalUnit {
    std::string name;
    CfTree tree;
};

// ---------------------------------------------------------------------------
// Parser. Line oriented: `func NAME {`, `if (cond) {`, `while (cond) {`,
// `}`, `break`, `continue`, or a mini-asm instruction line. `#` comments.

namespace sal_detail {

struct Line {
    int number;
    std::string text;
};

inline std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> out;
    int no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++no;
        size_t hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string_view s = detail::trim(raw);
        if (!s.empty()) out.push_back({no, std::string(s)});
    }
    return out;
}

inline Condition parse_condition(std::string_view s, int line_no) {
    s = detail::trim(s);
    if (s == "OPAQUE_TRUE") return Condition::opaque_true();
    if (s == "OPAQUE_FALSE") return Condition::opaque_false();
    // REG CMPOP (REG|INT)
    if (s.size() < 2 || s[0] != 'r' || s[1] < '0' || s[1] > '7')
        throw SyntaxError(line_no, 1, "bad condition lhs in (" + std::string(s) + ")");
    int lhs = s[1] - '0';
    std::string_view rest = detail::trim(s.substr(2));
    CmpOp op;
    size_t oplen = 2;
    if (rest.starts_with("==")) op = CmpOp::Eq;
    else if (rest.starts_with("!=")) op = CmpOp::Ne;
    else if (rest.starts_with("<=")) op = CmpOp::Le;
    else if (rest.starts_with(">=")) op = CmpOp::Ge;
    else if (rest.starts_with("<")) { op = CmpOp::Lt; oplen = 1; }
    else if (rest.starts_with(">")) { op = CmpOp::Gt; oplen = 1; }
    else throw SyntaxError(line_no, 1, "bad comparison operator in (" + std::string(s) + ")");
    std::string_view rhs = detail::trim(rest.substr(oplen));
    if (rhs.size() == 2 && rhs[0] == 'r' && rhs[1] >= '0' && rhs[1] <= '7')
        return Condition::cmp_reg(lhs, op, rhs[1] - '0');
    try {
        size_t used = 0;
        int64_t v = std::stoll(std::string(rhs), &used);
        if (used != rhs.size()) throw std::invalid_argument("");
        return Condition::cmp_imm(lhs, op, v);
    } catch (...) {
        throw SyntaxError(line_no, 1, "bad condition rhs " + std::string(rhs));
    }
}

struct Parser {
    const std::vector<Line>& lines;
    size_t pos = 0;

    const Line& peek() const {
        if (pos >= lines.size())
            throw SyntaxError(lines.empty() ? 1 : lines.back().number, 1, "unexpected end of input");
        return lines[pos];
    }
    bool at_close() const { return pos < lines.size() && lines[pos].text == "}"; }

    // Parses a statement sequence up to (not consuming) the closing `}`.
    CfTree parse_stmts(int loop_depth, bool top_level) {
        CfTree node;
        while (true) {
            if (pos >= lines.size() || at_close()) {
                node.kind = CfKind::End;
                return node;
            }
            const Line& l = lines[pos];
            const std::string& s = l.text;
            if (s.rfind("if", 0) == 0 || s.rfind("while", 0) == 0) {
                bool is_if = s[0] == 'i';
                size_t open = s.find('(');
                size_t close = s.rfind(')');
                if (open == std::string::npos || close == std::string::npos || close < open ||
                    detail::trim(s.substr(close + 1)) != "{")
                    throw SyntaxError(l.number, 1, "expected `" +
                                      std::string(is_if ? "if" : "while") + " (cond) {`");
                node.kind = is_if ? CfKind::If : CfKind::While;
                node.condition = parse_condition(s.substr(open + 1, close - open - 1), l.number);
                ++pos;
                node.body = std::make_unique<CfTree>(
                    parse_stmts(loop_depth + (is_if ? 0 : 1), false));
                if (!at_close()) throw SyntaxError(peek().number, 1, "expected `}`");
                ++pos;
                node.tail = std::make_unique<CfTree>(parse_stmts(loop_depth, top_level));
                return node;
            }
            if (s == "break" || s == "continue") {
                if (loop_depth == 0)
                    throw StructureError(std::string(s) + " outside a loop (line " +
                                         std::to_string(l.number) + ")");
                ++pos;
                if (pos < lines.size() && !at_close())
                    throw StructureError("unreachable code after " + s + " (line " +
                                         std::to_string(peek().number) + ")");
                node.kind = s == "break" ? CfKind::Break : CfKind::Continue;
                return node;
            }
            // Instruction line.
            Instruction in = parse_asm_line(s, /*allow_label_operands=*/false, l.number);
            if (is_jump(in.mnemonic))
                throw SyntaxError(l.number, 1, "jump instructions are not valid SAL statements");
            if (in.mnemonic == Mnemonic::Ret) {
                ++pos;
                bool at_end = pos >= lines.size() || at_close();
                if (!top_level || !at_end)
                    throw StructureError("ret is only allowed as the final statement (line " +
                                         std::to_string(l.number) + ")");
                node.instructions.push_back(std::move(in));
                node.kind = CfKind::End;
                return node;
            }
            node.instructions.push_back(std::move(in));
            ++pos;
        }
    }
};

}  // namespace sal_detail

inline SalUnit parse_sal_unit(std::string_view text) {
    auto lines = sal_detail::split_lines(text);
    if (lines.empty()) throw SyntaxError(1, 1, "empty input");
    const auto& head = lines.front();
    // func NAME {
    std::istringstream hs(head.text);
    std::string kw, name, brace;
    hs >> kw >> name >> brace;
    std::string extra;
    if (kw != "func" || name.empty() || brace != "{" || (hs >> extra))
        throw SyntaxError(head.number, 1, "expected `func NAME {`");
    sal_detail::Parser p{lines, 1};
    SalUnit unit;
    unit.name = name;
    unit.tree = p.parse_stmts(0, true);
    if (!p.at_close()) throw SyntaxError(p.peek().number, 1, "expected `}`");
    ++p.pos;
    if (p.pos != lines.size())
        throw SyntaxError(lines[p.pos].number, 1, "trailing input after function body");
    return unit;
}

inline CfTree parse_sal(std::string_view text) { return parse_sal_unit(text).tree; }

// ---------------------------------------------------------------------------
// Emitter. Output re-parses to an equal tree.

namespace sal_detail {

inline void emit_node(const CfTree& t, std::string& out, int indent) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    for (const auto& in : t.instructions) out += pad + to_string(in) + "\n";
    switch (t.kind) {
        case CfKind::End:
            return;
        case CfKind::Break:
            out += pad + "break\n";
            return;
        case CfKind::Continue:
            out += pad + "continue\n";
            return;
        case CfKind::If:
        case CfKind::While:
            out += pad + (t.kind == CfKind::If ? "if (" : "while (") +
                   to_string(*t.condition) + ") {\n";
            emit_node(*t.body, out, indent + 1);
            out += pad + "}\n";
            emit_node(*t.tail, out, indent);
            return;
    }
}

}  // namespace sal_detail

inline std::string emit_sal(const CfTree& tree, const std::string& name = "f") {
    std::string out = "func " + name + " {\n";
    sal_detail::emit_node(tree, out, 1);
    out += "}\n";
    return out;
}

}  // namespace mimicry

#endif
