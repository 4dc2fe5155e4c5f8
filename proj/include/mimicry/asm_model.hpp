#ifndef MIMICRY_ASM_MODEL_HPP
#define MIMICRY_ASM_MODEL_HPP

// Mini-assembly instruction set: mnemonics, DEF/USE semantics, the
// dangerous-instruction taxonomy, text parsing and CFG construction.

#include <mimicry/errors.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mimicry {

// Register file r0..r7 plus a single coarse FLAGS pseudo-register.
// r0 is the return value by convention; r7 is the scratch register the
// lowerer owns during opaque-condition evaluation.
inline constexpr int kNumRegs = 8;
inline constexpr int kFlagsIndex = 8;
inline constexpr int kScratchReg = 7;
inline constexpr int kReturnReg = 0;

// Data memory. mem[0] is the opaque cell (always 0 at program start);
// mem[1..15] are run-once loop counters owned by the lowerer. The
// observable machine state is (r0, mem[16..255], termination status).
inline constexpr size_t kMemWords = 256;
inline constexpr size_t kReservedCells = 16;
inline constexpr int64_t kOpaqueCell = 0;

// A set of registers and/or FLAGS, as a bitmask.
struct RegSet {
    uint16_t bits = 0;

    static RegSet reg(int r) { return RegSet{static_cast<uint16_t>(1u << r)}; }
    static RegSet flags() { return RegSet{1u << kFlagsIndex}; }

    bool contains(int r) const { return (bits >> r) & 1u; }
    bool empty() const { return bits == 0; }
    bool intersects(RegSet o) const { return (bits & o.bits) != 0; }

    RegSet& add(int r) { bits |= (1u << r); return *this; }
    RegSet& operator|=(RegSet o) { bits |= o.bits; return *this; }
    RegSet operator|(RegSet o) const { return RegSet{static_cast<uint16_t>(bits | o.bits)}; }
    RegSet operator-(RegSet o) const { return RegSet{static_cast<uint16_t>(bits & ~o.bits)}; }
    bool operator==(const RegSet&) const = default;
};

inline std::string to_string(RegSet s) {
    std::string out;
    for (int r = 0; r < kNumRegs; ++r)
        if (s.contains(r)) out += (out.empty() ? "" : ",") + std::string("r") + std::to_string(r);
    if (s.contains(kFlagsIndex)) out += (out.empty() ? "" : ",") + std::string("FLAGS");
    return "{" + out + "}";
}

enum class Mnemonic {
    Mov, Add, Sub, And, Or, Xor, Inc, Dec, Neg, Imul,
    Cmp, Test, Lea, Load, Store, Push, Pop, Nop,
    Jmp, Je, Jne, Jl, Jle, Jg, Jge, Call, Ret,
};

inline bool is_jump(Mnemonic m) {
    switch (m) {
        case Mnemonic::Jmp: case Mnemonic::Je: case Mnemonic::Jne:
        case Mnemonic::Jl: case Mnemonic::Jle: case Mnemonic::Jg: case Mnemonic::Jge:
            return true;
        default:
            return false;
    }
}

inline bool is_cond_jump(Mnemonic m) { return is_jump(m) && m != Mnemonic::Jmp; }

// A basic block ends after jmp/jcc/ret. Calls fall through.
inline bool ends_block(Mnemonic m) { return is_jump(m) || m == Mnemonic::Ret; }

inline bool is_dangerous(Mnemonic m) {
    switch (m) {
        case Mnemonic::Push: case Mnemonic::Pop: case Mnemonic::Store:
        case Mnemonic::Call: case Mnemonic::Ret:
            return true;
        default:
            return is_jump(m);
    }
}

inline const char* mnemonic_name(Mnemonic m) {
    switch (m) {
        case Mnemonic::Mov: return "mov";
        case Mnemonic::Add: return "add";
        case Mnemonic::Sub: return "sub";
        case Mnemonic::And: return "and";
        case Mnemonic::Or: return "or";
        case Mnemonic::Xor: return "xor";
        case Mnemonic::Inc: return "inc";
        case Mnemonic::Dec: return "dec";
        case Mnemonic::Neg: return "neg";
        case Mnemonic::Imul: return "imul";
        case Mnemonic::Cmp: return "cmp";
        case Mnemonic::Test: return "test";
        case Mnemonic::Lea: return "lea";
        case Mnemonic::Load: return "load";
        case Mnemonic::Store: return "store";
        case Mnemonic::Push: return "push";
        case Mnemonic::Pop: return "pop";
        case Mnemonic::Nop: return "nop";
        case Mnemonic::Jmp: return "jmp";
        case Mnemonic::Je: return "je";
        case Mnemonic::Jne: return "jne";
        case Mnemonic::Jl: return "jl";
        case Mnemonic::Jle: return "jle";
        case Mnemonic::Jg: return "jg";
        case Mnemonic::Jge: return "jge";
        case Mnemonic::Call: return "call";
        case Mnemonic::Ret: return "ret";
    }
    return "?";
}

inline std::optional<Mnemonic> mnemonic_from_name(std::string_view s) {
    static const std::map<std::string_view, Mnemonic> table = {
        {"mov", Mnemonic::Mov}, {"add", Mnemonic::Add}, {"sub", Mnemonic::Sub},
        {"and", Mnemonic::And}, {"or", Mnemonic::Or}, {"xor", Mnemonic::Xor},
        {"inc", Mnemonic::Inc}, {"dec", Mnemonic::Dec}, {"neg", Mnemonic::Neg},
        {"imul", Mnemonic::Imul}, {"cmp", Mnemonic::Cmp}, {"test", Mnemonic::Test},
        {"lea", Mnemonic::Lea}, {"load", Mnemonic::Load}, {"store", Mnemonic::Store},
        {"push", Mnemonic::Push}, {"pop", Mnemonic::Pop}, {"nop", Mnemonic::Nop},
        {"jmp", Mnemonic::Jmp}, {"je", Mnemonic::Je}, {"jne", Mnemonic::Jne},
        {"jl", Mnemonic::Jl}, {"jle", Mnemonic::Jle}, {"jg", Mnemonic::Jg},
        {"jge", Mnemonic::Jge}, {"call", Mnemonic::Call}, {"ret", Mnemonic::Ret},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

// Operands.
struct RegOperand { int reg; bool operator==(const RegOperand&) const = default; };
struct ImmOperand { int64_t value; bool operator==(const ImmOperand&) const = default; };
// Memory operand [INT] or [reg].
struct MemOperand {
    bool is_reg = false;
    int reg = 0;
    int64_t addr = 0;
    bool operator==(const MemOperand&) const = default;
};
// Jump target / call symbol.
struct LabelOperand { std::string name; bool operator==(const LabelOperand&) const = default; };

using Operand = std::variant<RegOperand, ImmOperand, MemOperand, LabelOperand>;

enum class InstrOrigin { Original, Inserted, DummyCopy };

struct Instruction {
    Mnemonic mnemonic;
    std::vector<Operand> operands;
    RegSet defs;
    RegSet uses;
    bool dangerous = false;
    InstrOrigin origin = InstrOrigin::Original;
    // Set by the lowerer for instructions emitted inside an unreachable
    // (opaque-false-guarded) region.
    bool dead_region = false;

    bool same_text(const Instruction& o) const {
        return mnemonic == o.mnemonic && operands == o.operands;
    }
};

inline std::string to_string(const Operand& op) {
    if (auto* r = std::get_if<RegOperand>(&op)) return "r" + std::to_string(r->reg);
    if (auto* i = std::get_if<ImmOperand>(&op)) return std::to_string(i->value);
    if (auto* m = std::get_if<MemOperand>(&op))
        return m->is_reg ? "[r" + std::to_string(m->reg) + "]" : "[" + std::to_string(m->addr) + "]";
    return std::get<LabelOperand>(op).name;
}

inline std::string to_string(const Instruction& in) {
    std::string s = mnemonic_name(in.mnemonic);
    for (size_t i = 0; i < in.operands.size(); ++i)
        s += (i == 0 ? " " : ", ") + to_string(in.operands[i]);
    return s;
}

namespace detail {

inline int expected_operands(Mnemonic m) {
    switch (m) {
        case Mnemonic::Nop: case Mnemonic::Ret: return 0;
        case Mnemonic::Inc: case Mnemonic::Dec: case Mnemonic::Neg:
        case Mnemonic::Push: case Mnemonic::Pop:
        case Mnemonic::Call: return 1;
        default: return is_jump(m) ? 1 : 2;
    }
}

}  // namespace detail

// Resolves the DEF/USE sets and the dangerous flag from the normative
// table. Throws BadOperandCount on arity or operand-shape violations.
inline void resolve_semantics(Instruction& in) {
    const auto arity = detail::expected_operands(in.mnemonic);
    if (static_cast<int>(in.operands.size()) != arity)
        throw BadOperandCount(std::string(mnemonic_name(in.mnemonic)) + " expects " +
                              std::to_string(arity) + " operand(s)");

    auto reg_of = [&](int i) -> int {
        if (auto* r = std::get_if<RegOperand>(&in.operands[i])) return r->reg;
        throw BadOperandCount(std::string(mnemonic_name(in.mnemonic)) +
                              ": operand " + std::to_string(i + 1) + " must be a register");
    };
    auto mem_of = [&](int i) -> const MemOperand& {
        if (auto* m = std::get_if<MemOperand>(&in.operands[i])) return *m;
        throw BadOperandCount(std::string(mnemonic_name(in.mnemonic)) +
                              ": operand " + std::to_string(i + 1) + " must be a memory operand");
    };
    // Immediate operands contribute nothing to USE.
    auto use_src = [&](int i) {
        if (auto* r = std::get_if<RegOperand>(&in.operands[i])) in.uses.add(r->reg);
        else if (!std::holds_alternative<ImmOperand>(in.operands[i]))
            throw BadOperandCount(std::string(mnemonic_name(in.mnemonic)) +
                                  ": operand " + std::to_string(i + 1) + " must be a register or immediate");
    };
    auto use_mem = [&](const MemOperand& m) { if (m.is_reg) in.uses.add(m.reg); };

    in.defs = {};
    in.uses = {};
    in.dangerous = is_dangerous(in.mnemonic);

    switch (in.mnemonic) {
        case Mnemonic::Mov:
            in.defs.add(reg_of(0));
            use_src(1);
            break;
        case Mnemonic::Add: case Mnemonic::Sub: case Mnemonic::And:
        case Mnemonic::Or: case Mnemonic::Xor: case Mnemonic::Imul:
            in.defs.add(reg_of(0)) |= RegSet::flags();
            in.uses.add(reg_of(0));
            use_src(1);
            break;
        case Mnemonic::Inc: case Mnemonic::Dec: case Mnemonic::Neg:
            in.defs.add(reg_of(0)) |= RegSet::flags();
            in.uses.add(reg_of(0));
            break;
        case Mnemonic::Cmp: case Mnemonic::Test:
            in.defs = RegSet::flags();
            in.uses.add(reg_of(0));
            use_src(1);
            break;
        case Mnemonic::Lea:
            in.defs.add(reg_of(0));
            use_mem(mem_of(1));
            break;
        case Mnemonic::Load:
            in.defs.add(reg_of(0));
            use_mem(mem_of(1));
            break;
        case Mnemonic::Store:
            use_mem(mem_of(0));
            use_src(1);
            break;
        case Mnemonic::Push:
            use_src(0);
            break;
        case Mnemonic::Pop:
            in.defs.add(reg_of(0));
            break;
        case Mnemonic::Nop:
            break;
        case Mnemonic::Ret:
            in.uses.add(kReturnReg);
            break;
        case Mnemonic::Call:
            if (!std::holds_alternative<LabelOperand>(in.operands[0]))
                throw BadOperandCount("call: operand must be a symbol");
            break;
        default:  // jumps
            if (!std::holds_alternative<LabelOperand>(in.operands[0]))
                throw BadOperandCount(std::string(mnemonic_name(in.mnemonic)) +
                                      ": operand must be a label");
            if (is_cond_jump(in.mnemonic)) in.uses |= RegSet::flags();
            break;
    }
}

inline Instruction make_instruction(Mnemonic m, std::vector<Operand> ops,
                                    InstrOrigin origin = InstrOrigin::Original) {
    Instruction in;
    in.mnemonic = m;
    in.operands = std::move(ops);
    in.origin = origin;
    resolve_semantics(in);
    return in;
}

// ---------------------------------------------------------------------------
// Program text: one instruction or `LABEL:` per line, comments with `#`.

struct Label { std::string name; };
using AsmItem = std::variant<Instruction, Label>;

struct AsmProgram {
    std::vector<AsmItem> lines;
    std::string entry_label;

    std::vector<const Instruction*> instructions() const {
        std::vector<const Instruction*> out;
        for (const auto& l : lines)
            if (auto* i = std::get_if<Instruction>(&l)) out.push_back(i);
        return out;
    }
    size_t instruction_count() const {
        size_t n = 0;
        for (const auto& l : lines) n += std::holds_alternative<Instruction>(l);
        return n;
    }
};

inline std::string to_string(const AsmProgram& p) {
    std::string out;
    for (const auto& l : p.lines) {
        if (auto* lab = std::get_if<Label>(&l)) {
            out += lab->name + ":\n";
        } else {
            out += "  " + to_string(std::get<Instruction>(l)) + "\n";
        }
    }
    return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '.';
}

}  // namespace detail

// Parses a single instruction line (no label). `allow_label_operands`
// is false for SAL instruction lines, which have no jump targets.
inline Instruction parse_asm_line(std::string_view text, bool allow_label_operands = true,
                                  int line_no = 0) {
    using detail::trim;
    std::string_view s = trim(text);
    size_t sp = s.find_first_of(" \t");
    std::string_view mn = sp == std::string_view::npos ? s : s.substr(0, sp);
    auto m = mnemonic_from_name(mn);
    if (!m) throw UnknownMnemonic(std::string(mn));

    std::vector<Operand> ops;
    if (sp != std::string_view::npos) {
        std::string_view rest = trim(s.substr(sp + 1));
        size_t pos = 0;
        while (pos < rest.size()) {
            size_t comma = rest.find(',', pos);
            std::string_view tok = trim(rest.substr(pos, comma == std::string_view::npos
                                                              ? std::string_view::npos
                                                              : comma - pos));
            if (tok.empty())
                throw SyntaxError(line_no, static_cast<int>(pos) + 1, "empty operand");
            if (tok.front() == '[') {
                if (tok.back() != ']')
                    throw SyntaxError(line_no, static_cast<int>(pos) + 1, "unterminated memory operand");
                std::string_view inner = trim(tok.substr(1, tok.size() - 2));
                MemOperand mem;
                if (!inner.empty() && inner.front() == 'r' && inner.size() == 2 &&
                    inner[1] >= '0' && inner[1] <= '7') {
                    mem.is_reg = true;
                    mem.reg = inner[1] - '0';
                } else {
                    try {
                        size_t used = 0;
                        mem.addr = std::stoll(std::string(inner), &used);
                        if (used != inner.size()) throw std::invalid_argument("");
                    } catch (...) {
                        throw SyntaxError(line_no, static_cast<int>(pos) + 1,
                                          "bad memory operand [" + std::string(inner) + "]");
                    }
                }
                ops.push_back(mem);
            } else if (tok.size() == 2 && tok[0] == 'r' && tok[1] >= '0' && tok[1] <= '7') {
                ops.push_back(RegOperand{tok[1] - '0'});
            } else if (tok[0] == '-' || (tok[0] >= '0' && tok[0] <= '9')) {
                try {
                    size_t used = 0;
                    int64_t v = std::stoll(std::string(tok), &used);
                    if (used != tok.size()) throw std::invalid_argument("");
                    ops.push_back(ImmOperand{v});
                } catch (...) {
                    throw SyntaxError(line_no, static_cast<int>(pos) + 1,
                                      "bad immediate " + std::string(tok));
                }
            } else {
                bool ok = !tok.empty();
                for (char c : tok) ok = ok && detail::is_ident_char(c);
                if (!ok)
                    throw SyntaxError(line_no, static_cast<int>(pos) + 1,
                                      "bad operand " + std::string(tok));
                if (!allow_label_operands)
                    throw SyntaxError(line_no, static_cast<int>(pos) + 1,
                                      "label operand not allowed here: " + std::string(tok));
                ops.push_back(LabelOperand{std::string(tok)});
            }
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
    }
    return make_instruction(*m, std::move(ops));
}

// Parses mini-asm text into a program; checks every jump target resolves
// to exactly one label. Call symbols are left unresolved.
inline AsmProgram parse_asm(std::string_view text) {
    AsmProgram prog;
    std::map<std::string, int> label_count;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                             : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        size_t hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string_view s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.back() == ':') {
            std::string name(detail::trim(s.substr(0, s.size() - 1)));
            if (name.empty()) throw SyntaxError(line_no, 1, "empty label");
            ++label_count[name];
            if (prog.entry_label.empty()) prog.entry_label = name;
            prog.lines.push_back(Label{name});
        } else {
            prog.lines.push_back(parse_asm_line(s, true, line_no));
        }
    }
    for (const auto& [name, n] : label_count)
        if (n > 1) throw SyntaxError(0, 0, "duplicate label " + name);
    for (const auto& l : prog.lines) {
        auto* in = std::get_if<Instruction>(&l);
        if (!in || !is_jump(in->mnemonic)) continue;
        const auto& target = std::get<LabelOperand>(in->operands[0]).name;
        if (!label_count.count(target)) throw UndefinedLabel(target);
    }
    return prog;
}

// ---------------------------------------------------------------------------
// Control-flow graph over a parsed program.

struct BasicBlock {
    int id = 0;
    std::optional<std::string> label;  // label naming the block's leader, if any
    int first = 0;  // instruction index span [first, last], inclusive
    int last = -1;  // last < first means the block holds no instructions
    bool dead = false;  // all instructions emitted in an unreachable region
};

struct Cfg {
    std::vector<BasicBlock> blocks;
    std::vector<std::pair<int, int>> edges;
    int entry = 0;

    int block_of(int instr_index) const {
        for (const auto& b : blocks)
            if (instr_index >= b.first && instr_index <= b.last) return b.id;
        return -1;
    }
};

// Flat instruction view with label resolution, shared by the CFG builder,
// liveness and the VM.
struct FlatProgram {
    std::vector<Instruction> instrs;
    std::map<std::string, int> label_to_index;  // label -> index of next instruction
    std::vector<std::vector<std::string>> labels_at;  // labels immediately before instrs[i]
    std::vector<std::string> trailing_labels;         // labels after the last instruction

    static FlatProgram from(const AsmProgram& prog) {
        FlatProgram f;
        std::vector<std::string> pending;
        for (const auto& l : prog.lines) {
            if (auto* lab = std::get_if<Label>(&l)) {
                pending.push_back(lab->name);
            } else {
                for (const auto& name : pending)
                    f.label_to_index[name] = static_cast<int>(f.instrs.size());
                f.labels_at.push_back(pending);
                pending.clear();
                f.instrs.push_back(std::get<Instruction>(l));
            }
        }
        for (const auto& name : pending)
            f.label_to_index[name] = static_cast<int>(f.instrs.size());
        f.trailing_labels = pending;
        return f;
    }

    int resolve(const std::string& label) const {
        auto it = label_to_index.find(label);
        if (it == label_to_index.end()) throw UndefinedLabel(label);
        return it->second;
    }

    // Successor instruction indices. An index equal to instrs.size()
    // means "falls off the end".
    std::vector<int> successors(int i) const {
        const auto& in = instrs[i];
        if (in.mnemonic == Mnemonic::Ret) return {};
        if (in.mnemonic == Mnemonic::Jmp)
            return {resolve(std::get<LabelOperand>(in.operands[0]).name)};
        if (is_cond_jump(in.mnemonic))
            return {i + 1, resolve(std::get<LabelOperand>(in.operands[0]).name)};
        return {i + 1};
    }
};

// Leader-based block partition. Unreachable blocks are retained.
inline Cfg build_cfg(const AsmProgram& prog) {
    FlatProgram f = FlatProgram::from(prog);
    const int n = static_cast<int>(f.instrs.size());
    Cfg cfg;
    if (n == 0) return cfg;

    std::vector<bool> leader(n, false);
    leader[0] = true;
    for (int i = 0; i < n; ++i) {
        if (!f.labels_at[i].empty()) leader[i] = true;
        if (ends_block(f.instrs[i].mnemonic)) {
            if (i + 1 < n) leader[i + 1] = true;
            if (is_jump(f.instrs[i].mnemonic)) {
                int t = f.resolve(std::get<LabelOperand>(f.instrs[i].operands[0]).name);
                if (t < n) leader[t] = true;
            }
        }
    }

    std::vector<int> block_of(n, 0);
    for (int i = 0; i < n; ++i) {
        if (leader[i]) {
            BasicBlock b;
            b.id = static_cast<int>(cfg.blocks.size());
            b.first = i;
            if (!f.labels_at[i].empty()) b.label = f.labels_at[i].front();
            cfg.blocks.push_back(b);
        }
        block_of[i] = cfg.blocks.back().id;
        cfg.blocks.back().last = i;
    }
    for (auto& b : cfg.blocks) {
        b.dead = true;
        for (int i = b.first; i <= b.last; ++i) b.dead = b.dead && f.instrs[i].dead_region;
    }

    for (int i = 0; i < n; ++i) {
        if (i != cfg.blocks[block_of[i]].last) continue;
        for (int s : f.successors(i))
            if (s < n) cfg.edges.emplace_back(block_of[i], block_of[s]);
    }
    cfg.entry = 0;
    return cfg;
}

}  // namespace mimicry

#endif
