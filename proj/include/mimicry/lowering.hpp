#ifndef MIMICRY_LOWERING_HPP
#define MIMICRY_LOWERING_HPP

// Lowers a CfTree to mini-asm under a rigid schema: block structure is a
// pure function of tree shape, so two trees with the same kind-preorder
// lower to programs with identical CFG skeletons.

#include <mimicry/match.hpp>
#include <mimicry/sal.hpp>

namespace mimicry {

namespace lower_detail {

inline Mnemonic negated_jump(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return Mnemonic::Jne;
        case CmpOp::Ne: return Mnemonic::Je;
        case CmpOp::Lt: return Mnemonic::Jge;
        case CmpOp::Le: return Mnemonic::Jg;
        case CmpOp::Gt: return Mnemonic::Jle;
        case CmpOp::Ge: return Mnemonic::Jl;
    }
    return Mnemonic::Jmp;
}

struct Lowerer {
    AsmProgram prog;
    int next_node = 0;
    int next_counter_cell = 1;  // cells 1..15 back run-once loops

    // An empty region between two schema labels (or between a condition
    // jump's fall-through and the next label) would fuse blocks that
    // stay separate when the region holds code. A nop pad keeps block
    // structure a function of tree shape alone.
    void emit_label(const std::string& l, bool dead) {
        bool need_pad = false;
        if (!prog.lines.empty()) {
            if (std::holds_alternative<Label>(prog.lines.back())) {
                need_pad = true;
            } else {
                const auto& in = std::get<Instruction>(prog.lines.back());
                need_pad = is_cond_jump(in.mnemonic);
            }
        }
        if (need_pad) emit(Mnemonic::Nop, {}, dead, InstrOrigin::Original);
        prog.lines.emplace_back(Label{l});
    }

    void emit(Mnemonic mn, std::vector<Operand> ops, bool dead, InstrOrigin origin) {
        Instruction in = make_instruction(mn, std::move(ops));
        in.dead_region = dead;
        in.origin = origin;
        prog.lines.emplace_back(std::move(in));
    }

    void emit_instr(Instruction in, bool dead) {
        in.dead_region = in.dead_region || dead;
        prog.lines.emplace_back(std::move(in));
    }

    // Emits the condition probe followed by a jump-if-false to `on_false`.
    // Opaque probes read the opaque cell (always 0) through the scratch
    // register; the merged-tree interpreter mirrors these side effects.
    void emit_condition(const Condition& c, const std::string& on_false, bool dead,
                        InstrOrigin origin) {
        switch (c.form) {
            case Condition::Form::RegCmpImm:
                emit(Mnemonic::Cmp, {RegOperand{c.lhs}, ImmOperand{c.rhs_imm}}, dead, origin);
                emit(negated_jump(c.op), {LabelOperand{on_false}}, dead, origin);
                break;
            case Condition::Form::RegCmpReg:
                emit(Mnemonic::Cmp, {RegOperand{c.lhs}, RegOperand{c.rhs_reg}}, dead, origin);
                emit(negated_jump(c.op), {LabelOperand{on_false}}, dead, origin);
                break;
            case Condition::Form::OpaqueTrue:
                emit(Mnemonic::Load, {RegOperand{kScratchReg}, MemOperand{false, 0, 0}}, dead,
                     origin);
                emit(Mnemonic::Cmp, {RegOperand{kScratchReg}, ImmOperand{0}}, dead, origin);
                // cell is 0, cmp sets ZF: jne is never taken.
                emit(Mnemonic::Jne, {LabelOperand{on_false}}, dead, origin);
                break;
            case Condition::Form::OpaqueFalse:
                emit(Mnemonic::Load, {RegOperand{kScratchReg}, MemOperand{false, 0, 0}}, dead,
                     origin);
                emit(Mnemonic::Cmp, {RegOperand{kScratchReg}, ImmOperand{0}}, dead, origin);
                // ZF set: je always taken.
                emit(Mnemonic::Je, {LabelOperand{on_false}}, dead, origin);
                break;
        }
    }

    struct LoopLabels {
        std::string head;
        std::string exit;
        bool run_once = false;  // opaque-true dummy loop, transparent to break/continue
        int cell = -1;          // its reserved counter cell
    };

    // Zeroes a run-once counter cell through the scratch register.
    void emit_counter_reset(int cell, bool dead, InstrOrigin origin) {
        emit(Mnemonic::Mov, {RegOperand{kScratchReg}, ImmOperand{0}}, dead, origin);
        emit(Mnemonic::Store, {MemOperand{false, 0, cell}, RegOperand{kScratchReg}}, dead,
             origin);
    }

    // Break/continue target the innermost *real* loop. Run-once dummy
    // loops between the jump site and that loop are left for good, so
    // their counters are reset here; otherwise a later re-entry from an
    // enclosing loop iteration would skip the live body.
    void emit_loop_jump(const std::vector<LoopLabels>& loops, bool is_break, bool dead,
                        InstrOrigin origin) {
        int i = static_cast<int>(loops.size()) - 1;
        while (i >= 0 && loops[i].run_once) {
            emit_counter_reset(loops[i].cell, dead, origin);
            --i;
        }
        if (i < 0)
            throw StructureError("break/continue has no enclosing loop outside run-once dummies");
        emit(Mnemonic::Jmp, {LabelOperand{is_break ? loops[i].exit : loops[i].head}}, dead,
             origin);
    }

    void lower_node(const CfTree& t, bool dead, const std::vector<LoopLabels>& loops) {
        // Scaffolding for dummy nodes (probes, jumps, run-once headers) is
        // synthesized material and may run on the live path, so it is
        // tagged Inserted -- never DummyCopy, which must never execute.
        InstrOrigin node_origin =
            t.origin == NodeOrigin::DummyFromTarget ? InstrOrigin::Inserted : InstrOrigin::Original;
        for (const auto& in : t.instructions) emit_instr(in, dead);
        switch (t.kind) {
            case CfKind::End:
                break;
            case CfKind::Break:
                if (loops.empty()) throw StructureError("break outside loop");
                emit_loop_jump(loops, true, dead, node_origin);
                break;
            case CfKind::Continue:
                if (loops.empty()) throw StructureError("continue outside loop");
                emit_loop_jump(loops, false, dead, node_origin);
                break;
            case CfKind::If: {
                int n = next_node++;
                std::string join = "L" + std::to_string(n) + "_join";
                bool body_dead = dead || t.condition->form == Condition::Form::OpaqueFalse;
                emit_condition(*t.condition, join, dead, node_origin);
                lower_node(*t.body, body_dead, loops);
                // A pad emitted here sits at the end of the body region,
                // so it shares the body's deadness.
                emit_label(join, body_dead);
                lower_node(*t.tail, dead, loops);
                break;
            }
            case CfKind::While: {
                int n = next_node++;
                std::string head = "L" + std::to_string(n) + "_head";
                std::string exit = "L" + std::to_string(n) + "_exit";
                emit_label(head, dead);
                bool body_dead = dead || t.condition->form == Condition::Form::OpaqueFalse;
                bool run_once = t.condition->form == Condition::Form::OpaqueTrue;
                int cell = -1;
                if (run_once) {
                    // Run-once loop: a reserved counter cell starts at 0,
                    // flips to 1 on entry, and blocks re-entry; the exit
                    // path zeroes it again so an enclosing loop iteration
                    // runs the body afresh.
                    if (next_counter_cell >= static_cast<int>(kReservedCells))
                        throw ReservedCellExhausted("no reserved counter cell left for run-once loop");
                    cell = next_counter_cell++;
                    emit(Mnemonic::Load, {RegOperand{kScratchReg}, MemOperand{false, 0, cell}},
                         dead, node_origin);
                    emit(Mnemonic::Cmp, {RegOperand{kScratchReg}, ImmOperand{0}}, dead, node_origin);
                    emit(Mnemonic::Jne, {LabelOperand{exit}}, dead, node_origin);
                    emit(Mnemonic::Mov, {RegOperand{kScratchReg}, ImmOperand{1}}, dead, node_origin);
                    emit(Mnemonic::Store, {MemOperand{false, 0, cell}, RegOperand{kScratchReg}},
                         dead, node_origin);
                } else {
                    emit_condition(*t.condition, exit, dead, node_origin);
                }
                std::vector<LoopLabels> inner = loops;
                inner.push_back({head, exit, run_once, cell});
                lower_node(*t.body, body_dead, inner);
                // The back jump is reachable only from inside the body, so it
                // shares the body's deadness.
                emit(Mnemonic::Jmp, {LabelOperand{head}}, body_dead, node_origin);
                emit_label(exit, dead);
                if (run_once) emit_counter_reset(cell, dead, node_origin);
                lower_node(*t.tail, dead, loops);
                break;
            }
        }
    }
};

}  // namespace lower_detail

inline AsmProgram lower(const CfTree& tree) {
    lower_detail::Lowerer lw;
    lw.emit_label("L_entry", false);
    lw.prog.entry_label = "L_entry";
    lw.lower_node(tree, false, {});
    // Append the implicit return unless the tree already ends in one.
    const Instruction* last = nullptr;
    for (const auto& ln : lw.prog.lines)
        if (auto* in = std::get_if<Instruction>(&ln)) last = in;
    if (!last || last->mnemonic != Mnemonic::Ret)
        lw.emit(Mnemonic::Ret, {}, false, InstrOrigin::Original);
    return lw.prog;
}

// Pairs up basic blocks of two programs lowered from same-shape trees.
// The schema makes block structure a function of tree shape alone, so the
// pairing is positional; a count mismatch means the trees were not
// produced by this pipeline.
inline std::vector<std::pair<int, int>> derive_block_map(const Cfg& from, const Cfg& to) {
    if (from.blocks.size() != to.blocks.size())
        throw SchemaMismatch("block counts differ: " + std::to_string(from.blocks.size()) +
                             " vs " + std::to_string(to.blocks.size()));
    std::vector<std::pair<int, int>> m;
    m.reserve(from.blocks.size());
    for (size_t i = 0; i < from.blocks.size(); ++i)
        m.emplace_back(static_cast<int>(i), static_cast<int>(i));
    return m;
}

}  // namespace mimicry

#endif
