#ifndef MIMICRY_VM_HPP
#define MIMICRY_VM_HPP

// Deterministic interpreter for mini-asm plus a twin tree-walking
// interpreter for CfTree. Ground-truth semantics oracle.

#include <mimicry/asm_model.hpp>
#include <mimicry/sal.hpp>

#include <array>
#include <cstdint>
#include <random>

namespace mimicry {

inline constexpr uint64_t kDefaultStepLimit = 100000;

struct MachineState {
    std::array<int64_t, kNumRegs> regs{};
    bool zf = false;
    bool sf = false;
    std::array<int64_t, kMemWords> mem{};
    std::vector<int64_t> stack;
    uint64_t steps = 0;

    // Seeded random state: registers in [-16, 16], non-reserved memory
    // in [0, 255], reserved cells zero.
    static MachineState random(uint64_t seed) {
        MachineState s;
        std::mt19937_64 rng(seed);
        for (auto& r : s.regs) r = static_cast<int64_t>(rng() % 33) - 16;
        for (size_t i = kReservedCells; i < kMemWords; ++i)
            s.mem[i] = static_cast<int64_t>(rng() % 256);
        return s;
    }
};

enum class ExecStatus { Finished, Timeout, Fault };

struct ExecResult {
    ExecStatus status = ExecStatus::Finished;
    MachineState state;
    std::string fault;
    // Executed instructions whose origin is DummyCopy. Zero on every run
    // of a correctly transformed program.
    uint64_t dummy_copy_executed = 0;
};

namespace vm_detail {

inline int64_t wrap_add(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
inline int64_t wrap_sub(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
}
inline int64_t wrap_mul(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}

struct Machine {
    MachineState st;
    uint64_t step_limit;
    uint64_t dummy_copy_executed = 0;
    std::string fault;

    explicit Machine(MachineState initial, uint64_t limit) : st(std::move(initial)), step_limit(limit) {}

    void set_flags(int64_t v) {
        st.zf = v == 0;
        st.sf = v < 0;
    }

    int64_t read_operand(const Operand& op) {
        if (auto* r = std::get_if<RegOperand>(&op)) return st.regs[r->reg];
        return std::get<ImmOperand>(op).value;
    }

    bool mem_addr(const MemOperand& m, size_t& out) {
        int64_t a = m.is_reg ? st.regs[m.reg] : m.addr;
        if (a < 0 || a >= static_cast<int64_t>(kMemWords)) {
            fault = "memory access out of range: " + std::to_string(a);
            return false;
        }
        out = static_cast<size_t>(a);
        return true;
    }

    // Executes one instruction; fills `jump_to` with a label when control
    // transfers. Returns false on fault.
    bool exec(const Instruction& in, std::optional<std::string>& jump_to, bool& returned) {
        if (in.origin == InstrOrigin::DummyCopy) ++dummy_copy_executed;
        auto dst = [&]() -> int64_t& { return st.regs[std::get<RegOperand>(in.operands[0]).reg]; };
        switch (in.mnemonic) {
            case Mnemonic::Mov: dst() = read_operand(in.operands[1]); break;
            case Mnemonic::Add: dst() = wrap_add(dst(), read_operand(in.operands[1])); set_flags(dst()); break;
            case Mnemonic::Sub: dst() = wrap_sub(dst(), read_operand(in.operands[1])); set_flags(dst()); break;
            case Mnemonic::And: dst() &= read_operand(in.operands[1]); set_flags(dst()); break;
            case Mnemonic::Or: dst() |= read_operand(in.operands[1]); set_flags(dst()); break;
            case Mnemonic::Xor: dst() ^= read_operand(in.operands[1]); set_flags(dst()); break;
            case Mnemonic::Imul: dst() = wrap_mul(dst(), read_operand(in.operands[1])); set_flags(dst()); break;
            case Mnemonic::Inc: dst() = wrap_add(dst(), 1); set_flags(dst()); break;
            case Mnemonic::Dec: dst() = wrap_sub(dst(), 1); set_flags(dst()); break;
            case Mnemonic::Neg: dst() = wrap_sub(0, dst()); set_flags(dst()); break;
            case Mnemonic::Cmp: {
                int64_t a = read_operand(in.operands[0]);
                int64_t b = read_operand(in.operands[1]);
                st.zf = a == b;
                st.sf = a < b;
                break;
            }
            case Mnemonic::Test: {
                int64_t v = read_operand(in.operands[0]) & read_operand(in.operands[1]);
                set_flags(v);
                break;
            }
            case Mnemonic::Lea: {
                const auto& m = std::get<MemOperand>(in.operands[1]);
                dst() = m.is_reg ? st.regs[m.reg] : m.addr;
                break;
            }
            case Mnemonic::Load: {
                size_t a;
                if (!mem_addr(std::get<MemOperand>(in.operands[1]), a)) return false;
                dst() = st.mem[a];
                break;
            }
            case Mnemonic::Store: {
                size_t a;
                if (!mem_addr(std::get<MemOperand>(in.operands[0]), a)) return false;
                st.mem[a] = read_operand(in.operands[1]);
                break;
            }
            case Mnemonic::Push:
                st.stack.push_back(read_operand(in.operands[0]));
                break;
            case Mnemonic::Pop:
                if (st.stack.empty()) { fault = "pop on empty stack"; return false; }
                dst() = st.stack.back();
                st.stack.pop_back();
                break;
            case Mnemonic::Nop:
                break;
            case Mnemonic::Call:
                fault = "call has no callee semantics";
                return false;
            case Mnemonic::Ret:
                returned = true;
                break;
            case Mnemonic::Jmp:
                jump_to = std::get<LabelOperand>(in.operands[0]).name;
                break;
            default: {  // conditional jumps
                bool taken = false;
                switch (in.mnemonic) {
                    case Mnemonic::Je: taken = st.zf; break;
                    case Mnemonic::Jne: taken = !st.zf; break;
                    case Mnemonic::Jl: taken = st.sf; break;
                    case Mnemonic::Jle: taken = st.sf || st.zf; break;
                    case Mnemonic::Jg: taken = !st.sf && !st.zf; break;
                    case Mnemonic::Jge: taken = !st.sf; break;
                    default: break;
                }
                if (taken) jump_to = std::get<LabelOperand>(in.operands[0]).name;
                break;
            }
        }
        return true;
    }

    bool tick() {
        ++st.steps;
        return st.steps <= step_limit;
    }
};

}  // namespace vm_detail

inline ExecResult execute(const AsmProgram& prog, MachineState initial,
                          uint64_t step_limit = kDefaultStepLimit) {
    FlatProgram f = FlatProgram::from(prog);
    vm_detail::Machine m(std::move(initial), step_limit);
    ExecResult res;
    int pc = 0;
    const int n = static_cast<int>(f.instrs.size());
    while (true) {
        if (pc >= n) {
            res.status = ExecStatus::Fault;
            res.fault = "fell off the end of the program";
            break;
        }
        if (!m.tick()) {
            res.status = ExecStatus::Timeout;
            break;
        }
        std::optional<std::string> jump_to;
        bool returned = false;
        if (!m.exec(f.instrs[pc], jump_to, returned)) {
            res.status = ExecStatus::Fault;
            res.fault = m.fault;
            break;
        }
        if (returned) {
            res.status = ExecStatus::Finished;
            break;
        }
        if (jump_to) {
            try {
                pc = f.resolve(*jump_to);
            } catch (const UndefinedLabel& e) {
                res.status = ExecStatus::Fault;
                res.fault = e.what();
                break;
            }
        } else {
            ++pc;
        }
    }
    res.state = std::move(m.st);
    res.dummy_copy_executed = m.dummy_copy_executed;
    return res;
}

// ---------------------------------------------------------------------------
// Tree-walking twin. Mirrors the lowering schema's register and flag
// side effects for condition evaluation so r7/FLAGS agree with the
// lowered program at every user-visible point.

namespace vm_detail {

enum class Flow { Fall, Break, Continue, Return, Fault, Timeout };

struct TreeMachine : Machine {
    using Machine::Machine;

    // Counter cells are handed out in lowering order (preorder); the tree
    // twin replays the same assignment so memory effects line up.
    std::map<const CfTree*, int> cells;
    int next_counter_cell = 1;

    struct LoopCtx {
        bool run_once = false;
        int cell = -1;
    };
    std::vector<LoopCtx> loop_ctx;

    void assign_cells(const CfTree& t) {
        if (t.kind == CfKind::While && t.condition &&
            t.condition->form == Condition::Form::OpaqueTrue) {
            if (next_counter_cell >= static_cast<int>(kReservedCells))
                throw ReservedCellExhausted("no reserved counter cell left for run-once loop");
            cells[&t] = next_counter_cell++;
        }
        if (t.body) assign_cells(*t.body);
        if (t.tail) assign_cells(*t.tail);
    }

    // Replicates `mov r7, 0; store [cell], r7`.
    bool counter_reset(int cell) {
        if (!tick() || !tick()) return false;
        st.regs[kScratchReg] = 0;
        st.mem[static_cast<size_t>(cell)] = 0;
        return true;
    }

    // Break/continue jump straight to the innermost real loop, resetting
    // the counters of the run-once dummies they abandon (same emission
    // order as the lowerer's jump-site resets).
    bool escape_resets() {
        for (auto it = loop_ctx.rbegin(); it != loop_ctx.rend() && it->run_once; ++it)
            if (!counter_reset(it->cell)) return false;
        return true;
    }

    bool eval_cmp(int64_t a, CmpOp op, int64_t b) {
        st.zf = a == b;
        st.sf = a < b;
        switch (op) {
            case CmpOp::Eq: return st.zf;
            case CmpOp::Ne: return !st.zf;
            case CmpOp::Lt: return st.sf;
            case CmpOp::Le: return st.sf || st.zf;
            case CmpOp::Gt: return !st.sf && !st.zf;
            case CmpOp::Ge: return !st.sf;
        }
        return false;
    }

    // Replicates `load r7, [0]; cmp r7, 0`.
    void eval_opaque_probe() {
        st.regs[kScratchReg] = st.mem[kOpaqueCell];
        st.zf = st.regs[kScratchReg] == 0;
        st.sf = st.regs[kScratchReg] < 0;
    }

    Flow run(const CfTree& t) {
        for (const auto& in : t.instructions) {
            if (!tick()) return Flow::Timeout;
            std::optional<std::string> jump_to;
            bool returned = false;
            if (!exec(in, jump_to, returned)) return Flow::Fault;
            if (returned) return Flow::Return;
        }
        switch (t.kind) {
            case CfKind::End: return Flow::Fall;
            case CfKind::Break:
                if (!escape_resets()) return Flow::Timeout;
                if (!tick()) return Flow::Timeout;  // lowered `jmp L_exit`
                return Flow::Break;
            case CfKind::Continue:
                if (!escape_resets()) return Flow::Timeout;
                if (!tick()) return Flow::Timeout;  // lowered `jmp L_head`
                return Flow::Continue;
            case CfKind::If: {
                bool taken;
                if (!eval_condition(*t.condition, taken)) return Flow::Timeout;
                if (taken) {
                    Flow fl = run(*t.body);
                    if (fl != Flow::Fall) return fl;
                }
                return run(*t.tail);
            }
            case CfKind::While: {
                if (t.condition->form == Condition::Form::OpaqueTrue) {
                    // Run-once loop: counter cell probe, one body pass,
                    // counter reset on the exit path. Break/continue in the
                    // body escape this loop entirely (it is a dummy), so
                    // they propagate after the jump-site resets.
                    int cell = cells.at(&t);
                    loop_ctx.push_back({true, cell});
                    while (true) {
                        if (!tick() || !tick() || !tick()) {  // load+cmp+jne
                            loop_ctx.pop_back();
                            return Flow::Timeout;
                        }
                        eval_counter_probe(cell);
                        if (st.mem[static_cast<size_t>(cell)] != 0) break;  // to exit label
                        if (!tick() || !tick()) {  // mov+store
                            loop_ctx.pop_back();
                            return Flow::Timeout;
                        }
                        st.regs[kScratchReg] = 1;
                        st.mem[static_cast<size_t>(cell)] = 1;
                        Flow fl = run(*t.body);
                        if (fl != Flow::Fall) {
                            loop_ctx.pop_back();
                            return fl;
                        }
                        if (!tick()) {  // back jump
                            loop_ctx.pop_back();
                            return Flow::Timeout;
                        }
                    }
                    loop_ctx.pop_back();
                    if (!counter_reset(cell)) return Flow::Timeout;
                    return run(*t.tail);
                }
                loop_ctx.push_back({false, -1});
                while (true) {
                    bool taken;
                    if (!eval_condition(*t.condition, taken)) {
                        loop_ctx.pop_back();
                        return Flow::Timeout;
                    }
                    if (!taken) break;
                    Flow fl = run(*t.body);
                    if (fl == Flow::Return || fl == Flow::Fault || fl == Flow::Timeout) {
                        loop_ctx.pop_back();
                        return fl;
                    }
                    if (fl == Flow::Break) break;
                    if (!tick()) {  // back jump
                        loop_ctx.pop_back();
                        return Flow::Timeout;
                    }
                }
                loop_ctx.pop_back();
                return run(*t.tail);
            }
        }
        return Flow::Fault;
    }

    // Replicates `load r7, [cell]; cmp r7, 0`.
    void eval_counter_probe(int cell) {
        st.regs[kScratchReg] = st.mem[static_cast<size_t>(cell)];
        st.zf = st.regs[kScratchReg] == 0;
        st.sf = st.regs[kScratchReg] < 0;
    }

    // Evaluates an If/While condition with the same step cost and side
    // effects as its lowered form (cmp or load+cmp, plus the jcc).
    bool eval_condition(const Condition& c, bool& taken) {
        switch (c.form) {
            case Condition::Form::RegCmpImm:
                if (!tick() || !tick()) return false;
                taken = eval_cmp(st.regs[c.lhs], c.op, c.rhs_imm);
                return true;
            case Condition::Form::RegCmpReg:
                if (!tick() || !tick()) return false;
                taken = eval_cmp(st.regs[c.lhs], c.op, st.regs[c.rhs_reg]);
                return true;
            case Condition::Form::OpaqueTrue:
                if (!tick() || !tick() || !tick()) return false;
                eval_opaque_probe();
                taken = true;
                return true;
            case Condition::Form::OpaqueFalse:
                if (!tick() || !tick() || !tick()) return false;
                eval_opaque_probe();
                taken = false;
                return true;
        }
        return false;
    }
};

}  // namespace vm_detail

inline ExecResult execute(const CfTree& tree, MachineState initial,
                          uint64_t step_limit = kDefaultStepLimit) {
    vm_detail::TreeMachine m(std::move(initial), step_limit);
    m.assign_cells(tree);
    vm_detail::Flow fl = m.run(tree);
    ExecResult res;
    switch (fl) {
        case vm_detail::Flow::Timeout:
            res.status = ExecStatus::Timeout;
            break;
        case vm_detail::Flow::Fault:
            res.status = ExecStatus::Fault;
            res.fault = m.fault.empty() ? "fault" : m.fault;
            break;
        case vm_detail::Flow::Return:
        case vm_detail::Flow::Fall:
            // Falling off the tree is the implicit `ret` the lowerer appends.
            res.status = ExecStatus::Finished;
            break;
        default:
            res.status = ExecStatus::Fault;
            res.fault = "break/continue escaped the function";
            break;
    }
    res.state = std::move(m.st);
    res.dummy_copy_executed = m.dummy_copy_executed;
    return res;
}

// ---------------------------------------------------------------------------
// Equivalence oracle. Observable = (r0, mem[16..255], termination status).

inline bool observably_equal(const ExecResult& a, const ExecResult& b) {
    if (a.status != b.status) return false;
    if (a.status != ExecStatus::Finished) return true;  // same failure mode
    if (a.state.regs[kReturnReg] != b.state.regs[kReturnReg]) return false;
    for (size_t i = kReservedCells; i < kMemWords; ++i)
        if (a.state.mem[i] != b.state.mem[i]) return false;
    return true;
}

struct EquivalenceVerdict {
    bool equivalent = true;
    std::optional<MachineState> witness;
    std::string detail;
};

template <typename ProgA, typename ProgB>
EquivalenceVerdict check_equivalence(const ProgA& a, const ProgB& b, int trials, uint64_t seed,
                                     uint64_t step_limit = kDefaultStepLimit) {
    std::mt19937_64 seeder(seed);
    for (int t = 0; t < trials; ++t) {
        MachineState init = MachineState::random(seeder());
        ExecResult ra = execute(a, init, step_limit);
        ExecResult rb = execute(b, init, step_limit);
        if (ra.status != ExecStatus::Finished || rb.status != ExecStatus::Finished) {
            if (ra.status == rb.status) continue;
            return {false, init, "termination status diverged (" + ra.fault + " / " + rb.fault + ")"};
        }
        if (!observably_equal(ra, rb))
            return {false, init, "observable state diverged on trial " + std::to_string(t)};
    }
    return {};
}

}  // namespace mimicry

#endif
