#ifndef MIMICRY_CORPUS_HPP
#define MIMICRY_CORPUS_HPP

// Seeded synthetic SAL corpus generator. In embeddable mode every
// payload shares one control-flow skeleton and every target is that
// skeleton with extra nodes grafted on, so Stage 1 succeeds on all
// cross pairs by construction. Loops are counted down in-body, so all
// generated functions terminate from any start state.

#include <mimicry/sal.hpp>
#include <mimicry/vm.hpp>

#include <random>
#include <set>

namespace mimicry {

struct CorpusSpec {
    uint64_t seed = 1;
    int n_payloads = 10;
    int n_targets = 10;
    int payload_nodes_min = 1, payload_nodes_max = 2;
    int target_nodes_min = 4, target_nodes_max = 8;
    int instrs_min = 2, instrs_max = 4;
    // Targets carry denser blocks than payloads; the grafted-on dead mass
    // has to outweigh the payload before the output histogram tips over.
    int target_instrs_min = 3, target_instrs_max = 8;
    bool embeddable = true;
};

struct CorpusFunction {
    std::string name;
    std::string role;  // "payload" | "target"
    std::string sal_text;
    int cf_nodes = 0;
    int instructions = 0;
};

struct Corpus {
    CorpusSpec spec;
    std::vector<CorpusFunction> payloads;
    std::vector<CorpusFunction> targets;
};

inline int count_instructions(const CfTree& t) {
    int n = static_cast<int>(t.instructions.size());
    if (t.body) n += count_instructions(*t.body);
    if (t.tail) n += count_instructions(*t.tail);
    return n;
}

namespace corpus_detail {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(uint64_t seed) : eng(seed) {}
    // Uniform in [lo, hi], modulo sampling for cross-platform stability.
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(eng() % static_cast<uint64_t>(hi - lo + 1));
    }
    int irange(int lo, int hi) { return static_cast<int>(range(lo, hi)); }
    bool chance(int percent) { return irange(1, 100) <= percent; }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<size_t>(irange(0, static_cast<int>(v.size()) - 1))];
    }
};

// Random tree shape with exactly n If/While/Break/Continue nodes.
inline std::unique_ptr<CfTree> random_shape(Rng& rng, int n, int loop_depth) {
    auto node = std::make_unique<CfTree>();
    if (n == 0) {
        node->kind = CfKind::End;
        return node;
    }
    if (n == 1 && loop_depth > 0 && rng.chance(20)) {
        node->kind = rng.chance(50) ? CfKind::Break : CfKind::Continue;
        return node;
    }
    // Depth cap keeps the per-loop counter registers within r0..r6.
    bool is_while = loop_depth < 4 && rng.chance(45);
    node->kind = is_while ? CfKind::While : CfKind::If;
    int body_n = rng.irange(0, n - 1);
    node->body = random_shape(rng, body_n, loop_depth + (is_while ? 1 : 0));
    node->tail = random_shape(rng, n - 1 - body_n, loop_depth);
    return node;
}

// Grafts `extra` additional nodes onto a clone of the skeleton.
// Tail-grafts put the existing subtree behind a new node's tail (the
// constructive merge handles this with an opaque-false dummy); body
// grafts wrap the subtree in an If whose tail is a fresh End (handled
// by a body-carries-live dummy).
inline void graft(Rng& rng, std::unique_ptr<CfTree>& root, int extra) {
    for (int g = 0; g < extra; ++g) {
        // Edit links whose subtree is not a Break/Continue leaf (those
        // payload leaves cannot skip over an interposed node), with the
        // loop depth of each link.
        std::vector<std::pair<std::unique_ptr<CfTree>*, int>> links;
        struct Walk {
            static void run(std::unique_ptr<CfTree>& l, int depth,
                            std::vector<std::pair<std::unique_ptr<CfTree>*, int>>& out) {
                if (l->kind != CfKind::Break && l->kind != CfKind::Continue)
                    out.push_back({&l, depth});
                if (l->body) run(l->body, depth + (l->kind == CfKind::While ? 1 : 0), out);
                if (l->tail) run(l->tail, depth, out);
            }
        };
        Walk::run(root, 0, links);
        auto [link, depth] = rng.pick(links);
        bool body_graft = rng.chance(35);
        auto n = std::make_unique<CfTree>();
        if (body_graft) {
            n->kind = CfKind::If;
            n->body = std::move(*link);
            n->tail = std::make_unique<CfTree>();  // fresh End
        } else {
            n->kind = depth < 4 && rng.chance(50) ? CfKind::While : CfKind::If;
            n->body = std::make_unique<CfTree>();  // junk body, filled later
            n->tail = std::move(*link);
        }
        *link = std::move(n);
    }
}

struct Dialect {
    std::vector<Mnemonic> pool;
    bool with_stack_pairs = false;
    bool with_store = false;
};

inline Dialect random_dialect(Rng& rng, bool target) {
    static const std::vector<Mnemonic> safe = {
        Mnemonic::Mov, Mnemonic::Add, Mnemonic::Sub, Mnemonic::And, Mnemonic::Or,
        Mnemonic::Xor, Mnemonic::Inc, Mnemonic::Dec, Mnemonic::Neg, Mnemonic::Imul,
        Mnemonic::Cmp, Mnemonic::Test, Mnemonic::Lea, Mnemonic::Load, Mnemonic::Nop,
    };
    Dialect d;
    std::vector<Mnemonic> shuffled = safe;
    for (size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[static_cast<size_t>(rng.irange(0, static_cast<int>(i) - 1))]);
    int k = rng.irange(4, 7);
    d.pool.assign(shuffled.begin(), shuffled.begin() + k);
    if (target) {
        // Dangerous-mnemonic mass only targets carry; it widens the
        // histogram gap the attack has to close, and only dead-block
        // copies can close it -- safe insertion alone cannot.
        d.with_stack_pairs = true;
        d.with_store = true;
    }
    return d;
}

// Fills conditions and instruction prefixes. `protected_regs` holds the
// counters of enclosing loops; generated code never defines them.
// Registers r0..r6 only: r7 is the lowerer's scratch register.
struct Filler {
    Rng& rng;
    const CorpusSpec& spec;
    Dialect dialect;
    int imin = 1, imax = 4;  // instructions per prefix

    int fresh_reg(RegSet prot) {
        std::vector<int> free;
        for (int r = 0; r <= 6; ++r)
            if (!prot.contains(r)) free.push_back(r);
        if (free.empty()) throw SpecInfeasible("loop nesting exhausted the register file");
        return free[static_cast<size_t>(rng.irange(0, static_cast<int>(free.size()) - 1))];
    }

    Instruction random_instr(RegSet prot) {
        while (true) {
            Mnemonic m = rng.pick(dialect.pool);
            switch (m) {
                case Mnemonic::Mov: case Mnemonic::Add: case Mnemonic::Sub:
                case Mnemonic::And: case Mnemonic::Or: case Mnemonic::Xor:
                case Mnemonic::Imul: {
                    int dst = fresh_reg(prot);
                    Operand src = rng.chance(50)
                                      ? Operand{RegOperand{rng.irange(0, 6)}}
                                      : Operand{ImmOperand{rng.range(-9, 9)}};
                    return make_instruction(m, {RegOperand{dst}, src});
                }
                case Mnemonic::Inc: case Mnemonic::Dec: case Mnemonic::Neg:
                    return make_instruction(m, {RegOperand{fresh_reg(prot)}});
                case Mnemonic::Cmp: case Mnemonic::Test:
                    return make_instruction(
                        m, {RegOperand{rng.irange(0, 6)}, ImmOperand{rng.range(-9, 9)}});
                case Mnemonic::Lea:
                    return make_instruction(
                        m, {RegOperand{fresh_reg(prot)},
                            MemOperand{false, 0, rng.range(16, 255)}});
                case Mnemonic::Load:
                    return make_instruction(
                        m, {RegOperand{fresh_reg(prot)},
                            MemOperand{false, 0, rng.range(16, 255)}});
                case Mnemonic::Nop:
                    return make_instruction(m, {});
                default:
                    continue;
            }
        }
    }

    void fill_prefix(CfTree& t, RegSet prot) {
        int n = rng.irange(imin, imax);
        for (int i = 0; i < n; ++i) t.instructions.push_back(random_instr(prot));
        if (dialect.with_store) {
            int stores = rng.irange(1, 3);
            for (int i = 0; i < stores; ++i)
                t.instructions.push_back(make_instruction(
                    Mnemonic::Store,
                    {MemOperand{false, 0, rng.range(16, 255)}, RegOperand{rng.irange(0, 6)}}));
        }
        if (dialect.with_stack_pairs) {
            int pairs = rng.irange(1, 2);
            for (int i = 0; i < pairs; ++i) {
                t.instructions.push_back(
                    make_instruction(Mnemonic::Push, {RegOperand{rng.irange(0, 6)}}));
                t.instructions.push_back(
                    make_instruction(Mnemonic::Pop, {RegOperand{fresh_reg(prot)}}));
            }
        }
    }

    void fill(CfTree& t, RegSet prot) {
        fill_prefix(t, prot);
        switch (t.kind) {
            case CfKind::End:
            case CfKind::Break:
            case CfKind::Continue:
                return;
            case CfKind::If:
                t.condition = rng.chance(60)
                                  ? Condition::cmp_imm(rng.irange(0, 6),
                                                       static_cast<CmpOp>(rng.irange(0, 5)),
                                                       rng.range(-5, 5))
                                  : Condition::cmp_reg(rng.irange(0, 6),
                                                       static_cast<CmpOp>(rng.irange(0, 5)),
                                                       rng.irange(0, 6));
                fill(*t.body, prot);
                fill(*t.tail, prot);
                return;
            case CfKind::While: {
                // Counted-down loop: init the counter in the prefix,
                // decrement first in the body, never write it elsewhere.
                int counter = fresh_reg(prot);
                t.instructions.push_back(
                    make_instruction(Mnemonic::Mov, {RegOperand{counter},
                                                     ImmOperand{rng.range(1, 6)}}));
                t.condition = Condition::cmp_imm(counter, CmpOp::Gt, 0);
                RegSet inner = prot;
                inner.add(counter);
                fill(*t.body, inner);
                t.body->instructions.insert(
                    t.body->instructions.begin(),
                    make_instruction(Mnemonic::Dec, {RegOperand{counter}}));
                fill(*t.tail, prot);
                return;
            }
        }
    }
};

}  // namespace corpus_detail

inline Corpus generate(const CorpusSpec& spec) {
    using namespace corpus_detail;
    if (spec.n_payloads <= 0 || spec.n_targets <= 0 ||
        spec.payload_nodes_min > spec.payload_nodes_max ||
        spec.target_nodes_min > spec.target_nodes_max || spec.instrs_min > spec.instrs_max ||
        spec.target_instrs_min > spec.target_instrs_max ||
        spec.payload_nodes_min < 0 || spec.instrs_min < 0 || spec.target_instrs_min < 0)
        throw SpecInfeasible("corpus ranges are inconsistent");
    if (spec.embeddable && spec.target_nodes_min < spec.payload_nodes_max)
        throw SpecInfeasible(
            "embeddable corpora need target node minimum >= payload node maximum");

    Rng rng(spec.seed);
    Corpus corpus;
    corpus.spec = spec;

    // Shared payload skeleton (embeddable mode).
    int skel_nodes = rng.irange(spec.payload_nodes_min, spec.payload_nodes_max);
    auto skeleton = random_shape(rng, skel_nodes, 0);

    for (int i = 0; i < spec.n_payloads; ++i) {
        auto shape = spec.embeddable
                         ? skeleton->clone()
                         : random_shape(rng, rng.irange(spec.payload_nodes_min,
                                                        spec.payload_nodes_max), 0);
        Filler f{rng, spec, random_dialect(rng, false), spec.instrs_min, spec.instrs_max};
        f.fill(*shape, RegSet{});
        CorpusFunction fn;
        fn.name = "payload_" + std::to_string(i);
        fn.role = "payload";
        fn.sal_text = emit_sal(*shape, fn.name);
        fn.cf_nodes = count_cf_nodes(*shape);
        fn.instructions = count_instructions(*shape);
        corpus.payloads.push_back(std::move(fn));
    }

    for (int i = 0; i < spec.n_targets; ++i) {
        std::unique_ptr<CfTree> shape;
        if (spec.embeddable) {
            shape = skeleton->clone();
            int total = rng.irange(spec.target_nodes_min, spec.target_nodes_max);
            graft(rng, shape, std::max(0, total - skel_nodes));
        } else {
            shape = random_shape(
                rng, rng.irange(spec.target_nodes_min, spec.target_nodes_max), 0);
        }
        Filler f{rng, spec, random_dialect(rng, true), spec.target_instrs_min,
                 spec.target_instrs_max};
        f.fill(*shape, RegSet{});
        CorpusFunction fn;
        fn.name = "target_" + std::to_string(i);
        fn.role = "target";
        fn.sal_text = emit_sal(*shape, fn.name);
        fn.cf_nodes = count_cf_nodes(*shape);
        fn.instructions = count_instructions(*shape);
        corpus.targets.push_back(std::move(fn));
    }
    return corpus;
}

}  // namespace mimicry

#endif
