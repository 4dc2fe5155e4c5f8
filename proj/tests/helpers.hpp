#ifndef MIMICRY_TESTS_HELPERS_HPP
#define MIMICRY_TESTS_HELPERS_HPP

// Shared test utilities: tree builders, the canonical worked-example
// pair, an exhaustive shape enumerator with an independent embedding
// oracle, and a dynamic-liveness trace checker.

#include <mimicry/pipeline.hpp>

#include <string>
#include <unordered_set>
#include <vector>

namespace mimicry::testing {

// --- tree builders ---------------------------------------------------------

inline Instruction ins(const std::string& text) { return parse_asm_line(text, false); }

inline std::unique_ptr<CfTree> leaf(CfKind k, std::vector<std::string> instrs = {}) {
    auto n = std::make_unique<CfTree>();
    n->kind = k;
    for (const auto& s : instrs) n->instructions.push_back(ins(s));
    return n;
}

inline std::unique_ptr<CfTree> branch(CfKind k, Condition c, std::unique_ptr<CfTree> body,
                                      std::unique_ptr<CfTree> tail,
                                      std::vector<std::string> instrs = {}) {
    auto n = std::make_unique<CfTree>();
    n->kind = k;
    n->condition = c;
    n->body = std::move(body);
    n->tail = std::move(tail);
    for (const auto& s : instrs) n->instructions.push_back(ins(s));
    return n;
}

// The grammar is line-based (`{` ends a header line, `}` stands alone);
// tests write one-liners, so expand braces onto their own lines first.
inline CfTree parse_sal_inline(std::string_view text) {
    std::string expanded;
    for (char c : text) {
        if (c == '{') expanded += "{\n";
        else if (c == '}') expanded += "\n}\n";
        else expanded += c;
    }
    return parse_sal(expanded);
}

// --- the worked-example pair ------------------------------------------------
// Payload: two nested counted loops. Target: a leading loop, then a loop
// whose body wraps the payload-shaped inner loop in an if. Merging embeds
// the payload with one opaque-false dummy (the leading loop) and one
// opaque-true dummy (the wrapping if).

inline const char* kExamplePayloadSal = R"(func payload {
  mov r0, 0
  mov r1, 3
  while (r1 > 0) {
    dec r1
    mov r2, 2
    while (r2 > 0) {
      dec r2
      add r0, 1
    }
  }
  ret
}
)";

inline const char* kExampleTargetSal = R"(func target {
  mov r3, 5
  store [32], r3
  while (r3 > 0) {
    dec r3
    add r4, 2
    push r4
    pop r5
  }
  mov r6, 4
  while (r6 > 0) {
    dec r6
    if (r4 < 3) {
      mov r2, 2
      while (r2 > 0) {
        dec r2
        xor r5, r4
        store [40], r5
      }
      add r4, 1
    }
    sub r5, 1
  }
  ret
}
)";

// --- exhaustive shape enumeration -------------------------------------------
// All control-flow shapes with exactly n If/While/Break/Continue nodes.
// Break/Continue appear only under a While. Branch conditions are a fixed
// placeholder; the matcher ignores them.

inline void enumerate_shapes(int n, bool in_loop, std::vector<std::unique_ptr<CfTree>>& out) {
    if (n == 0) {
        out.push_back(leaf(CfKind::End));
        return;
    }
    if (n == 1 && in_loop) {
        out.push_back(leaf(CfKind::Break));
        out.push_back(leaf(CfKind::Continue));
    }
    for (CfKind k : {CfKind::If, CfKind::While}) {
        for (int bn = 0; bn <= n - 1; ++bn) {
            std::vector<std::unique_ptr<CfTree>> bodies, tails;
            enumerate_shapes(bn, in_loop || k == CfKind::While, bodies);
            enumerate_shapes(n - 1 - bn, in_loop, tails);
            for (const auto& b : bodies)
                for (const auto& t : tails)
                    out.push_back(branch(k, Condition::cmp_imm(0, CmpOp::Eq, 0), b->clone(),
                                         t->clone()));
        }
    }
}

inline std::vector<std::unique_ptr<CfTree>> all_shapes_up_to(int max_nodes) {
    std::vector<std::unique_ptr<CfTree>> out;
    for (int n = 0; n <= max_nodes; ++n) enumerate_shapes(n, false, out);
    return out;
}

// --- independent embedding oracle -------------------------------------------
// A reduction of t deletes branch nodes one at a time, replacing a deleted
// node by either its body or its tail; a delete is admissible only when the
// surviving subtree's root is not a Break/Continue leaf (a jump leaf cannot
// stand in for the deleted node's entry). p embeds in t iff p's shape is
// among t's reductions. Computed by full set enumeration -- independent of
// the recursive matcher's control flow.

inline std::string canon_shape(const CfTree& t) {
    switch (t.kind) {
        case CfKind::End: return "E";
        case CfKind::Break: return "B";
        case CfKind::Continue: return "C";
        case CfKind::If:
            return "I(" + canon_shape(*t.body) + "," + canon_shape(*t.tail) + ")";
        case CfKind::While:
            return "W(" + canon_shape(*t.body) + "," + canon_shape(*t.tail) + ")";
    }
    return "?";
}

inline std::unordered_set<std::string> reductions(const CfTree& t) {
    std::unordered_set<std::string> out;
    if (t.is_leaf()) {
        out.insert(canon_shape(t));
        return out;
    }
    auto rb = reductions(*t.body);
    auto rt = reductions(*t.tail);
    const char* k = t.kind == CfKind::If ? "I" : "W";
    for (const auto& b : rb)
        for (const auto& tl : rt) out.insert(k + ("(" + b + "," + tl + ")"));
    for (const auto* side : {&rb, &rt})
        for (const auto& x : *side)
            if (x[0] != 'B' && x[0] != 'C') out.insert(x);
    return out;
}

// --- dynamic liveness cross-check -------------------------------------------

struct TraceResult {
    std::vector<int> pcs;  // executed instruction indices in order
    bool finished = false;
};

inline TraceResult record_trace(const AsmProgram& prog, MachineState init,
                                uint64_t limit = 50000) {
    FlatProgram f = FlatProgram::from(prog);
    vm_detail::Machine m(std::move(init), limit);
    TraceResult tr;
    int pc = 0;
    const int n = static_cast<int>(f.instrs.size());
    while (pc < n && m.tick()) {
        std::optional<std::string> jump_to;
        bool returned = false;
        tr.pcs.push_back(pc);
        if (!m.exec(f.instrs[pc], jump_to, returned)) return tr;
        if (returned) {
            tr.finished = true;
            return tr;
        }
        pc = jump_to ? f.resolve(*jump_to) : pc + 1;
    }
    return tr;
}

// Number of trace points where the dynamic live-after set (registers read
// later on this trace before being written) is not contained in the static
// live-out set. Zero for a sound analysis.
inline int liveness_violations(const AsmProgram& prog, const TraceResult& tr) {
    FlatProgram f = FlatProgram::from(prog);
    LivenessInfo li = analyze_liveness(f);
    RegSet dyn{};
    int bad = 0;
    for (size_t k = tr.pcs.size(); k-- > 0;) {
        const Instruction& in = f.instrs[static_cast<size_t>(tr.pcs[k])];
        if ((dyn.bits & static_cast<uint16_t>(~li.live_out[static_cast<size_t>(tr.pcs[k])].bits)) != 0)
            ++bad;
        dyn = (dyn - in.defs) | in.uses;
    }
    return bad;
}

// Re-applies the dataflow equations once; true when nothing changes.
inline bool liveness_is_fixpoint(const FlatProgram& f, const LivenessInfo& li) {
    const int n = static_cast<int>(f.instrs.size());
    for (int i = 0; i < n; ++i) {
        RegSet out{};
        for (int s : f.successors(i))
            if (s < n) out |= li.live_in[static_cast<size_t>(s)];
        if (!(out == li.live_out[static_cast<size_t>(i)])) return false;
        RegSet in = (out - f.instrs[static_cast<size_t>(i)].defs) | f.instrs[static_cast<size_t>(i)].uses;
        if (!(in == li.live_in[static_cast<size_t>(i)])) return false;
    }
    return true;
}

// --- corpus shorthand -------------------------------------------------------

struct ParsedPair {
    CfTree payload;
    CfTree target;
};

inline std::vector<CfTree> parse_functions(const std::vector<CorpusFunction>& fns) {
    std::vector<CfTree> out;
    for (const auto& f : fns) out.push_back(parse_sal(f.sal_text));
    return out;
}

}  // namespace mimicry::testing

#endif
