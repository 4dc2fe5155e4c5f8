#ifndef MIMICRY_MATCH_HPP
#define MIMICRY_MATCH_HPP

// Stage 1: control-flow structure alignment. Decides whether the payload
// tree embeds into the target tree and, when it does, builds a merged
// tree whose shape equals the target's and whose live path executes
// exactly the payload. Extra target structure is grafted back as dummy
// nodes behind opaque predicates; only the structure is copied here --
// instruction-level imitation is Stage 2's job. Dummies that hide a
// whole target subtree behind an opaque-false guard are preferred: they
// maximize the dead region available to Stage 2 and need no run-once
// scaffolding.

#include <mimicry/sal.hpp>

namespace mimicry {

// Recursive structural embedding test. If/While pairs must match kind for
// kind (with the option of skipping a target node by descending into its
// body or tail); equal leaf kinds match; everything else fails.
inline bool match_tree(const CfTree& p, const CfTree& t) {
    bool t_branch = t.kind == CfKind::If || t.kind == CfKind::While;
    if (p.kind == t.kind && t_branch) {
        if (match_tree(*p.body, *t.body) && match_tree(*p.tail, *t.tail)) return true;
        return match_tree(p, *t.body) || match_tree(p, *t.tail);
    }
    // A target node can be skipped unless p sits at a Break/Continue
    // leaf -- those must meet their counterpart directly.
    bool p_can_skip =
        p.kind == CfKind::If || p.kind == CfKind::While || p.kind == CfKind::End;
    if (t_branch && p_can_skip)
        return match_tree(p, *t.body) || match_tree(p, *t.tail);
    if (!t_branch) return p.kind == t.kind;
    return false;
}

enum class DummySlot { BodyCarriesLive, TailCarriesLive };

// Condition guarding a dummy node so the live path goes where the payload
// lives. A dummy While whose body carries the live path becomes a
// run-once loop: OpaqueTrue on a While is lowered with a reserved counter
// cell so the body executes exactly once.
inline Condition opaque_condition(CfKind kind, DummySlot slot) {
    if (slot == DummySlot::TailCarriesLive) return Condition::opaque_false();
    (void)kind;
    return Condition::opaque_true();
}

namespace match_detail {

// A subtree's tail chain is the sequence of nodes reached by following
// tail links from its root. Live control that falls into a dummy region
// walks exactly this chain (every body is skipped by an opaque-false
// guard), so it must end in End -- a Break/Continue leaf would hijack
// the live path.
inline bool tail_chain_dead(const CfTree& t) {
    const CfTree* cur = &t;
    while (true) {
        switch (cur->kind) {
            case CfKind::End: return true;
            case CfKind::Break:
            case CfKind::Continue: return false;
            case CfKind::If:
            case CfKind::While: cur = cur->tail.get(); break;
        }
    }
}

// Structure-only dummy copy of a target subtree: kinds and conditions
// survive, instructions do not. Stage 2 later overwrites the lowered
// dead blocks with the target's instructions verbatim.
inline std::unique_ptr<CfTree> dead_shape(const CfTree& t) {
    auto n = std::make_unique<CfTree>();
    n->kind = t.kind;
    n->condition = t.condition;
    n->origin = NodeOrigin::DummyFromTarget;
    if (t.body) n->body = dead_shape(*t.body);
    if (t.tail) n->tail = dead_shape(*t.tail);
    return n;
}

// Converts a target subtree into a dummy region that live control falls
// *through*: every If/While on the tail chain keeps its kind but gets an
// opaque-false condition, so each body is skipped and the chain ends at
// its End. Fails (nullptr) when the tail chain hits Break/Continue.
inline std::unique_ptr<CfTree> convert_dead_tail(const CfTree& t) {
    if (!tail_chain_dead(t)) return nullptr;
    auto c = dead_shape(t);
    for (CfTree* cur = c.get(); cur->kind == CfKind::If || cur->kind == CfKind::While;
         cur = cur->tail.get())
        cur->condition = Condition::opaque_false();
    return c;
}

inline std::unique_ptr<CfTree> merge(const CfTree& p, const CfTree& t);

// Dummy node of t's kind whose body carries the live path: condition is
// opaque-true (run-once when t is a While), body is merge(p, t.body),
// and t.tail is converted into a fall-through dead region.
inline std::unique_ptr<CfTree> try_body_insert(const CfTree& p, const CfTree& t) {
    auto dead_tail = convert_dead_tail(*t.tail);
    if (!dead_tail) return nullptr;
    auto inner = merge(p, *t.body);
    if (!inner) return nullptr;
    auto n = std::make_unique<CfTree>();
    n->kind = t.kind;
    n->condition = opaque_condition(t.kind, DummySlot::BodyCarriesLive);
    n->origin = NodeOrigin::DummyFromTarget;
    n->body = std::move(inner);
    n->tail = std::move(dead_tail);
    return n;
}

// Dummy node of t's kind whose tail carries the live path: condition is
// opaque-false, body is a dead structural copy of t.body, tail is
// merge(p, t.tail).
inline std::unique_ptr<CfTree> try_tail_insert(const CfTree& p, const CfTree& t) {
    auto inner = merge(p, *t.tail);
    if (!inner) return nullptr;
    auto n = std::make_unique<CfTree>();
    n->kind = t.kind;
    n->condition = opaque_condition(t.kind, DummySlot::TailCarriesLive);
    n->origin = NodeOrigin::DummyFromTarget;
    n->body = dead_shape(*t.body);
    n->tail = std::move(inner);
    return n;
}

inline std::unique_ptr<CfTree> merge(const CfTree& p, const CfTree& t) {
    bool t_branch = t.kind == CfKind::If || t.kind == CfKind::While;
    if (p.kind == t.kind && t_branch) {
        if (auto body = merge(*p.body, *t.body)) {
            if (auto tail = merge(*p.tail, *t.tail)) {
                auto n = std::make_unique<CfTree>();
                n->kind = p.kind;
                n->condition = *p.condition;
                n->origin = NodeOrigin::Matched;
                n->instructions = p.instructions;
                n->body = std::move(body);
                n->tail = std::move(tail);
                return n;
            }
        }
        if (auto r = try_tail_insert(p, t)) return r;
        return try_body_insert(p, t);
    }
    bool p_can_skip =
        p.kind == CfKind::If || p.kind == CfKind::While || p.kind == CfKind::End;
    if (t_branch && p_can_skip) {
        if (auto r = try_tail_insert(p, t)) return r;
        return try_body_insert(p, t);
    }
    if (!t_branch && p.kind == t.kind) {
        auto n = p.clone();
        n->origin = NodeOrigin::PayloadOriginal;
        return n;
    }
    return nullptr;
}

}  // namespace match_detail

struct AlignmentResult {
    std::unique_ptr<CfTree> merged;
    int dummy_nodes = 0;    // If/While dummies introduced
    int matched_nodes = 0;  // payload If/While nodes carried through
};

inline void count_origins(const CfTree& t, AlignmentResult& r) {
    if (t.kind == CfKind::If || t.kind == CfKind::While) {
        if (t.origin == NodeOrigin::DummyFromTarget)
            ++r.dummy_nodes;
        else
            ++r.matched_nodes;
    }
    if (t.body) count_origins(*t.body, r);
    if (t.tail) count_origins(*t.tail, r);
}

// Builds the merged tree, or throws NoAlignment. The merge is slightly
// stricter than the boolean matcher: an embedding is rejected when it
// would route live fall-through across a copied Break/Continue leaf.
inline AlignmentResult align_structure(const CfTree& payload, const CfTree& target) {
    auto merged = match_detail::merge(payload, target);
    if (!merged)
        throw NoAlignment(match_tree(payload, target)
                              ? "shapes embed, but every embedding routes the live path "
                                "across a copied break/continue"
                              : "payload control-flow shape does not embed in target");
    AlignmentResult r;
    r.merged = std::move(merged);
    count_origins(*r.merged, r);
    return r;
}

}  // namespace mimicry

#endif
