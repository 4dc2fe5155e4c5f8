#ifndef MIMICRY_LIVENESS_HPP
#define MIMICRY_LIVENESS_HPP

// Instruction-level backward liveness over the flat program:
//   IN[i]  = (OUT[i] - DEF[i]) | USE[i]
//   OUT[i] = union of IN over successors of i
// `ret` has no successors; its own USE ({r0}) is the boundary condition.

#include <mimicry/asm_model.hpp>

namespace mimicry {

struct LivenessInfo {
    std::vector<RegSet> live_in;
    std::vector<RegSet> live_out;
};

inline LivenessInfo analyze_liveness(const FlatProgram& f) {
    const size_t n = f.instrs.size();
    LivenessInfo li;
    li.live_in.assign(n, RegSet{});
    li.live_out.assign(n, RegSet{});
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t k = n; k-- > 0;) {
            RegSet out{};
            for (int s : f.successors(static_cast<int>(k)))
                if (s < static_cast<int>(n)) out = out | li.live_in[s];
            RegSet in = (out - f.instrs[k].defs) | f.instrs[k].uses;
            if (out.bits != li.live_out[k].bits || in.bits != li.live_in[k].bits) {
                li.live_out[k] = out;
                li.live_in[k] = in;
                changed = true;
            }
        }
    }
    return li;
}

// Whether a candidate instruction may be inserted at a point where
// `live_in` is the live set of the instruction it would precede.
// Dangerous instructions are never insertable into live code; an
// instruction defining nothing is always safe; otherwise every register
// (or flag) it defines must be dead.
inline bool insertion_allowed(const Instruction& cand, RegSet live_in) {
    if (cand.dangerous) return false;
    return !cand.defs.intersects(live_in);
}

}  // namespace mimicry

#endif
