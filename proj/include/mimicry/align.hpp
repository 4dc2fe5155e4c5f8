#ifndef MIMICRY_ALIGN_HPP
#define MIMICRY_ALIGN_HPP

// Stage 2: opcode-distribution alignment. Dead blocks are overwritten
// with verbatim copies of their mapped target blocks; live blocks absorb
// synthesized safe instructions until per-block deficits stop shrinking
// or the budget runs out.

#include <mimicry/liveness.hpp>
#include <mimicry/lowering.hpp>

#include <algorithm>

namespace mimicry {

enum class HistScope { WholeFunction, PerBlock };

struct OpcodeHistogram {
    std::map<Mnemonic, int> counts;
    HistScope scope = HistScope::WholeFunction;
    int block = -1;

    int at(Mnemonic m) const {
        auto it = counts.find(m);
        return it == counts.end() ? 0 : it->second;
    }
};

inline OpcodeHistogram histogram(const AsmProgram& p) {
    OpcodeHistogram h;
    for (const auto* in : p.instructions()) ++h.counts[in->mnemonic];
    return h;
}

inline OpcodeHistogram histogram_block(const FlatProgram& f, const BasicBlock& b) {
    OpcodeHistogram h;
    h.scope = HistScope::PerBlock;
    h.block = b.id;
    for (int i = b.first; i <= b.last; ++i) ++h.counts[f.instrs[i].mnemonic];
    return h;
}

inline int l1_distance(const OpcodeHistogram& a, const OpcodeHistogram& b) {
    if (a.scope != b.scope)
        throw ScopeMismatch("histogram scopes differ (whole-function vs per-block)");
    int d = 0;
    for (const auto& [m, c] : a.counts) d += std::abs(c - b.at(m));
    for (const auto& [m, c] : b.counts)
        if (!a.counts.count(m)) d += std::abs(c);
    return d;
}

struct InsertionEntry {
    int block = -1;
    int index = -1;  // global instruction index at commit time
    Instruction instr;
    std::string reason;  // "deficit(<mn>, block <b>)" or "dead-copy(block <b>)"
};

struct InsertionLog {
    std::vector<InsertionEntry> entries;
    std::vector<std::string> skipped_dangerous;  // dangerous deficits not insertable live
    bool budget_exceeded = false;
    int l1_before = 0;  // whole-function
    int l1_after = 0;
    int per_block_l1_before = 0;  // summed over mapped block pairs
    int per_block_l1_after = 0;
};

struct AlignOptions {
    int budget = -1;  // < 0: 4x target instruction count
    bool recompute_liveness = true;  // false: positions from the initial analysis only
    bool whole_function = false;     // deficit against whole-function histogram only
};

namespace align_detail {

// Mutable block-structured program view.
struct BlockProgram {
    std::vector<std::vector<std::string>> labels;  // labels heading each block
    std::vector<std::vector<Instruction>> instrs;
    std::vector<bool> dead;
    std::vector<std::string> trailing_labels;
    std::string entry_label;

    static BlockProgram from(const AsmProgram& p) {
        FlatProgram f = FlatProgram::from(p);
        Cfg cfg = build_cfg(p);
        BlockProgram bp;
        bp.entry_label = p.entry_label;
        bp.trailing_labels = f.trailing_labels;
        for (const auto& b : cfg.blocks) {
            bp.labels.push_back(f.labels_at[b.first]);
            bp.instrs.emplace_back(f.instrs.begin() + b.first, f.instrs.begin() + b.last + 1);
            bp.dead.push_back(b.dead);
        }
        return bp;
    }

    AsmProgram to_program() const {
        AsmProgram p;
        p.entry_label = entry_label;
        for (size_t b = 0; b < instrs.size(); ++b) {
            for (const auto& l : labels[b]) p.lines.emplace_back(Label{l});
            for (const auto& in : instrs[b]) p.lines.emplace_back(in);
        }
        for (const auto& l : trailing_labels) p.lines.emplace_back(Label{l});
        return p;
    }

    int global_index(int block, int offset) const {
        int g = 0;
        for (int b = 0; b < block; ++b) g += static_cast<int>(instrs[b].size());
        return g + offset;
    }

    // True when the block's last instruction falls through into the next
    // block, making "end of block" a real insertion point of this block.
    bool falls_through(int block) const {
        if (instrs[block].empty()) return true;
        return !ends_block(instrs[block].back().mnemonic);
    }
};

// Live set for the position before each instruction of each block, plus
// one trailing entry for the end-of-block position.
inline std::vector<std::vector<RegSet>> position_live_sets(const BlockProgram& p) {
    FlatProgram f = FlatProgram::from(p.to_program());
    LivenessInfo li = analyze_liveness(f);
    std::vector<std::vector<RegSet>> out(p.instrs.size());
    int g = 0;
    const int n = static_cast<int>(f.instrs.size());
    for (size_t b = 0; b < p.instrs.size(); ++b) {
        out[b].resize(p.instrs[b].size() + 1);
        for (size_t off = 0; off < p.instrs[b].size(); ++off) out[b][off] = li.live_in[g + off];
        int after = g + static_cast<int>(p.instrs[b].size());
        out[b].back() = after < n ? li.live_in[after] : RegSet{};
        g = after;
    }
    return out;
}

// Builds a safe-to-insert instance of the template's mnemonic with its
// destination redirected to `dest`. Returns nullopt for shapes that
// cannot be made safe outside dead blocks.
inline std::optional<Instruction> synthesize(const Instruction& tmpl, int dest) {
    switch (tmpl.mnemonic) {
        case Mnemonic::Mov: case Mnemonic::Add: case Mnemonic::Sub:
        case Mnemonic::And: case Mnemonic::Or: case Mnemonic::Xor:
        case Mnemonic::Imul: {
            Operand src = tmpl.operands[1];
            // A register read is harmless; keep it self-referential so the
            // candidate depends only on the dead destination.
            if (std::holds_alternative<RegOperand>(src)) src = RegOperand{dest};
            return make_instruction(tmpl.mnemonic, {RegOperand{dest}, src}, InstrOrigin::Inserted);
        }
        case Mnemonic::Inc: case Mnemonic::Dec: case Mnemonic::Neg:
            return make_instruction(tmpl.mnemonic, {RegOperand{dest}}, InstrOrigin::Inserted);
        case Mnemonic::Cmp: case Mnemonic::Test: {
            // Only FLAGS is written; operand reads are harmless.
            std::vector<Operand> ops = tmpl.operands;
            for (auto& o : ops)
                if (std::holds_alternative<MemOperand>(o)) return std::nullopt;
            return make_instruction(tmpl.mnemonic, std::move(ops), InstrOrigin::Inserted);
        }
        case Mnemonic::Lea:
            // No dereference happens; the template's address shape is kept.
            return make_instruction(Mnemonic::Lea, {RegOperand{dest}, tmpl.operands[1]},
                                    InstrOrigin::Inserted);
        case Mnemonic::Load:
            // Force the always-valid opaque cell so the read cannot fault.
            return make_instruction(Mnemonic::Load, {RegOperand{dest}, MemOperand{false, 0, 0}},
                                    InstrOrigin::Inserted);
        case Mnemonic::Nop:
            return make_instruction(Mnemonic::Nop, {}, InstrOrigin::Inserted);
        default:
            return std::nullopt;  // store/push/pop/jumps/call/ret: dangerous
    }
}

inline bool mnemonic_has_dest(Mnemonic m) {
    switch (m) {
        case Mnemonic::Cmp: case Mnemonic::Test: case Mnemonic::Nop: return false;
        default: return true;
    }
}

}  // namespace align_detail

inline std::pair<AsmProgram, InsertionLog> align_instructions(
    const AsmProgram& payload, const AsmProgram& target,
    const std::vector<std::pair<int, int>>& block_map, AlignOptions opt = {}) {
    using align_detail::BlockProgram;

    BlockProgram p = BlockProgram::from(payload);
    BlockProgram t = BlockProgram::from(target);
    InsertionLog log;

    size_t target_count = 0;
    for (const auto& blk : t.instrs) target_count += blk.size();
    int budget = opt.budget >= 0 ? opt.budget : static_cast<int>(4 * target_count);

    auto whole_l1 = [&]() {
        return l1_distance(histogram(p.to_program()), histogram(t.to_program()));
    };
    auto per_block_l1 = [&]() {
        if (opt.whole_function) return whole_l1();
        int total = 0;
        for (auto [pb, tb] : block_map) {
            std::map<Mnemonic, int> diff;
            for (const auto& in : p.instrs[pb]) ++diff[in.mnemonic];
            for (const auto& in : t.instrs[tb]) --diff[in.mnemonic];
            for (const auto& [m, d] : diff) total += std::abs(d);
        }
        return total;
    };

    log.l1_before = whole_l1();
    log.per_block_l1_before = per_block_l1();

    // (1) Verbatim copies into dead blocks. Labels are stable across the
    // two programs (same lowering schema over same-shape trees), so the
    // copied jumps resolve to the structurally corresponding positions.
    if (!opt.whole_function) {
        for (auto [pb, tb] : block_map) {
            if (!p.dead[pb]) continue;
            std::vector<Instruction> copy = t.instrs[tb];
            for (auto& in : copy) {
                in.origin = InstrOrigin::DummyCopy;
                in.dead_region = true;
            }
            p.instrs[pb] = std::move(copy);
            InsertionEntry e;
            e.block = pb;
            e.index = p.global_index(pb, 0);
            e.reason = "dead-copy(block " + std::to_string(pb) + ")";
            if (!p.instrs[pb].empty()) e.instr = p.instrs[pb].front();
            log.entries.push_back(std::move(e));
        }
    }

    // (2)+(3) Deficit loop over live blocks. Runs per-block first, then a
    // whole-function top-up over the same live blocks: the residual global
    // deficit keeps shrinking until no safe insertion reduces it further.
    // In whole-function mode only the global phase runs.
    std::vector<std::pair<int, int>> live_pairs;
    if (opt.whole_function) {
        for (size_t b = 0; b < p.instrs.size(); ++b)
            live_pairs.push_back({static_cast<int>(b), -1});
    } else {
        for (auto [pb, tb] : block_map)
            if (!p.dead[pb]) live_pairs.push_back({pb, tb});
    }

    auto live_at = align_detail::position_live_sets(p);
    std::vector<std::string> skipped;
    int committed = 0;

    auto run_phase = [&](bool global) {
        bool progress = true;
        while (progress && committed < budget) {
            progress = false;
            for (auto [pb, tb] : live_pairs) {
                if (committed >= budget) break;
                std::map<Mnemonic, int> deficit;
                std::map<Mnemonic, const Instruction*> tmpl;
                if (global) {
                    for (const auto& tblk : t.instrs)
                        for (const auto& in : tblk) {
                            ++deficit[in.mnemonic];
                            if (!tmpl.count(in.mnemonic)) tmpl[in.mnemonic] = &in;
                        }
                    for (const auto& pblk : p.instrs)
                        for (const auto& in : pblk) --deficit[in.mnemonic];
                } else {
                    for (const auto& in : t.instrs[tb]) {
                        ++deficit[in.mnemonic];
                        if (!tmpl.count(in.mnemonic)) tmpl[in.mnemonic] = &in;
                    }
                    for (const auto& in : p.instrs[pb]) --deficit[in.mnemonic];
                }
                for (const auto& [m, d] : deficit) {
                    if (committed >= budget) break;
                    if (d <= 0) continue;
                    if (is_dangerous(m)) {
                        skipped.push_back(mnemonic_name(m));
                        continue;
                    }
                    const Instruction* templ = tmpl[m];
                    bool done = false;
                    int len = static_cast<int>(p.instrs[pb].size());
                    int max_off = p.falls_through(pb) ? len : std::max(0, len - 1);
                    for (int off = 0; off <= max_off && !done; ++off) {
                        RegSet live = live_at[pb][off];
                        auto try_commit = [&](const Instruction& cand) {
                            if (!insertion_allowed(cand, live)) return;
                            InsertionEntry e;
                            e.block = pb;
                            e.index = p.global_index(pb, off);
                            e.instr = cand;
                            e.reason = "deficit(" + std::string(mnemonic_name(m)) + ", " +
                                       (global ? "whole function" : "block " + std::to_string(pb)) +
                                       ")";
                            log.entries.push_back(std::move(e));
                            p.instrs[pb].insert(p.instrs[pb].begin() + off, cand);
                            ++committed;
                            done = true;
                            progress = true;
                            if (opt.recompute_liveness) {
                                live_at = align_detail::position_live_sets(p);
                            } else {
                                // Single-pass mode keeps the initial sets; the
                                // new position inherits its successor's set.
                                live_at[pb].insert(live_at[pb].begin() + off, live_at[pb][off]);
                            }
                        };
                        if (align_detail::mnemonic_has_dest(m)) {
                            for (int r = 0; r < kNumRegs && !done; ++r) {
                                auto cand = align_detail::synthesize(*templ, r);
                                if (cand) try_commit(*cand);
                            }
                        } else {
                            auto cand = align_detail::synthesize(*templ, 0);
                            if (cand) try_commit(*cand);
                        }
                    }
                }
            }
        }
    };
    if (!opt.whole_function) run_phase(false);
    run_phase(true);
    log.budget_exceeded = committed >= budget && budget > 0;

    std::sort(skipped.begin(), skipped.end());
    skipped.erase(std::unique(skipped.begin(), skipped.end()), skipped.end());
    log.skipped_dangerous = std::move(skipped);
    log.l1_after = whole_l1();
    log.per_block_l1_after = per_block_l1();
    return {p.to_program(), log};
}

}  // namespace mimicry

#endif
