#ifndef MIMICRY_CLASSIFIERS_HPP
#define MIMICRY_CLASSIFIERS_HPP

// Stand-in syntactic similarity models: opcode-histogram cosine, CFG
// structural fingerprint, and mnemonic 3-gram Jaccard.

#include <mimicry/align.hpp>

#include <cmath>
#include <set>

namespace mimicry {

enum class Model { HistCosine, CfgFingerprint, NgramJaccard };

inline const char* model_name(Model m) {
    switch (m) {
        case Model::HistCosine: return "hist";
        case Model::CfgFingerprint: return "cfg";
        case Model::NgramJaccard: return "ngram";
    }
    return "?";
}

inline std::optional<Model> model_from_name(std::string_view s) {
    if (s == "hist") return Model::HistCosine;
    if (s == "cfg") return Model::CfgFingerprint;
    if (s == "ngram") return Model::NgramJaccard;
    return std::nullopt;
}

namespace classifier_detail {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a == b) return 1.0;  // exact self-similarity
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    bool ea = na == 0, eb = nb == 0;
    if (ea && eb) return 1.0;
    if (ea || eb) return 0.0;
    double v = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::min(1.0, std::max(0.0, v));
}

inline std::vector<double> hist_vector(const AsmProgram& p) {
    OpcodeHistogram h = histogram(p);
    std::vector<double> v(27, 0.0);
    for (const auto& [m, c] : h.counts) v[static_cast<size_t>(m)] = c;
    return v;
}

// (block count, edge count, loop-edge count, out-degree histogram 0..4)
inline std::vector<double> cfg_vector(const AsmProgram& p) {
    Cfg cfg = build_cfg(p);
    std::vector<double> v(8, 0.0);
    v[0] = static_cast<double>(cfg.blocks.size());
    v[1] = static_cast<double>(cfg.edges.size());
    std::vector<int> outdeg(cfg.blocks.size(), 0);
    int loop_edges = 0;
    for (auto [u, w] : cfg.edges) {
        ++outdeg[u];
        if (w <= u) ++loop_edges;  // backward edge in layout order
    }
    v[2] = loop_edges;
    for (int d : outdeg) v[3 + std::min(d, 4)] += 1.0;
    return v;
}

inline std::set<std::array<Mnemonic, 3>> ngrams(const AsmProgram& p) {
    std::vector<Mnemonic> seq;
    for (const auto* in : p.instructions()) seq.push_back(in->mnemonic);
    std::set<std::array<Mnemonic, 3>> out;
    for (size_t i = 0; i + 3 <= seq.size(); ++i) out.insert({seq[i], seq[i + 1], seq[i + 2]});
    return out;
}

}  // namespace classifier_detail

struct SimilarityScore {
    double value = 0.0;
    Model model = Model::HistCosine;
};

inline SimilarityScore similarity(const AsmProgram& a, const AsmProgram& b, Model model) {
    using namespace classifier_detail;
    SimilarityScore s;
    s.model = model;
    switch (model) {
        case Model::HistCosine:
            s.value = cosine(hist_vector(a), hist_vector(b));
            break;
        case Model::CfgFingerprint:
            s.value = cosine(cfg_vector(a), cfg_vector(b));
            break;
        case Model::NgramJaccard: {
            auto ga = ngrams(a), gb = ngrams(b);
            if (ga.empty() && gb.empty()) {
                s.value = 1.0;
                break;
            }
            size_t inter = 0;
            for (const auto& g : ga) inter += gb.count(g);
            size_t uni = ga.size() + gb.size() - inter;
            s.value = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
            break;
        }
    }
    return s;
}

inline bool classify(const AsmProgram& a, const AsmProgram& b, Model model, double tau) {
    return similarity(a, b, model).value >= tau;
}

struct RankedEntry {
    int id = 0;
    double score = 0.0;
    int rank = 0;  // 1-based
};

// Full ranking of the repository (descending score, ties by ascending
// id). Callers slice the top K; full ranks feed MRR.
inline std::vector<RankedEntry> retrieve(const AsmProgram& query,
                                         const std::vector<AsmProgram>& repository, Model model) {
    std::vector<RankedEntry> out;
    out.reserve(repository.size());
    for (size_t i = 0; i < repository.size(); ++i)
        out.push_back({static_cast<int>(i), similarity(query, repository[i], model).value, 0});
    std::stable_sort(out.begin(), out.end(), [](const RankedEntry& x, const RankedEntry& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.id < y.id;
    });
    for (size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

// Midpoint of the mean positive-pair score and mean negative-pair score
// on a clean corpus.
inline double calibrate_tau(const std::vector<double>& positive_scores,
                            const std::vector<double>& negative_scores) {
    if (positive_scores.empty() || negative_scores.empty())
        throw EmptyClass("threshold calibration needs both positive and negative scores");
    double mp = 0, mn = 0;
    for (double v : positive_scores) mp += v;
    for (double v : negative_scores) mn += v;
    mp /= static_cast<double>(positive_scores.size());
    mn /= static_cast<double>(negative_scores.size());
    return (mp + mn) / 2.0;
}

}  // namespace mimicry

#endif
