#ifndef MIMICRY_METRICS_HPP
#define MIMICRY_METRICS_HPP

// Evaluation metrics: the four-outcome taxonomy, classification rates,
// rank-statistic AUC, and retrieval metrics at K.

#include <mimicry/errors.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mimicry {

enum class Outcome { Mimicry, Evasion, Confusion, Failure };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Mimicry: return "mimicry";
        case Outcome::Evasion: return "evasion";
        case Outcome::Confusion: return "confusion";
        case Outcome::Failure: return "failure";
    }
    return "?";
}

// dec_p = "still classified as the original payload",
// dec_t = "classified as the target".
inline Outcome classify_outcome(bool dec_p, bool dec_t) {
    if (dec_p) return dec_t ? Outcome::Confusion : Outcome::Failure;
    return dec_t ? Outcome::Mimicry : Outcome::Evasion;
}

struct ClassificationMetrics {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> precision;  // absent when tp + fp == 0
    double recall = 0, accuracy = 0;
    double mars = 0, eva = 0, conf = 0, fail = 0;
};

// One (dec_p, dec_t) per pair: dec_p is the positive-pair decision
// (p_adv vs p), dec_t the negative-pair decision (p_adv vs t).
inline ClassificationMetrics classification_metrics(
    const std::vector<std::pair<bool, bool>>& pairs) {
    ClassificationMetrics m;
    if (pairs.empty()) return m;
    std::map<Outcome, int> tally;
    for (auto [dp, dt] : pairs) {
        m.tp += dp;
        m.fn += !dp;
        m.fp += dt;
        m.tn += !dt;
        ++tally[classify_outcome(dp, dt)];
    }
    int total = static_cast<int>(pairs.size());
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
    m.accuracy = static_cast<double>(m.tp + m.tn) / (2.0 * total);
    m.mars = static_cast<double>(tally[Outcome::Mimicry]) / total;
    m.eva = static_cast<double>(tally[Outcome::Evasion]) / total;
    m.conf = static_cast<double>(tally[Outcome::Confusion]) / total;
    m.fail = static_cast<double>(tally[Outcome::Failure]) / total;
    return m;
}

// Mann-Whitney rank statistic: fraction of (pos, neg) pairs with
// pos > neg, ties counted as one half.
inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) throw EmptyClass("auc needs both score classes nonempty");
    double wins = 0;
    for (double p : pos)
        for (double n : neg) {
            if (p > n) wins += 1;
            else if (p == n) wins += 0.5;
        }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

struct RetrievalMetrics {
    double hits_p = 0, hits_t = 0;
    double mars_k = 0, eva_k = 0, conf_k = 0, fail_k = 0;
    double mrr_p = 0, mrr_t = 0;
};

// Ranks are 1-based; absent means "not retrieved at all" and behaves
// like rank > K for every K.
inline RetrievalMetrics retrieval_metrics(
    const std::vector<std::pair<std::optional<int>, std::optional<int>>>& queries, int k) {
    RetrievalMetrics m;
    if (queries.empty()) return m;
    auto in_k = [&](const std::optional<int>& r) { return r.has_value() && *r <= k; };
    auto recip = [&](const std::optional<int>& r) { return in_k(r) ? 1.0 / *r : 0.0; };
    for (const auto& [rp, rt] : queries) {
        bool hp = in_k(rp), ht = in_k(rt);
        m.hits_p += hp;
        m.hits_t += ht;
        m.mars_k += !hp && ht;
        m.eva_k += !hp && !ht;
        m.conf_k += hp && ht;
        m.fail_k += hp && !ht;
        m.mrr_p += recip(rp);
        m.mrr_t += recip(rt);
    }
    double n = static_cast<double>(queries.size());
    m.hits_p /= n; m.hits_t /= n;
    m.mars_k /= n; m.eva_k /= n; m.conf_k /= n; m.fail_k /= n;
    m.mrr_p /= n; m.mrr_t /= n;
    return m;
}

// Number of pairs with both ranks present and ≤ K.
inline int success_at_k(const std::vector<std::pair<std::optional<int>, std::optional<int>>>& pairs,
                        int k) {
    int c = 0;
    for (const auto& [r1, r2] : pairs)
        c += r1.has_value() && r2.has_value() && *r1 <= k && *r2 <= k;
    return c;
}

}  // namespace mimicry

#endif
