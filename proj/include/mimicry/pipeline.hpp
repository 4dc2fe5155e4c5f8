#ifndef MIMICRY_PIPELINE_HPP
#define MIMICRY_PIPELINE_HPP

// End-to-end pipeline: Stage 1 + Stage 2 + equivalence oracle for one
// pair, and the corpus evaluator (classification + retrieval metrics,
// ablation arms, report JSON).

#include <mimicry/classifiers.hpp>
#include <mimicry/corpus.hpp>
#include <mimicry/metrics.hpp>

#include <json.hpp>

#include <atomic>
#include <thread>

namespace mimicry {

using json = nlohmann::ordered_json;

inline constexpr const char* kReportVersion = "1";

struct TransformOptions {
    bool cf_only = false;
    bool asm_only = false;
    int trials = 100;
    uint64_t seed = 1;
    int budget = -1;
    bool paper_faithful_positions = false;
};

struct TransformOutcome {
    std::unique_ptr<CfTree> merged;  // absent in asm-only mode
    AsmProgram payload_asm;          // lowered original payload
    AsmProgram target_asm;
    AsmProgram output_asm;
    InsertionLog log;
    EquivalenceVerdict verdict;
    int dummy_nodes = 0;
    int matched_nodes = 0;
    bool ran_cf = false;
    bool ran_asm = false;
};

inline TransformOutcome transform_pair(const CfTree& payload, const CfTree& target,
                                       const TransformOptions& opt = {}) {
    TransformOutcome out;
    out.payload_asm = lower(payload);
    out.target_asm = lower(target);

    AsmProgram staged = out.payload_asm;
    if (!opt.asm_only) {
        AlignmentResult ar = align_structure(payload, target);
        out.merged = std::move(ar.merged);
        out.dummy_nodes = ar.dummy_nodes;
        out.matched_nodes = ar.matched_nodes;
        staged = lower(*out.merged);
        out.ran_cf = true;
    }
    if (!opt.cf_only) {
        AlignOptions ao;
        ao.budget = opt.budget;
        ao.recompute_liveness = !opt.paper_faithful_positions;
        std::vector<std::pair<int, int>> block_map;
        if (opt.asm_only) {
            ao.whole_function = true;
        } else {
            block_map = derive_block_map(build_cfg(staged), build_cfg(out.target_asm));
        }
        auto [aligned, log] = align_instructions(staged, out.target_asm, block_map, ao);
        out.output_asm = std::move(aligned);
        out.log = std::move(log);
        out.ran_asm = true;
    } else {
        out.output_asm = staged;
        OpcodeHistogram ph = histogram(out.output_asm), th = histogram(out.target_asm);
        out.log.l1_before = l1_distance(histogram(out.payload_asm), th);
        out.log.l1_after = l1_distance(ph, th);
    }
    out.verdict = check_equivalence(out.payload_asm, out.output_asm, opt.trials, opt.seed);
    return out;
}

inline json report_json(const std::string& pair_id, const TransformOutcome& t,
                        const TransformOptions& opt, double elapsed_ms = 0.0) {
    json j;
    j["version"] = kReportVersion;
    j["pair"] = pair_id;
    j["stages"] = {{"cf", t.ran_cf}, {"asm", t.ran_asm}};
    json hist;
    auto hist_obj = [](const OpcodeHistogram& h) {
        json o = json::object();
        for (const auto& [m, c] : h.counts) o[mnemonic_name(m)] = c;
        return o;
    };
    hist["payload"] = hist_obj(histogram(t.payload_asm));
    hist["target"] = hist_obj(histogram(t.target_asm));
    hist["output"] = hist_obj(histogram(t.output_asm));
    hist["l1_whole_before"] = t.log.l1_before;
    hist["l1_whole_after"] = t.log.l1_after;
    hist["l1_per_block_before"] = t.log.per_block_l1_before;
    hist["l1_per_block_after"] = t.log.per_block_l1_after;
    j["histograms"] = std::move(hist);
    json ins;
    ins["count"] = t.log.entries.size();
    ins["budget_exceeded"] = t.log.budget_exceeded;
    ins["skipped_dangerous"] = t.log.skipped_dangerous;
    json entries = json::array();
    for (const auto& e : t.log.entries)
        entries.push_back({{"block", e.block},
                           {"index", e.index},
                           {"instruction", to_string(e.instr)},
                           {"reason", e.reason}});
    ins["entries"] = std::move(entries);
    ins["dummy_nodes"] = t.dummy_nodes;
    ins["matched_nodes"] = t.matched_nodes;
    j["insertions"] = std::move(ins);
    j["equivalence"] = {{"equivalent", t.verdict.equivalent},
                        {"trials", opt.trials},
                        {"seed", opt.seed},
                        {"detail", t.verdict.detail}};
    j["timings"] = {{"elapsed_ms", elapsed_ms}};
    return j;
}

// ---------------------------------------------------------------------------
// Corpus evaluation.

struct EvaluateOptions {
    Model model = Model::HistCosine;
    std::optional<double> tau;  // absent: midpoint calibration on the clean corpus
    std::vector<int> ks = {1, 10};
    uint64_t seed = 1;
    int trials = 25;
    int budget = -1;
    bool ablate = false;
    int workers = 1;
    bool paper_faithful_positions = false;
};

struct PairEval {
    int payload = 0, target = 0;
    bool skipped = false;
    std::string skip_reason;
    bool dec_p = false, dec_t = false;
    double score_p = 0, score_t = 0;
    std::optional<int> rank_p, rank_t;
};

struct ArmResult {
    std::string name;
    std::vector<PairEval> pairs;
    ClassificationMetrics cls;
    double auc_value = 0.5;
    std::map<int, RetrievalMetrics> retrieval;
    std::map<int, double> success_k;  // fraction with both ranks in K
    int equivalence_failures = 0;
};

namespace pipeline_detail {

struct ParsedCorpus {
    std::vector<CfTree> payloads, targets;
    std::vector<AsmProgram> payload_asm, target_asm;
    std::vector<AsmProgram> repository;  // payloads then targets
};

inline ParsedCorpus parse_corpus(const Corpus& c) {
    ParsedCorpus pc;
    for (const auto& f : c.payloads) {
        pc.payloads.push_back(std::move(parse_sal(f.sal_text)));
        pc.payload_asm.push_back(lower(pc.payloads.back()));
    }
    for (const auto& f : c.targets) {
        pc.targets.push_back(std::move(parse_sal(f.sal_text)));
        pc.target_asm.push_back(lower(pc.targets.back()));
    }
    pc.repository = pc.payload_asm;
    for (const auto& t : pc.target_asm) pc.repository.push_back(t);
    return pc;
}

inline ArmResult run_arm(const std::string& name, const ParsedCorpus& pc,
                         const EvaluateOptions& opt, double tau, bool do_cf, bool do_asm) {
    ArmResult arm;
    arm.name = name;
    const int np = static_cast<int>(pc.payloads.size());
    const int nt = static_cast<int>(pc.targets.size());
    arm.pairs.assign(static_cast<size_t>(np * nt), PairEval{});

    std::atomic<int> next{0};
    std::atomic<int> eq_failures{0};
    auto worker = [&]() {
        while (true) {
            int idx = next.fetch_add(1);
            if (idx >= np * nt) break;
            int pi = idx / nt, ti = idx % nt;
            PairEval pe;
            pe.payload = pi;
            pe.target = ti;
            AsmProgram out;
            if (!do_cf && !do_asm) {
                out = pc.payload_asm[pi];  // clean baseline
            } else {
                TransformOptions to;
                to.cf_only = do_cf && !do_asm;
                to.asm_only = do_asm && !do_cf;
                to.trials = opt.trials;
                to.seed = opt.seed + static_cast<uint64_t>(idx);
                to.budget = opt.budget;
                to.paper_faithful_positions = opt.paper_faithful_positions;
                try {
                    TransformOutcome tr = transform_pair(pc.payloads[pi], pc.targets[ti], to);
                    if (!tr.verdict.equivalent) {
                        ++eq_failures;
                        pe.skipped = true;
                        pe.skip_reason = "equivalence failure: " + tr.verdict.detail;
                        arm.pairs[static_cast<size_t>(idx)] = std::move(pe);
                        continue;
                    }
                    out = std::move(tr.output_asm);
                } catch (const NoAlignment& e) {
                    pe.skipped = true;
                    pe.skip_reason = std::string("no alignment: ") + e.what();
                    arm.pairs[static_cast<size_t>(idx)] = std::move(pe);
                    continue;
                }
            }
            pe.score_p = similarity(out, pc.payload_asm[pi], opt.model).value;
            pe.score_t = similarity(out, pc.target_asm[ti], opt.model).value;
            pe.dec_p = pe.score_p >= tau;
            pe.dec_t = pe.score_t >= tau;
            auto ranking = retrieve(out, pc.repository, opt.model);
            for (const auto& r : ranking) {
                if (r.id == pi) pe.rank_p = r.rank;
                if (r.id == np + ti) pe.rank_t = r.rank;
            }
            arm.pairs[static_cast<size_t>(idx)] = std::move(pe);
        }
    };
    int nworkers = std::max(1, opt.workers);
    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < nworkers; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    arm.equivalence_failures = eq_failures.load();

    std::vector<std::pair<bool, bool>> decisions;
    std::vector<double> pos_scores, neg_scores;
    std::vector<std::pair<std::optional<int>, std::optional<int>>> ranks;
    for (const auto& pe : arm.pairs) {
        if (pe.skipped) continue;
        decisions.push_back({pe.dec_p, pe.dec_t});
        pos_scores.push_back(pe.score_p);
        neg_scores.push_back(pe.score_t);
        ranks.push_back({pe.rank_p, pe.rank_t});
    }
    if (!decisions.empty()) {
        arm.cls = classification_metrics(decisions);
        arm.auc_value = auc(pos_scores, neg_scores);
        for (int k : opt.ks) {
            arm.retrieval[k] = retrieval_metrics(ranks, k);
            arm.success_k[k] =
                static_cast<double>(success_at_k(ranks, k)) / static_cast<double>(ranks.size());
        }
    }
    return arm;
}

inline json arm_json(const ArmResult& arm, const EvaluateOptions& opt) {
    json j;
    json cls;
    cls["auc"] = arm.auc_value;
    if (arm.cls.precision) cls["precision"] = *arm.cls.precision;
    else cls["precision"] = nullptr;
    cls["recall"] = arm.cls.recall;
    cls["accuracy"] = arm.cls.accuracy;
    cls["mars"] = arm.cls.mars;
    cls["eva"] = arm.cls.eva;
    cls["conf"] = arm.cls.conf;
    cls["fail"] = arm.cls.fail;
    j["classification"] = std::move(cls);
    json ret = json::object();
    for (int k : opt.ks) {
        const auto& r = arm.retrieval.count(k) ? arm.retrieval.at(k) : RetrievalMetrics{};
        json rk;
        rk["hits_p"] = r.hits_p;
        rk["hits_t"] = r.hits_t;
        rk["mars_k"] = r.mars_k;
        rk["eva_k"] = r.eva_k;
        rk["conf_k"] = r.conf_k;
        rk["fail_k"] = r.fail_k;
        rk["mrr_p"] = r.mrr_p;
        rk["mrr_t"] = r.mrr_t;
        rk["success_k"] = arm.success_k.count(k) ? arm.success_k.at(k) : 0.0;
        ret[std::to_string(k)] = std::move(rk);
    }
    j["retrieval"] = std::move(ret);
    int skipped = 0;
    for (const auto& pe : arm.pairs) skipped += pe.skipped;
    j["pairs"] = arm.pairs.size();
    j["skipped"] = skipped;
    j["equivalence_failures"] = arm.equivalence_failures;
    return j;
}

}  // namespace pipeline_detail

struct EvaluateResult {
    json report;
    std::string csv;
    std::map<std::string, ArmResult> arms;
    double tau = 0.0;
};

inline EvaluateResult evaluate(const Corpus& corpus, const EvaluateOptions& opt = {}) {
    using namespace pipeline_detail;
    ParsedCorpus pc = parse_corpus(corpus);

    // Threshold: midpoint of mean clean-positive (p vs p) and mean
    // clean-negative (p vs t) scores unless given explicitly.
    double tau;
    if (opt.tau) {
        tau = *opt.tau;
    } else {
        std::vector<double> pos, neg;
        for (size_t i = 0; i < pc.payload_asm.size(); ++i)
            pos.push_back(similarity(pc.payload_asm[i], pc.payload_asm[i], opt.model).value);
        for (const auto& p : pc.payload_asm)
            for (const auto& t : pc.target_asm)
                neg.push_back(similarity(p, t, opt.model).value);
        tau = calibrate_tau(pos, neg);
    }

    EvaluateResult res;
    res.tau = tau;
    res.arms["clean"] = run_arm("clean", pc, opt, tau, false, false);
    res.arms["full"] = run_arm("full", pc, opt, tau, true, true);
    if (opt.ablate) {
        res.arms["cf-only"] = run_arm("cf-only", pc, opt, tau, true, false);
        res.arms["asm-only"] = run_arm("asm-only", pc, opt, tau, false, true);
    }

    json j;
    j["version"] = kReportVersion;
    j["corpus"] = {{"seed", corpus.spec.seed},
                   {"payloads", corpus.payloads.size()},
                   {"targets", corpus.targets.size()}};
    j["provenance"] = {{"model", model_name(opt.model)},
                       {"tau", tau},
                       {"k", opt.ks},
                       {"seed", opt.seed},
                       {"trials", opt.trials}};
    json arms = json::object();
    for (const auto& [name, arm] : res.arms) arms[name] = arm_json(arm, opt);
    j["metrics"] = std::move(arms);
    res.report = std::move(j);

    // CSV: one row per arm.
    std::string csv = "arm,auc,precision,recall,accuracy,mars";
    for (int k : opt.ks) csv += ",hits_p@" + std::to_string(k) + ",mars@" + std::to_string(k);
    csv += "\n";
    for (const auto& [name, arm] : res.arms) {
        char buf[64];
        csv += name;
        auto add = [&](double v) {
            std::snprintf(buf, sizeof buf, ",%.4f", v);
            csv += buf;
        };
        add(arm.auc_value);
        if (arm.cls.precision) add(*arm.cls.precision);
        else csv += ",";
        add(arm.cls.recall);
        add(arm.cls.accuracy);
        add(arm.cls.mars);
        for (int k : opt.ks) {
            const auto& r = arm.retrieval.count(k) ? arm.retrieval.at(k) : RetrievalMetrics{};
            add(r.hits_p);
            add(r.mars_k);
        }
        csv += "\n";
    }
    res.csv = std::move(csv);
    return res;
}

inline std::string manifest_json(const Corpus& c) {
    json j;
    j["seed"] = c.spec.seed;
    j["embeddable"] = c.spec.embeddable;
    json fns = json::array();
    auto add = [&](const CorpusFunction& f) {
        fns.push_back({{"name", f.name},
                       {"role", f.role},
                       {"cf_nodes", f.cf_nodes},
                       {"instructions", f.instructions}});
    };
    for (const auto& f : c.payloads) add(f);
    for (const auto& f : c.targets) add(f);
    j["functions"] = std::move(fns);
    return j.dump(2) + "\n";
}

}  // namespace mimicry

#endif
