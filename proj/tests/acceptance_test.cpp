// Acceptance gate: one line per release criterion, nonzero exit on any
// failure. Kept separate from the unit suite so the release check is a
// single readable transcript.

#include "helpers.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace mimicry;
using namespace mimicry::testing;

namespace {

int g_failures = 0;

void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n" << std::flush;
    if (!ok) ++g_failures;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in.good()) return "<missing: " + p.string() + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_occurrences(const std::string& hay, const std::string& needle) {
    int n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

// Shared artifacts of the full-pipeline run over the default corpus,
// reused by several criteria.
struct PipelineRun {
    std::vector<CfTree> payloads, targets;
    std::vector<TransformOutcome> outcomes;  // row-major payload x target
    double elapsed_s = 0;
    int pairs = 0, equivalent = 0;
};

PipelineRun run_pipeline() {
    PipelineRun run;
    CorpusSpec spec;  // seed 1, 10 payloads x 10 targets
    Corpus c = generate(spec);
    run.payloads = parse_functions(c.payloads);
    run.targets = parse_functions(c.targets);
    auto t0 = std::chrono::steady_clock::now();
    uint64_t pair_seed = 9000;
    for (const auto& p : run.payloads)
        for (const auto& t : run.targets) {
            TransformOptions opt;
            opt.trials = 100;
            opt.seed = ++pair_seed;
            run.outcomes.push_back(transform_pair(p, t, opt));
            ++run.pairs;
            run.equivalent += run.outcomes.back().verdict.equivalent;
        }
    run.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

}  // namespace

int main() {
    std::cout << "acceptance gate\n===============\n";
    PipelineRun run = run_pipeline();

    criterion("semantic preservation: 100 pairs x 100 states, 100% equivalent, < 2 min",
              [&](std::string& d) {
                  std::ostringstream ss;
                  ss << run.equivalent << "/" << run.pairs << " equivalent in " << run.elapsed_s
                     << " s";
                  d = ss.str();
                  return run.pairs == 100 && run.equivalent == run.pairs &&
                         run.elapsed_s < 120.0;
              });

    criterion("structural mimicry: merged node-kind preorder equals the target's on all pairs",
              [&](std::string& d) {
                  int ok = 0, idx = 0;
                  for (const auto& p : run.payloads) {
                      (void)p;
                      for (const auto& t : run.targets) {
                          const TransformOutcome& o = run.outcomes[static_cast<size_t>(idx++)];
                          ok += o.merged && kind_preorder(*o.merged) == kind_preorder(t);
                      }
                  }
                  d = std::to_string(ok) + "/" + std::to_string(run.pairs);
                  return ok == run.pairs;
              });

    criterion("tree matcher agrees with the brute-force embedding oracle (all shapes <= 5 nodes)",
              [&](std::string& d) {
                  auto shapes = all_shapes_up_to(5);
                  std::vector<std::string> canon;
                  std::vector<std::unordered_set<std::string>> red;
                  canon.reserve(shapes.size());
                  for (const auto& s : shapes) {
                      canon.push_back(canon_shape(*s));
                      red.push_back(reductions(*s));
                  }
                  long long disagreements = 0, pairs = 0;
                  for (size_t pi = 0; pi < shapes.size(); ++pi)
                      for (size_t ti = 0; ti < shapes.size(); ++ti) {
                          ++pairs;
                          if (match_tree(*shapes[pi], *shapes[ti]) !=
                              (red[ti].count(canon[pi]) > 0))
                              ++disagreements;
                      }
                  std::ostringstream ss;
                  ss << shapes.size() << " shapes, " << pairs << " pairs, " << disagreements
                     << " disagreements";
                  d = ss.str();
                  return disagreements == 0;
              });

    criterion("liveness soundness: >= 1000 dynamic traces, 0 violations, stable fixpoint",
              [&](std::string& d) {
                  std::mt19937_64 seeder(4242);
                  int traces = 0, violations = 0, fixpoint_failures = 0;
                  for (const auto& o : run.outcomes) {
                      FlatProgram f = FlatProgram::from(o.output_asm);
                      fixpoint_failures += !liveness_is_fixpoint(f, analyze_liveness(f));
                      for (int k = 0; k < 10; ++k) {
                          TraceResult tr =
                              record_trace(o.output_asm, MachineState::random(seeder()));
                          if (!tr.finished) return d = "trace did not finish", false;
                          violations += liveness_violations(o.output_asm, tr);
                          ++traces;
                      }
                  }
                  std::ostringstream ss;
                  ss << traces << " traces, " << violations << " violations, "
                     << fixpoint_failures << " fixpoint failures";
                  d = ss.str();
                  return traces >= 1000 && violations == 0 && fixpoint_failures == 0;
              });

    criterion("negative control: a planted write to a live register diverges (>= 20 faults)",
              [&](std::string& d) {
                  int faults = 0, detected = 0;
                  for (size_t i = 0; i < run.outcomes.size() && faults < 25; ++i) {
                      const TransformOutcome& o = run.outcomes[i];
                      // Plant `inc r0` immediately before the final ret:
                      // r0 is live there (the return value), so the oracle
                      // must observe the off-by-one.
                      AsmProgram faulted = o.output_asm;
                      for (size_t li = faulted.lines.size(); li-- > 0;) {
                          auto* in = std::get_if<Instruction>(&faulted.lines[li]);
                          if (in && in->mnemonic == Mnemonic::Ret) {
                              faulted.lines.insert(
                                  faulted.lines.begin() + static_cast<std::ptrdiff_t>(li),
                                  AsmItem{parse_asm_line("inc r0", false)});
                              break;
                          }
                      }
                      ++faults;
                      EquivalenceVerdict v = check_equivalence(
                          o.payload_asm, faulted, 100, 7000 + static_cast<uint64_t>(i));
                      detected += !v.equivalent;
                  }
                  d = std::to_string(detected) + "/" + std::to_string(faults) + " detected";
                  return faults >= 20 && detected == faults;
              });

    criterion("histogram monotonicity: L1-to-target never increases, strictly drops on inserts",
              [&](std::string& d) {
                  int ok = 0;
                  for (const auto& o : run.outcomes) {
                      bool mono = o.log.l1_after <= o.log.l1_before;
                      bool strict = o.log.entries.empty() || o.log.l1_after < o.log.l1_before;
                      ok += mono && strict;
                  }
                  d = std::to_string(ok) + "/" + std::to_string(run.pairs);
                  return ok == run.pairs;
              });

    criterion("desk-scale attack analogue: clean baseline intact, full >= 0.50 Mars, ablations weaker",
              [&](std::string& d) {
                  CorpusSpec spec;  // default seed-1 corpus again
                  EvaluateOptions opt;
                  opt.ablate = true;
                  opt.trials = 25;
                  opt.workers = 4;
                  EvaluateResult r = evaluate(generate(spec), opt);
                  const auto& clean = r.arms.at("clean");
                  const auto& full = r.arms.at("full");
                  const auto& cf = r.arms.at("cf-only");
                  const auto& am = r.arms.at("asm-only");
                  std::ostringstream ss;
                  ss << "mars clean=" << clean.cls.mars << " full=" << full.cls.mars
                     << " cf=" << cf.cls.mars << " asm=" << am.cls.mars
                     << " clean hits_p@1=" << clean.retrieval.at(1).hits_p;
                  d = ss.str();
                  return clean.cls.mars == 0.0 && clean.retrieval.at(1).hits_p >= 0.95 &&
                         full.cls.mars >= 0.50 && cf.cls.mars < full.cls.mars &&
                         am.cls.mars < full.cls.mars;
              });

    criterion("metric identities hold over 10000 random decision/rank vectors",
              [&](std::string& d) {
                  std::mt19937_64 rng(31337);
                  int violations = 0;
                  auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
                  for (int rep = 0; rep < 10000; ++rep) {
                      int n = 1 + static_cast<int>(rng() % 16);
                      std::vector<std::pair<bool, bool>> dec;
                      std::vector<std::pair<std::optional<int>, std::optional<int>>> ranks;
                      std::vector<double> pos, neg;
                      for (int i = 0; i < n; ++i) {
                          dec.push_back({rng() & 1, rng() & 1});
                          auto rank = [&]() -> std::optional<int> {
                              if (rng() % 4 == 0) return std::nullopt;
                              return 1 + static_cast<int>(rng() % 15);
                          };
                          ranks.push_back({rank(), rank()});
                          pos.push_back(static_cast<double>(rng() % 100) / 99.0);
                          neg.push_back(static_cast<double>(rng() % 100) / 99.0);
                      }
                      ClassificationMetrics cm = classification_metrics(dec);
                      if (!near(cm.mars + cm.eva + cm.conf + cm.fail, 1.0)) ++violations;
                      int k = 1 + static_cast<int>(rng() % 12);
                      RetrievalMetrics rm = retrieval_metrics(ranks, k);
                      if (!near(rm.mars_k + rm.eva_k + rm.conf_k + rm.fail_k, 1.0)) ++violations;
                      if (!near(rm.hits_t, rm.mars_k + rm.conf_k)) ++violations;
                      if (!near(rm.hits_p, rm.fail_k + rm.conf_k)) ++violations;
                      if (!near(auc(pos, neg) + auc(neg, pos), 1.0)) ++violations;
                  }
                  d = std::to_string(violations) + " violations";
                  return violations == 0;
              });

    criterion("MRR worked example: ranks [1, 2, absent] at K=10 give 0.5",
              [&](std::string& d) {
                  std::vector<std::pair<std::optional<int>, std::optional<int>>> qs = {
                      {std::nullopt, 1}, {std::nullopt, 2}, {std::nullopt, std::nullopt}};
                  double mrr = retrieval_metrics(qs, 10).mrr_t;
                  d = "mrr_t = " + std::to_string(mrr);
                  return std::fabs(mrr - 0.5) <= 1e-12;
              });

    criterion("golden walkthrough regenerates byte-identically with the expected dummies",
              [&](std::string& d) {
                  namespace fs = std::filesystem;
                  const fs::path dir = fs::path(MIMICRY_SOURCE_DIR) / "docs" / "walkthrough";
                  CfTree p = parse_sal(kExamplePayloadSal);
                  CfTree t = parse_sal(kExampleTargetSal);
                  TransformOptions opt;
                  TransformOutcome out = transform_pair(p, t, opt);
                  std::string merged = emit_sal(*out.merged, "payload_as_target");
                  bool bytes =
                      read_file(dir / "payload.sal") == emit_sal(p, "payload") &&
                      read_file(dir / "target.sal") == emit_sal(t, "target") &&
                      read_file(dir / "merged.sal") == merged &&
                      read_file(dir / "output.asm") == to_string(out.output_asm) &&
                      read_file(dir / "report.json") ==
                          report_json("payload->target", out, opt, 0.0).dump(2) + "\n";
                  bool dummies = count_occurrences(merged, "OPAQUE_FALSE") == 1 &&
                                 count_occurrences(merged, "OPAQUE_TRUE") == 1;
                  d = std::string(bytes ? "byte-identical" : "fixture drift") +
                      (dummies ? ", dummy placements match" : ", dummy placements wrong");
                  return bytes && dummies && out.verdict.equivalent;
              });

    criterion("determinism: two evaluate runs with one seed emit byte-identical reports",
              [&](std::string& d) {
                  CorpusSpec spec;
                  spec.n_payloads = 5;
                  spec.n_targets = 5;
                  EvaluateOptions opt;
                  opt.trials = 10;
                  opt.workers = 4;
                  EvaluateResult a = evaluate(generate(spec), opt);
                  EvaluateResult b = evaluate(generate(spec), opt);
                  // The evaluate report carries no timing fields, so whole
                  // documents must agree byte for byte.
                  bool same = a.report.dump(2) == b.report.dump(2) && a.csv == b.csv;
                  d = same ? "reports identical" : "reports differ";
                  return same;
              });

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED\n"
                                  : std::to_string(g_failures) + " criteria failed\n");
    return g_failures == 0 ? 0 : 1;
}
