// mimicry-forge: two-stage structural + instruction-distribution mimicry
// transformer for a miniature structured assembly language, with a
// semantic-equivalence oracle and a corpus evaluation harness.

#include <mimicry/pipeline.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mimicry;

namespace {

constexpr int kExitParse = 1;
constexpr int kExitNoAlignment = 2;
constexpr int kExitEquivalence = 3;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

uint64_t default_seed() {
    if (const char* env = std::getenv("MIMICRY_FORGE_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw std::runtime_error("MIMICRY_FORGE_SEED is not an integer");
        }
    }
    return 1;
}

// Accepts .sal (lowered) or .asm input.
AsmProgram load_program(const fs::path& p) {
    std::string text = read_file(p);
    if (p.extension() == ".asm") return parse_asm(text);
    return lower(parse_sal(text));
}

struct CorpusFiles {
    Corpus corpus;
};

Corpus load_corpus(const fs::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    Corpus c;
    c.spec.seed = manifest.value("seed", 0ull);
    c.spec.embeddable = manifest.value("embeddable", true);
    for (const auto& f : manifest.at("functions")) {
        CorpusFunction fn;
        fn.name = f.at("name").get<std::string>();
        fn.role = f.at("role").get<std::string>();
        fn.cf_nodes = f.at("cf_nodes").get<int>();
        fn.instructions = f.at("instructions").get<int>();
        fn.sal_text = read_file(dir / (fn.name + ".sal"));
        (fn.role == "payload" ? c.payloads : c.targets).push_back(std::move(fn));
    }
    if (c.payloads.empty() || c.targets.empty())
        throw std::runtime_error("corpus needs at least one payload and one target");
    return c;
}

int run(int argc, char** argv) {
    CLI::App app{"two-stage structural and instruction-distribution mimicry transformer"};
    app.require_subcommand(1);

    // transform
    auto* tr = app.add_subcommand("transform", "transform a payload toward a target");
    std::string tr_payload, tr_target;
    std::string tr_out_sal = "out.sal", tr_out_asm = "out.asm", tr_report = "report.json";
    TransformOptions topt;
    topt.seed = default_seed();
    tr->add_option("payload", tr_payload, "payload .sal file")->required();
    tr->add_option("target", tr_target, "target .sal file")->required();
    tr->add_option("--out-sal", tr_out_sal, "merged SAL output path");
    tr->add_option("--out-asm", tr_out_asm, "final assembly output path");
    tr->add_option("--report", tr_report, "report JSON path");
    tr->add_flag("--cf-only", topt.cf_only, "stage 1 only");
    tr->add_flag("--asm-only", topt.asm_only, "stage 2 only (whole-function deficits)");
    tr->add_option("--trials", topt.trials, "equivalence trial count");
    tr->add_option("--seed", topt.seed, "random seed");
    tr->add_option("--budget", topt.budget, "stage 2 insertion budget (-1: 4x target size)");
    tr->add_flag("--paper-faithful-positions", topt.paper_faithful_positions,
                 "compute insertion positions once instead of after every insertion");

    // verify
    auto* ve = app.add_subcommand("verify", "check observational equivalence of two programs");
    std::string ve_a, ve_b;
    int ve_trials = 100;
    uint64_t ve_seed = default_seed();
    ve->add_option("a", ve_a, "first program (.sal or .asm)")->required();
    ve->add_option("b", ve_b, "second program (.sal or .asm)")->required();
    ve->add_option("--trials", ve_trials, "trial count");
    ve->add_option("--seed", ve_seed, "random seed");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run the corpus evaluation harness");
    std::string ev_corpus, ev_report = "eval.json", ev_csv = "eval.csv", ev_model = "hist";
    EvaluateOptions eopt;
    eopt.seed = default_seed();
    double ev_tau = -1;
    ev->add_option("--corpus", ev_corpus, "corpus directory (manifest.json + .sal files)")
        ->required();
    ev->add_option("--model", ev_model, "similarity model: hist|cfg|ngram");
    ev->add_option("--tau", ev_tau, "decision threshold (default: midpoint calibration)");
    ev->add_option("--k", eopt.ks, "retrieval cutoffs");
    ev->add_option("--seed", eopt.seed, "random seed");
    ev->add_option("--trials", eopt.trials, "equivalence trials per pair");
    ev->add_option("--budget", eopt.budget, "stage 2 insertion budget");
    ev->add_flag("--ablate", eopt.ablate, "also run cf-only and asm-only arms");
    ev->add_option("--workers", eopt.workers, "worker threads");
    ev->add_flag("--paper-faithful-positions", eopt.paper_faithful_positions,
                 "single-pass insertion positions");
    ev->add_option("--report", ev_report, "report JSON path");
    ev->add_option("--csv", ev_csv, "CSV summary path");

    // gen-corpus
    auto* gc = app.add_subcommand("gen-corpus", "generate a seeded synthetic corpus");
    std::string gc_out;
    CorpusSpec cspec;
    cspec.seed = default_seed();
    std::vector<int> gc_pnodes = {1, 2}, gc_tnodes = {4, 8}, gc_instrs = {2, 4};
    std::vector<int> gc_tinstrs = {3, 8};
    bool gc_not_embeddable = false;
    gc->add_option("--out", gc_out, "output directory")->required();
    gc->add_option("--seed", cspec.seed, "random seed");
    gc->add_option("--payloads", cspec.n_payloads, "payload count");
    gc->add_option("--targets", cspec.n_targets, "target count");
    gc->add_option("--payload-nodes", gc_pnodes, "payload CF-node range (min max)")
        ->expected(2);
    gc->add_option("--target-nodes", gc_tnodes, "target CF-node range (min max)")->expected(2);
    gc->add_option("--instrs", gc_instrs, "payload instructions-per-block range (min max)")
        ->expected(2);
    gc->add_option("--target-instrs", gc_tinstrs,
                   "target instructions-per-block range (min max)")
        ->expected(2);
    gc->add_flag("--no-embeddable", gc_not_embeddable,
                 "independent shapes instead of a shared skeleton");

    // lower
    auto* lo = app.add_subcommand("lower", "lower a SAL file to assembly");
    std::string lo_in, lo_out;
    lo->add_option("input", lo_in, "input .sal file")->required();
    lo->add_option("--out", lo_out, "output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    if (tr->parsed()) {
        auto started = std::chrono::steady_clock::now();
        CfTree payload = parse_sal(read_file(tr_payload));
        CfTree target = parse_sal(read_file(tr_target));
        TransformOutcome out;
        try {
            out = transform_pair(payload, target, topt);
        } catch (const NoAlignment& e) {
            std::cerr << "no alignment: " << e.what()
                      << " (target too small -- choose a larger target)\n";
            return kExitNoAlignment;
        }
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
        write_file(tr_out_sal, out.merged ? emit_sal(*out.merged, "out") : emit_sal(payload, "out"));
        write_file(tr_out_asm, to_string(out.output_asm));
        std::string pair_id = fs::path(tr_payload).stem().string() + ":" +
                              fs::path(tr_target).stem().string();
        write_file(tr_report, report_json(pair_id, out, topt, ms).dump(2) + "\n");
        if (!out.verdict.equivalent) {
            std::cerr << "equivalence failure: " << out.verdict.detail << "\n";
            return kExitEquivalence;
        }
        std::cout << "ok: " << out.log.entries.size() << " insertion log entries, L1 "
                  << out.log.l1_before << " -> " << out.log.l1_after << "\n";
        return 0;
    }

    if (ve->parsed()) {
        AsmProgram a = load_program(ve_a);
        AsmProgram b = load_program(ve_b);
        EquivalenceVerdict v = check_equivalence(a, b, ve_trials, ve_seed);
        if (v.equivalent) {
            std::cout << "equivalent (" << ve_trials << " trials)\n";
            return 0;
        }
        std::cerr << "diverged: " << v.detail << "\n";
        return kExitEquivalence;
    }

    if (ev->parsed()) {
        if (ev_tau >= 0) eopt.tau = ev_tau;
        auto model = model_from_name(ev_model);
        if (!model) throw CLI::ValidationError("--model", "expected hist|cfg|ngram");
        eopt.model = *model;
        Corpus corpus = load_corpus(ev_corpus);
        EvaluateResult res = evaluate(corpus, eopt);
        write_file(ev_report, res.report.dump(2) + "\n");
        write_file(ev_csv, res.csv);
        std::cout << res.csv;
        return 0;
    }

    if (gc->parsed()) {
        cspec.payload_nodes_min = gc_pnodes[0];
        cspec.payload_nodes_max = gc_pnodes[1];
        cspec.target_nodes_min = gc_tnodes[0];
        cspec.target_nodes_max = gc_tnodes[1];
        cspec.instrs_min = gc_instrs[0];
        cspec.instrs_max = gc_instrs[1];
        cspec.target_instrs_min = gc_tinstrs[0];
        cspec.target_instrs_max = gc_tinstrs[1];
        cspec.embeddable = !gc_not_embeddable;
        Corpus corpus = generate(cspec);
        fs::create_directories(gc_out);
        for (const auto& f : corpus.payloads) write_file(fs::path(gc_out) / (f.name + ".sal"), f.sal_text);
        for (const auto& f : corpus.targets) write_file(fs::path(gc_out) / (f.name + ".sal"), f.sal_text);
        write_file(fs::path(gc_out) / "manifest.json", manifest_json(corpus));
        std::cout << "wrote " << corpus.payloads.size() << " payloads, " << corpus.targets.size()
                  << " targets to " << gc_out << "\n";
        return 0;
    }

    if (lo->parsed()) {
        std::string text = to_string(lower(parse_sal(read_file(lo_in))));
        if (lo_out.empty()) std::cout << text;
        else write_file(lo_out, text);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const SyntaxError& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const StructureError& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const UnknownMnemonic& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const BadOperandCount& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const UndefinedLabel& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const NoAlignment& e) {
        std::cerr << e.what() << "\n";
        return kExitNoAlignment;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 10;
    }
}
