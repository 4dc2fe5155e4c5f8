#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mimicry;
using namespace mimicry::testing;

TEST_CASE("self-similarity is exactly one") {
    AsmProgram p = lower(parse_sal(kExamplePayloadSal));
    for (Model m : {Model::HistCosine, Model::CfgFingerprint, Model::NgramJaccard})
        CHECK(similarity(p, p, m).value == 1.0);
    // Empty vs empty is defined as one.
    AsmProgram empty;
    for (Model m : {Model::HistCosine, Model::CfgFingerprint, Model::NgramJaccard})
        CHECK(similarity(empty, empty, m).value == 1.0);
}

TEST_CASE("orthogonal histograms score zero") {
    AsmProgram a = parse_asm("mov r0, 1\n");
    AsmProgram b = parse_asm("add r0, 1\n");
    CHECK(similarity(a, b, Model::HistCosine).value == 0.0);
}

TEST_CASE("hist-cosine worked value") {
    AsmProgram a = parse_asm("mov r0, 1\nmov r1, 2\n");
    AsmProgram b = parse_asm("mov r0, 1\nmov r1, 2\nadd r2, 1\nadd r2, 2\nadd r2, 3\n");
    double expect = 4.0 / (2.0 * std::sqrt(13.0));  // {mov:2} vs {mov:2, add:3}
    CHECK_THAT(similarity(a, b, Model::HistCosine).value,
               Catch::Matchers::WithinAbs(expect, 1e-12));
}

TEST_CASE("similarity is symmetric") {
    CorpusSpec spec;
    spec.seed = 51;
    spec.n_payloads = 4;
    spec.n_targets = 4;
    Corpus c = generate(spec);
    std::vector<AsmProgram> progs;
    for (const auto* set : {&c.payloads, &c.targets})
        for (const auto& fn : *set) progs.push_back(lower(parse_sal(fn.sal_text)));
    for (size_t i = 0; i < progs.size(); ++i)
        for (size_t j = i; j < progs.size(); ++j)
            for (Model m : {Model::HistCosine, Model::CfgFingerprint, Model::NgramJaccard}) {
                double ij = similarity(progs[i], progs[j], m).value;
                double ji = similarity(progs[j], progs[i], m).value;
                CHECK(ij == ji);
                CHECK(ij >= 0.0);
                CHECK(ij <= 1.0);
            }
}

TEST_CASE("classify thresholds the score") {
    AsmProgram p = lower(parse_sal(kExamplePayloadSal));
    CHECK(classify(p, p, Model::HistCosine, 1.0));
    AsmProgram a = parse_asm("mov r0, 1\nmov r1, 2\n");
    AsmProgram b = parse_asm("mov r0, 1\nmov r1, 2\nadd r2, 1\nadd r2, 2\nadd r2, 3\n");
    // score ~0.5547
    CHECK_FALSE(classify(a, b, Model::HistCosine, 0.6));
    CHECK(classify(a, b, Model::HistCosine, 0.5));
}

TEST_CASE("retrieve ranks an exact member first") {
    std::vector<AsmProgram> repo = {
        parse_asm("mov r0, 1\n"), parse_asm("add r0, 1\n"), parse_asm("xor r0, r0\n")};
    auto ranked = retrieve(repo[1], repo, Model::HistCosine);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].id == 1);
    CHECK(ranked[0].score == 1.0);
    CHECK(ranked[0].rank == 1);
}

TEST_CASE("retrieve breaks ties by ascending id deterministically") {
    AsmProgram q = parse_asm("mov r0, 1\n");
    std::vector<AsmProgram> repo = {
        parse_asm("add r1, 1\n"),  // orthogonal
        parse_asm("mov r2, 5\n"),  // score 1 (same histogram shape)
        parse_asm("mov r3, 9\n"),  // score 1 as well
    };
    auto first = retrieve(q, repo, Model::HistCosine);
    auto second = retrieve(q, repo, Model::HistCosine);
    REQUIRE(first.size() == 3);
    CHECK(first[0].id == 1);
    CHECK(first[1].id == 2);
    CHECK(first[2].id == 0);
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].id == second[i].id);
        CHECK(first[i].rank == static_cast<int>(i) + 1);
    }
}

TEST_CASE("tau calibration is the midpoint of class means") {
    CHECK(calibrate_tau({1.0, 1.0}, {0.2, 0.4}) == 0.65);
    CHECK(calibrate_tau({0.8}, {0.2}) == 0.5);
    CHECK_THROWS_AS(calibrate_tau({}, {0.5}), EmptyClass);
    CHECK_THROWS_AS(calibrate_tau({0.5}, {}), EmptyClass);
}
