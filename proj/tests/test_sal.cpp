#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mimicry;
using namespace mimicry::testing;

TEST_CASE("parse minimal function") {
    CfTree t = parse_sal_inline("func f { ret }");
    CHECK(t.kind == CfKind::End);
    REQUIRE(t.instructions.size() == 1);
    CHECK(t.instructions[0].mnemonic == Mnemonic::Ret);
}

TEST_CASE("parse counted loop") {
    CfTree t = parse_sal_inline("func f { while (r1 > 0) { dec r1 } ret }");
    REQUIRE(t.kind == CfKind::While);
    REQUIRE(t.condition.has_value());
    CHECK(t.condition->form == Condition::Form::RegCmpImm);
    CHECK(t.condition->lhs == 1);
    CHECK(t.condition->op == CmpOp::Gt);
    CHECK(t.condition->rhs_imm == 0);
    REQUIRE(t.body->instructions.size() == 1);
    CHECK(to_string(t.body->instructions[0]) == "dec r1");
    CHECK(t.body->kind == CfKind::End);
    CHECK(t.tail->kind == CfKind::End);
    REQUIRE(t.tail->instructions.size() == 1);
    CHECK(t.tail->instructions[0].mnemonic == Mnemonic::Ret);
}

TEST_CASE("break outside a loop is a structure error") {
    CHECK_THROWS_AS(parse_sal_inline("func f { break }"), StructureError);
    CHECK_THROWS_AS(parse_sal_inline("func f { continue }"), StructureError);
    CHECK_NOTHROW(parse_sal_inline("func f { while (r0 > 0) { dec r0\nbreak } }"));
}

TEST_CASE("parse rejects malformed input with positions") {
    try {
        parse_sal_inline("func f {\n  mov r0, 1\n  frobnicate r1\n}");
        FAIL("expected UnknownMnemonic");
    } catch (const UnknownMnemonic& e) {
        CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_sal(""), SyntaxError);
    CHECK_THROWS_AS(parse_sal_inline("func f { if (r0 ~ 1) { } }"), SyntaxError);
    CHECK_THROWS_AS(parse_sal_inline("func f { jmp somewhere }"), SyntaxError);
    CHECK_THROWS_AS(parse_sal_inline("func f { mov r0 }"), BadOperandCount);
    // ret only as the final statement
    CHECK_THROWS_AS(parse_sal_inline("func f { ret\nmov r0, 1 }"), StructureError);
    CHECK_THROWS_AS(parse_sal_inline("func f { if (r0 > 0) { ret } }"), StructureError);
    // unreachable code after break
    CHECK_THROWS_AS(parse_sal_inline("func f { while (r0 > 0) { break\nmov r1, 1 } }"),
                    StructureError);
}

TEST_CASE("emit of an empty tree is an empty body") {
    CfTree end;
    CHECK(emit_sal(end) == "func f {\n}\n");
}

TEST_CASE("opaque conditions print as tokens and re-parse") {
    auto t = branch(CfKind::While, Condition::opaque_false(), leaf(CfKind::End),
                    branch(CfKind::If, Condition::opaque_true(), leaf(CfKind::End, {"inc r0"}),
                           leaf(CfKind::End)));
    std::string text = emit_sal(*t);
    CHECK(text.find("while (OPAQUE_FALSE) {") != std::string::npos);
    CHECK(text.find("if (OPAQUE_TRUE) {") != std::string::npos);
    CfTree back = parse_sal(text);
    CHECK(structurally_equal(*t, back));
}

TEST_CASE("round-trip: parse after emit is the identity on generated corpora") {
    for (uint64_t seed : {7ull, 8ull, 9ull, 10ull}) {
        CorpusSpec spec;
        spec.seed = seed;
        spec.n_payloads = 13;
        spec.n_targets = 12;
        Corpus c = generate(spec);
        int checked = 0;
        for (const auto* set : {&c.payloads, &c.targets}) {
            for (const auto& fn : *set) {
                CfTree once = parse_sal(fn.sal_text);
                CfTree twice = parse_sal(emit_sal(once, fn.name));
                REQUIRE(structurally_equal(once, twice));
                ++checked;
            }
        }
        CHECK(checked == 25);
    }
}

TEST_CASE("count_cf_nodes") {
    CfTree end;
    CHECK(count_cf_nodes(end) == 0);
    CHECK(count_cf_nodes(parse_sal(kExamplePayloadSal)) == 2);
    CHECK(count_cf_nodes(parse_sal(kExampleTargetSal)) == 4);
    CfTree loop = parse_sal_inline("func f { while (r0 > 0) { dec r0\nif (r1 == 0) { break } } }");
    CHECK(count_cf_nodes(loop) == 3);  // while, if, break
}

TEST_CASE("kind preorder determines shape") {
    CfTree p = parse_sal(kExamplePayloadSal);
    CHECK(kind_preorder(p) == "While While End End End");
    CfTree t = parse_sal(kExampleTargetSal);
    CHECK(kind_preorder(t) == "While End While If While End End End End");
}

TEST_CASE("comments and blank lines are ignored") {
    CfTree a = parse_sal_inline("func f {\n  # setup\n  mov r0, 1\n\n  ret  # done\n}");
    CfTree b = parse_sal_inline("func f { mov r0, 1\nret }");
    CHECK(structurally_equal(a, b));
}
