#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "minie/grammar.hpp"

using namespace minie;

TEST_CASE("empty grammar lints clean") {
    auto doc = parse_grammar("");
    CHECK(doc.diagnostics.empty());
    CHECK(lint_grammar(doc).empty());
}

TEST_CASE("mixed choice and concatenation is rejected") {
    auto doc = parse_grammar("Z ::= choice: (U V) | (X Y)\n");
    REQUIRE(doc.diagnostics.empty());
    auto v = lint_grammar(doc);
    bool mixed = false;
    for (auto& x : v)
        if (x.message.find("mixed choice/concatenation") != std::string::npos) mixed = true;
    CHECK(mixed);
}

TEST_CASE("the three-production rewrite is accepted") {
    auto doc = parse_grammar(
        "Z ::= choice: A | B\n"
        "A ::= concatenation: U V\n"
        "B ::= concatenation: X Y\n"
        "U ::= concatenation: \"u\"\n"
        "V ::= concatenation: \"v\"\n"
        "X ::= concatenation: \"x\"\n"
        "Y ::= concatenation: \"y\"\n");
    REQUIRE(doc.diagnostics.empty());
    CHECK(lint_grammar(doc).empty());
}

TEST_CASE("two productions for one construct are rejected") {
    auto doc = parse_grammar(
        "A ::= concatenation: \"a\"\n"
        "A ::= concatenation: \"b\"\n");
    auto v = lint_grammar(doc);
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("exactly one") != std::string::npos);
}

TEST_CASE("alternatives inside a concatenation are rejected") {
    auto doc = parse_grammar("A ::= concatenation: \"x\" | \"y\"\n");
    auto v = lint_grammar(doc);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("mixed") != std::string::npos);
}

TEST_CASE("iteration shape is one item, optional separator, ellipsis") {
    CHECK(lint_grammar(parse_grammar("L ::= iteration: \"x\" \",\" ...\n")).empty());
    CHECK(lint_grammar(parse_grammar("L ::= iteration: \"x\" ...\n")).empty());
    CHECK(!lint_grammar(parse_grammar("L ::= iteration: \"x\" \"y\" \"z\" ...\n")).empty());
    CHECK(!lint_grammar(parse_grammar("L ::= iteration: \"x\"\n")).empty());
}

TEST_CASE("unknown kind is a violation") {
    auto v = lint_grammar(parse_grammar("A ::= sequence: \"x\"\n"));
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("unknown kind") != std::string::npos);
}

TEST_CASE("undefined construct references are violations") {
    auto v = lint_grammar(parse_grammar("A ::= concatenation: Missing\n"));
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("Missing") != std::string::npos);
}

TEST_CASE("all-caps names are lexical terminals, not references") {
    CHECK(lint_grammar(parse_grammar("A ::= concatenation: IDENTIFIER \":\" IDENTIFIER\n"))
              .empty());
}

TEST_CASE("malformed lines are parse diagnostics, not lint violations") {
    auto doc = parse_grammar("A = x\n");
    REQUIRE(!doc.diagnostics.empty());
    CHECK(doc.diagnostics[0].code == "GRAM");
}

TEST_CASE("the shipped grammar lints clean") {
    std::ifstream in(MINIE_GRAMMAR_FILE);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    auto doc = parse_grammar(ss.str(), "grammar.bnfe");
    for (auto& d : doc.diagnostics) MESSAGE(d.format());
    REQUIRE(doc.diagnostics.empty());
    auto v = lint_grammar(doc);
    for (auto& x : v) MESSAGE("line ", x.line, ": ", x.message);
    CHECK(v.empty());
}
