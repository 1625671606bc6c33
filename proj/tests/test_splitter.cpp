#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splitter_oracle.hpp"
#include "test_paths.hpp"
#include "tracerag/splitter.hpp"
#include "tracerag/util.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <set>

using namespace tracerag;
using splitter::CodeUnit;
using splitter::SourceFile;

namespace {

const std::filesystem::path kCorpus = std::filesystem::path(TRACERAG_FIXTURES_DIR) / "corpus";

// hand-annotated per-file method counts; -1 marks the unbalanced file
const std::map<std::string, int> kFrozenCounts = {
    {"AnnotationType.java", 1}, {"Annotations.java", 2}, {"Anonymous.java", 2},
    {"ArrayInit.java", 1},      {"Comments.java", 1},    {"Constructors.java", 3},
    {"Empty.java", 0},          {"EnumConstBody.java", 2}, {"Enums.java", 1},
    {"Fields.java", 2},         {"Generics.java", 2},    {"InnerDeep.java", 3},
    {"InterfaceDefault.java", 2}, {"Lambdas.java", 2},   {"LocalClass.java", 2},
    {"MultiTop.java", 3},       {"Nested.java", 1},      {"Obfuscated.java", 2},
    {"Overloads.java", 2},      {"Single.java", 1},      {"StaticInit.java", 1},
    {"TextBlock.java", 1},      {"Throws.java", 2},      {"Unbalanced.java", -1},
    {"Varargs.java", 2}};

SourceFile load_fixture(const std::string& name) {
    return SourceFile{name, util::read_file(kCorpus / name)};
}

} // namespace

TEST_CASE("class with no methods yields no units") {
    auto result = splitter::extract_methods({"A.java", "class A {}"});
    CHECK(result.units.empty());
    CHECK(result.warnings.empty());
}

TEST_CASE("single method forced by definition") {
    auto result = splitter::extract_methods({"A.java", "class A { void m(int x){} }"});
    REQUIRE(result.units.size() == 1);
    const CodeUnit& u = result.units[0];
    CHECK(u.method_name == "m");
    CHECK(u.param_count == 1);
    CHECK(u.param_types == std::vector<std::string>{"int"});
    CHECK(u.class_name == "A");
    CHECK(u.body_text == "void m(int x){}");
}

TEST_CASE("overload arity and shared field context") {
    auto file = load_fixture("Overloads.java");
    auto result = splitter::extract_methods(file);
    REQUIRE(result.units.size() == 2);
    std::set<std::size_t> arities;
    for (const CodeUnit& u : result.units) {
        CHECK(u.method_name == "m");
        CHECK(u.context_header.find("int f;") != std::string::npos);
        arities.insert(u.param_count);
    }
    CHECK(arities == std::set<std::size_t>{0, 2});
}

TEST_CASE("nested class names join with dollar") {
    auto result = splitter::extract_methods(load_fixture("Nested.java"));
    REQUIRE(result.units.size() == 1);
    CHECK(result.units[0].class_name == "com.sample.basic.Outer$Inner");
    CHECK(result.units[0].method_name == "g");
}

TEST_CASE("context header carries package, imports and class line") {
    SourceFile file{"p/A.java", "package p;\nimport a.B;\nclass A { void m(){} }"};
    auto result = splitter::extract_methods(file);
    REQUIRE(result.units.size() == 1);
    const std::string& header = result.units[0].context_header;
    CHECK(header.find("package p;") != std::string::npos);
    CHECK(header.find("import a.B;") != std::string::npos);
    CHECK(header.find("class A {") != std::string::npos);
    CHECK(header.find("void m") == std::string::npos); // no method bodies
}

TEST_CASE("fields listed in source order") {
    auto result = splitter::extract_methods(load_fixture("Fields.java"));
    REQUIRE(!result.units.empty());
    const std::string& header = result.units[0].context_header;
    auto p1 = header.find("MARKER");
    auto p2 = header.find("items;");
    auto p3 = header.find("count = 3;");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p3 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
}

TEST_CASE("every import line appears in every unit header") {
    auto result = splitter::parse_source_tree(kCorpus);
    std::map<std::string, std::vector<std::string>> imports_by_file;
    for (const CodeUnit& u : result.units) {
        auto& imports = imports_by_file[u.source_path];
        if (imports.empty()) {
            std::string text = util::read_file(kCorpus / u.source_path);
            std::istringstream in(text);
            std::string line;
            while (std::getline(in, line)) {
                std::string t = util::trim(line);
                if (util::starts_with(t, "import ")) imports.push_back(t);
            }
        }
        for (const std::string& imp : imports) {
            CHECK_MESSAGE(u.context_header.find(imp) != std::string::npos,
                          u.source_path, " unit ", u.method_name, " missing: ", imp);
        }
    }
}

TEST_CASE("corpus counts match the independent oracle and frozen values") {
    for (const auto& [name, frozen] : kFrozenCounts) {
        auto file = load_fixture(name);
        int oracle = testsupport::count_method_declarations(file.text);
        auto result = splitter::extract_methods(file);
        if (frozen < 0) {
            CHECK_MESSAGE(oracle == -1, name, " oracle should flag unbalanced braces");
            CHECK_MESSAGE(result.units.empty(), name, " should yield zero units");
            CHECK_MESSAGE(!result.warnings.empty(), name, " should warn");
        } else {
            CHECK_MESSAGE(oracle == frozen, name, ": oracle=", oracle, " frozen=", frozen);
            CHECK_MESSAGE(static_cast<int>(result.units.size()) == frozen, name,
                          ": impl=", result.units.size(), " frozen=", frozen);
        }
    }
}

TEST_CASE("span fidelity over the whole corpus") {
    auto result = splitter::parse_source_tree(kCorpus);
    REQUIRE(!result.units.empty());
    std::map<std::string, std::string> texts;
    for (const CodeUnit& u : result.units) {
        auto [it, inserted] = texts.try_emplace(u.source_path, "");
        if (inserted) it->second = util::read_file(kCorpus / u.source_path);
        const std::string& text = it->second;
        REQUIRE(u.span_end <= text.size());
        CHECK(text.substr(u.span_begin, u.span_end - u.span_begin) == u.body_text);
    }
}

TEST_CASE("no leakage: spans of same-file units never overlap same-depth siblings") {
    auto result = splitter::parse_source_tree(kCorpus);
    std::map<std::string, std::vector<const CodeUnit*>> by_class;
    for (const CodeUnit& u : result.units) {
        by_class[u.source_path + "#" + u.class_name].push_back(&u);
    }
    for (const auto& [key, units] : by_class) {
        for (std::size_t i = 0; i < units.size(); ++i) {
            for (std::size_t j = i + 1; j < units.size(); ++j) {
                bool disjoint = units[i]->span_end <= units[j]->span_begin ||
                                units[j]->span_end <= units[i]->span_begin;
                CHECK_MESSAGE(disjoint, key, " has overlapping member spans");
            }
        }
    }
}

TEST_CASE("determinism across runs including unit ids") {
    auto a = splitter::parse_source_tree(kCorpus);
    auto b = splitter::parse_source_tree(kCorpus);
    REQUIRE(a.units.size() == b.units.size());
    CHECK(a.units == b.units);
}

TEST_CASE("lexical parameter types") {
    SourceFile file{"T.java",
                    "import java.util.List;\n"
                    "class T { void m(final List<String> xs, int[] grid, String s, "
                    "Object... rest) {} }"};
    auto result = splitter::extract_methods(file);
    REQUIRE(result.units.size() == 1);
    const auto& types = result.units[0].param_types;
    REQUIRE(types.size() == 4);
    CHECK(types[0] == "List<String>");
    CHECK(types[1] == "int[]");
    CHECK(types[2] == "String");
    CHECK(types[3] == "Object...");
    CHECK(result.units[0].param_count == 4);
}

TEST_CASE("anonymous class methods stay inside the enclosing unit") {
    auto result = splitter::extract_methods(load_fixture("Anonymous.java"));
    REQUIRE(result.units.size() == 2);
    const CodeUnit* schedule = nullptr;
    for (const CodeUnit& u : result.units) {
        if (u.method_name == "schedule") schedule = &u;
    }
    REQUIRE(schedule != nullptr);
    CHECK(schedule->body_text.find("public void run()") != std::string::npos);
}

TEST_CASE("tree errors") {
    CHECK_THROWS_AS(splitter::parse_source_tree(kCorpus / "does-not-exist"),
                    splitter::RootNotFound);
    auto empty_dir = std::filesystem::temp_directory_path() / "tracerag_empty_tree";
    std::filesystem::create_directories(empty_dir);
    CHECK_THROWS_AS(splitter::parse_source_tree(empty_dir), splitter::EmptyTree);
}

TEST_CASE("oversize units are emitted and flagged") {
    std::string big_body = "void big() { int x = 0;";
    while (big_body.size() < 9000) big_body += " x = x + 1;";
    big_body += " }";
    SourceFile file{"Big.java", "class Big { " + big_body + " }"};
    auto result = splitter::extract_methods(file);
    REQUIRE(result.units.size() == 1);
    CHECK(result.units[0].oversize);
    CHECK(result.units[0].body_text.size() > splitter::kOversizeChars);
}

TEST_CASE("unit ids are stable digests of identity fields") {
    SourceFile file{"A.java", "class A { void m(){} }"};
    auto r1 = splitter::extract_methods(file);
    auto r2 = splitter::extract_methods(file);
    REQUIRE(r1.units.size() == 1);
    CHECK(r1.units[0].unit_id == r2.units[0].unit_id);
    CHECK(r1.units[0].unit_id.size() == 16);

    SourceFile moved{"B.java", "class A { void m(){} }"};
    auto r3 = splitter::extract_methods(moved);
    CHECK(r3.units[0].unit_id != r1.units[0].unit_id); // path participates
}

TEST_CASE("mutation fuzz: truncations and byte flips never break span fidelity") {
    std::vector<std::string> seeds;
    for (const auto& [name, _] : kFrozenCounts) {
        seeds.push_back(util::read_file(kCorpus / name));
    }
    std::mt19937 rng(97531);
    for (int round = 0; round < 400; ++round) {
        std::string text = seeds[rng() % seeds.size()];
        switch (rng() % 4) {
        case 0: // truncate anywhere
            text = text.substr(0, rng() % (text.size() + 1));
            break;
        case 1: { // flip a byte to a structural character
            if (!text.empty()) {
                const char structural[] = {'{', '}', '(', ')', '"', ';', '@', '<'};
                text[rng() % text.size()] = structural[rng() % sizeof(structural)];
            }
            break;
        }
        case 2: { // splice two files
            const std::string& other = seeds[rng() % seeds.size()];
            text = text.substr(0, rng() % (text.size() + 1)) +
                   other.substr(rng() % (other.size() + 1));
            break;
        }
        default: { // delete a span
            if (text.size() > 2) {
                std::size_t from = rng() % text.size();
                std::size_t len = rng() % (text.size() - from);
                text.erase(from, len);
            }
            break;
        }
        }
        if (text.empty()) continue;
        auto result = splitter::extract_methods({"fuzz.java", text});
        for (const auto& u : result.units) {
            REQUIRE(u.span_end <= text.size());
            REQUIRE(u.span_begin < u.span_end);
            CHECK(text.substr(u.span_begin, u.span_end - u.span_begin) == u.body_text);
            CHECK(u.param_count == u.param_types.size());
            CHECK(!u.unit_id.empty());
        }
    }
}

TEST_CASE("fields declared after a nested class still reach the chain headers") {
    SourceFile file{"Late.java",
                    "package p;\nclass A { class B { void g(){} } int late = 9; }"};
    auto result = splitter::extract_methods(file);
    REQUIRE(result.units.size() == 1);
    CHECK(result.units[0].class_name == "p.A$B");
    CHECK(result.units[0].context_header.find("int late = 9;") != std::string::npos);
    CHECK(result.units[0].context_header.find("class A {") != std::string::npos);
    CHECK(result.units[0].context_header.find("class B {") != std::string::npos);
}
