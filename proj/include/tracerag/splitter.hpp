#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracerag::splitter {

struct SourceFile {
    std::string path; // relative to the app root
    std::string text; // full UTF-8 contents
};

// One extracted method (or constructor) together with the surrounding
// context needed to read it standalone.
struct CodeUnit {
    std::string unit_id;
    std::string class_name; // package-qualified, inner classes joined with '$'
    std::string method_name;
    std::size_t param_count = 0;
    std::vector<std::string> param_types; // lexical type names as written
    std::string context_header;
    std::string body_text; // first modifier/return-type token through closing brace
    std::string source_path;
    std::size_t span_begin = 0; // byte offsets into the original file
    std::size_t span_end = 0;
    bool oversize = false; // body_text longer than kOversizeChars

    bool operator==(const CodeUnit&) const = default;
};

inline constexpr std::size_t kOversizeChars = 8000;

struct ParseWarning {
    std::string path;
    std::string message;
};

struct ParseResult {
    std::vector<CodeUnit> units;
    std::vector<ParseWarning> warnings;
};

struct RootNotFound : std::runtime_error {
    explicit RootNotFound(const std::string& root)
        : std::runtime_error("source root not found: " + root) {}
};

struct EmptyTree : std::runtime_error {
    explicit EmptyTree(const std::string& root)
        : std::runtime_error("no .java files under: " + root) {}
};

// Extracts every brace-bodied method and constructor of one file, at any
// class-nesting depth. Methods of anonymous classes and of classes declared
// inside method bodies stay inside the enclosing unit; initializer blocks
// and bodiless declarations (abstract/native/interface signatures) are not
// emitted. A file with unbalanced braces yields zero units and a warning.
ParseResult extract_methods(const SourceFile& file);

// Runs extract_methods over every *.java file under root, in lexicographic
// path order. Per-file failures become warnings, never aborts.
ParseResult parse_source_tree(const std::filesystem::path& root);

// Most frequent package declaration in the tree; ties break toward the
// shorter, then lexicographically smaller, name. Empty when none found.
std::string derive_package_name(const std::vector<CodeUnit>& units);

} // namespace tracerag::splitter
