#pragma once

#include "tracerag/llm.hpp"
#include "tracerag/splitter.hpp"
#include "tracerag/vecstore.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tracerag::pipeline {

struct AppMeta {
    std::string app_id;
    std::string package_name; // derived from the tree when empty
    std::string sha256;       // 64 lowercase hex chars; tree digest when empty
    std::filesystem::path source_root;
};

struct PipelineConfig {
    bool split_and_clean = true;
    bool use_descriptions = true;
    std::size_t oversize_char_cap = 8000;
    int concurrency = 4;
};

struct IngestionStats {
    std::size_t unit_count = 0;
    std::size_t cleaned_count = 0;
    std::size_t described_count = 0;
    std::size_t clean_fallbacks = 0;
    std::size_t description_fallbacks = 0;
    llm::TokenUsage tokens;
    std::vector<std::string> warnings;
};

// Audit trail: raw and cleaned text plus the prompt digests behind every
// record, written next to the store file.
struct ProvenanceEntry {
    std::string record_id;
    std::string raw_text;
    std::string cleaned_text;
    std::string description;
    std::string clean_prompt_digest;
    std::string describe_prompt_digest;
    bool clean_fallback = false;
    bool description_fallback = false;
};

struct IngestResult {
    vec::Store store;
    IngestionStats stats;
    std::vector<ProvenanceEntry> provenance;
};

struct CleanOutcome {
    std::string text;
    std::string prompt_digest;
    bool fallback = false;
};

struct DescribeOutcome {
    std::string text;
    std::string prompt_digest;
    bool fallback = false;
};

// Cleanser pass; provider failure or empty output falls back to the input
// text so no unit is ever lost.
CleanOutcome clean_unit(llm::LlmGateway& gateway, const splitter::CodeUnit& unit);

// Describer pass over cleaned text; oversize inputs are truncated at
// cfg.oversize_char_cap with an explicit marker before prompting. An empty
// reply is retried once, then falls back to a prefix of the cleaned text.
DescribeOutcome describe_unit(llm::LlmGateway& gateway, const std::string& cleaned,
                              const splitter::CodeUnit& unit, std::size_t oversize_char_cap);

IngestResult ingest_app(const AppMeta& meta, const PipelineConfig& cfg, llm::LlmGateway& gateway,
                        vec::EmbeddingProvider& embedder);

void write_provenance(const std::filesystem::path& path,
                      const std::vector<ProvenanceEntry>& entries);

// store.jsonl -> store.prov.jsonl, next to the store file
std::filesystem::path provenance_path_for(const std::filesystem::path& store_path);

// sha256 over every .java file (relative path + contents) in lexicographic
// order; stands in for the APK hash when none is supplied.
std::string tree_digest(const std::filesystem::path& root);

// Marker appended when an oversize snippet is cut before prompting.
inline constexpr std::string_view kTruncationMarker = "\n[TRUNCATED]";

} // namespace tracerag::pipeline
