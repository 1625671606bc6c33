#pragma once

#include "tracerag/analysis.hpp"
#include "tracerag/llm.hpp"
#include "tracerag/vecstore.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace tracerag::report {

struct WrongQueryCount : std::runtime_error {
    explicit WrongQueryCount(std::size_t got)
        : std::runtime_error("final report needs exactly 11 query reports, got " +
                             std::to_string(got)) {}
};

struct CodeReport {
    std::string query_id;
    std::string seed_snippet_id;
    std::string narrative; // Organizer output (or turn summaries on fallback)
    std::vector<std::string> code_paths;
    bool is_malicious = false;
    bool inconclusive = false;
    std::vector<std::string> referenced_snippet_ids;
    bool organizer_fallback = false;
    std::vector<std::string> warnings;

    bool operator==(const CodeReport&) const = default;
};

struct QueryReport {
    analysis::QuerySpec query;
    std::vector<CodeReport> code_reports;
    bool no_relevant_code = false;
    bool detected = false; // true iff some code report is malicious

    bool operator==(const QueryReport&) const = default;
};

struct AppInfo {
    std::string package_name;
    std::string sha256;
    std::string app_id;
    std::size_t unit_count = 0;

    bool operator==(const AppInfo&) const = default;
};

struct Verdict {
    bool is_malicious = false;
    std::set<analysis::BehaviorCategory> detected_categories;
    std::map<std::string, bool> per_query; // Q1..Q11

    bool operator==(const Verdict&) const = default;
};

struct FinalReport {
    AppInfo app_info;
    std::string overall_summary;
    std::vector<QueryReport> detailed_analyses; // Q1..Q11 order
    std::string conclusion;
    Verdict verdict;

    bool operator==(const FinalReport&) const = default;
};

// Organizer narrative plus structural fields copied from the session's
// terminal conclusion. A malicious conclusion without resolvable code paths
// is demoted to inconclusive: detections must be explanation-backed.
CodeReport build_code_report(llm::LlmGateway& gateway, const vec::Store& store,
                             const analysis::AnalysisSession& session);

QueryReport build_query_report(llm::LlmGateway& gateway, const vec::Store& store,
                               const analysis::QueryOutcome& outcome);

FinalReport build_final_report(llm::LlmGateway& gateway, const AppInfo& app_info,
                               const std::vector<QueryReport>& query_reports);

std::string render_markdown(const FinalReport& report);

// lossless structured encoding
std::string render_structured(const FinalReport& report);
FinalReport parse_structured(const std::string& text);

std::string verdict_to_json(const AppInfo& app_info, const Verdict& verdict);

} // namespace tracerag::report
