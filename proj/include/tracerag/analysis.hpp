#pragma once

#include "tracerag/llm.hpp"
#include "tracerag/vecstore.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tracerag::analysis {

enum class BehaviorCategory {
    information_theft_and_abuse,
    monetary_fraud_and_financial_abuse,
    privilege_abuse_and_system_exploitation,
};

std::string_view category_name(BehaviorCategory c);
std::optional<BehaviorCategory> category_from_name(std::string_view name);

struct QuerySpec {
    std::string query_id; // Q1..Q11
    BehaviorCategory category;
    std::string text;

    bool operator==(const QuerySpec&) const = default;
};

// The 11-query behavior battery; Q1-Q4 information theft, Q5-Q7 monetary
// fraud, Q8-Q11 privilege abuse.
const std::vector<QuerySpec>& default_queries();

struct FollowUpQuery {
    std::string method_name;
    std::string class_name;
    std::optional<std::int64_t> param_count;

    bool operator==(const FollowUpQuery&) const = default;
};

struct Conclusion {
    std::string finding;
    bool is_malicious = false;
    bool inconclusive = false;
    std::vector<std::string> code_paths;

    bool operator==(const Conclusion&) const = default;
};

struct TurnOutcome {
    enum class Kind { conclusion, followup, abort };
    Kind kind = Kind::conclusion;
    Conclusion conclusion;   // kind == conclusion
    FollowUpQuery followup;  // kind == followup
    std::string abort_reason; // kind == abort

    bool operator==(const TurnOutcome&) const = default;
};

struct AnalysisTurn {
    int turn_index = 0; // 1-based
    std::string input_snippet_id;
    std::string analyzer_output;
    TurnOutcome outcome;

    bool operator==(const AnalysisTurn&) const = default;
};

struct AnalysisSession {
    std::string query_id;
    std::string seed_snippet_id;
    std::vector<AnalysisTurn> turns;
    std::vector<std::string> visited; // in visit order, no duplicates
    Conclusion final_conclusion;      // synthesized and inconclusive on abort
    bool aborted = false;
    std::string abort_reason;

    bool operator==(const AnalysisSession&) const = default;
};

struct QueryOutcome {
    QuerySpec query;
    bool no_relevant_code = false;
    std::vector<AnalysisSession> sessions;

    bool operator==(const QueryOutcome&) const = default;
};

struct AnalysisConfig {
    std::size_t top_k = 5;
    int max_turns = 5; // 1 reproduces the single-turn ablation
};

struct AnalysisStats {
    std::int64_t followups_resolved = 0;
    std::vector<std::string> warnings;
};

// Structural read of an analyzer reply: the trailing fenced block either
// concludes (VERDICT/PATHS) or requests another method (FOLLOWUP). Returns
// nullopt when no well-formed block is present.
std::optional<TurnOutcome> parse_terminal_block(const std::string& analyzer_output);

// Full contract: structural parse first, QueryReviewer classification as the
// fallback; anything still malformed becomes an inconclusive conclusion with
// the raw text preserved.
TurnOutcome parse_terminal(llm::LlmGateway& gateway, const std::string& analyzer_output,
                           AnalysisStats& stats);

std::vector<vec::RetrievalResult> retrieve_stage(const vec::Store& store,
                                                 vec::EmbeddingProvider& embedder,
                                                 const QuerySpec& query, std::size_t top_k);

// RelevanceReviewer KEEP/DROP gate over retrieval hits; an unparseable
// verdict is a conservative DROP. Empty result means NoRelevantCode.
std::vector<vec::RetrievalResult> relevance_filter(llm::LlmGateway& gateway,
                                                   const vec::Store& store, const QuerySpec& query,
                                                   const std::vector<vec::RetrievalResult>& hits,
                                                   AnalysisStats& stats);

// Metadata-filtered lookup for a follow-up: (method, class[, params]),
// relaxed to method-only, then NotFound (nullopt). Collisions go through the
// CollisionReviewer.
std::optional<std::string> resolve_followup(llm::LlmGateway& gateway, const vec::Store& store,
                                            const FollowUpQuery& f, const std::string& context,
                                            AnalysisStats& stats);

AnalysisSession analyze_snippet(llm::LlmGateway& gateway, const vec::Store& store,
                                const QuerySpec& query, const std::string& seed_id,
                                const AnalysisConfig& cfg, AnalysisStats& stats);

struct BatteryResult {
    std::vector<QueryOutcome> outcomes; // always in Q1..Q11 order
    AnalysisStats stats;
};

BatteryResult run_battery(llm::LlmGateway& gateway, const vec::Store& store,
                          vec::EmbeddingProvider& embedder, const std::vector<QuerySpec>& queries,
                          const AnalysisConfig& cfg);

// JSONL (one object per query outcome, battery order).
std::string outcomes_to_jsonl(const std::vector<QueryOutcome>& outcomes);
std::vector<QueryOutcome> outcomes_from_jsonl(const std::string& text);

// Query file format: one {query_id, category, text} object per line.
std::vector<QuerySpec> queries_from_jsonl(const std::string& text);

} // namespace tracerag::analysis
