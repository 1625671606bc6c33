#include "tracerag/analysis.hpp"

#include "tracerag/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace tracerag::analysis {

using nlohmann::json;

std::string_view category_name(BehaviorCategory c) {
    switch (c) {
    case BehaviorCategory::information_theft_and_abuse: return "InformationTheftAndAbuse";
    case BehaviorCategory::monetary_fraud_and_financial_abuse:
        return "MonetaryFraudAndFinancialAbuse";
    case BehaviorCategory::privilege_abuse_and_system_exploitation:
        return "PrivilegeAbuseAndSystemExploitation";
    }
    return "Unknown";
}

std::optional<BehaviorCategory> category_from_name(std::string_view name) {
    for (BehaviorCategory c :
         {BehaviorCategory::information_theft_and_abuse,
          BehaviorCategory::monetary_fraud_and_financial_abuse,
          BehaviorCategory::privilege_abuse_and_system_exploitation}) {
        if (category_name(c) == name) return c;
    }
    return std::nullopt;
}

const std::vector<QuerySpec>& default_queries() {
    static const std::vector<QuerySpec> specs = [] {
        using C = BehaviorCategory;
        std::vector<QuerySpec> q;
        q.push_back({"Q1", C::information_theft_and_abuse,
                     "Does the application access or collect sensitive user data (e.g., SMS, "
                     "contacts, location, or device identifiers)?"});
        q.push_back({"Q2", C::information_theft_and_abuse,
                     "Does the application capture user activity through screen recording or "
                     "screenshots?"});
        q.push_back({"Q3", C::information_theft_and_abuse,
                     "Does the application connect to suspicious external URLs or perform "
                     "background downloads without user interaction?"});
        q.push_back({"Q4", C::information_theft_and_abuse,
                     "Is obfuscation or encryption used to conceal communication endpoints or "
                     "downloaded content?"});
        q.push_back({"Q5", C::monetary_fraud_and_financial_abuse,
                     "Does the application send messages or make calls that may incur charges "
                     "without user consent?"});
        q.push_back({"Q6", C::monetary_fraud_and_financial_abuse,
                     "Does the UI mislead users into clicking ads or subscribing to services?"});
        q.push_back({"Q7", C::monetary_fraud_and_financial_abuse,
                     "Is there evidence of tampering with in-app purchases or payment "
                     "processes?"});
        q.push_back({"Q8", C::privilege_abuse_and_system_exploitation,
                     "Does the application request elevated privileges (e.g., Accessibility or "
                     "Device Administrator) or attempt to maintain persistence?"});
        q.push_back({"Q9", C::privilege_abuse_and_system_exploitation,
                     "Does the application support remote command execution or include dynamic "
                     "code loading and anti-analysis techniques?"});
        q.push_back({"Q10", C::privilege_abuse_and_system_exploitation,
                     "Is there evidence of root-level activity, such as executing system "
                     "commands or interacting with system partitions?"});
        q.push_back({"Q11", C::privilege_abuse_and_system_exploitation,
                     "Does the application use native libraries or known exploits to escalate "
                     "privileges or bypass system security policies?"});
        return q;
    }();
    return specs;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

// last ``` ... ``` block in the text, if any
std::optional<std::string> last_fenced_block(const std::string& text) {
    auto close = text.rfind("```");
    if (close == std::string::npos || close == 0) return std::nullopt;
    auto open = text.rfind("```", close - 1);
    if (open == std::string::npos || open == close) return std::nullopt;
    std::size_t body_start = open + 3;
    return text.substr(body_start, close - body_start);
}

std::string before_last_fence(const std::string& text) {
    auto close = text.rfind("```");
    if (close == std::string::npos) return util::trim(text);
    auto open = text.rfind("```", close >= 1 ? close - 1 : 0);
    if (open == std::string::npos) return util::trim(text);
    return util::trim(text.substr(0, open));
}

std::optional<TurnOutcome> parse_followup_line(const std::string& line) {
    auto pos = line.find("FOLLOWUP:");
    if (pos == std::string::npos) return std::nullopt;
    FollowUpQuery f;
    std::istringstream in(line.substr(pos + 9));
    std::string token;
    while (in >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        std::string key = token.substr(0, eq);
        std::string value = token.substr(eq + 1);
        if (key == "method") {
            f.method_name = value;
        } else if (key == "class") {
            f.class_name = value;
        } else if (key == "params") {
            try {
                f.param_count = std::stoll(value);
            } catch (...) {
                // "params=?" or similar: treated as unspecified
            }
        }
    }
    if (f.method_name.empty() || f.class_name.empty()) return std::nullopt;
    TurnOutcome out;
    out.kind = TurnOutcome::Kind::followup;
    out.followup = std::move(f);
    return out;
}

} // namespace

std::optional<TurnOutcome> parse_terminal_block(const std::string& analyzer_output) {
    auto block = last_fenced_block(analyzer_output);
    if (!block) return std::nullopt;

    std::vector<std::string> lines = split_lines(*block);
    for (const std::string& raw : lines) {
        std::string line = util::trim(raw);
        if (line.empty()) continue;
        if (auto followup = parse_followup_line(line)) {
            return followup;
        }
        auto pos = line.find("VERDICT:");
        if (pos == std::string::npos) continue;

        std::string verdict = util::to_lower(util::trim(line.substr(pos + 8)));
        Conclusion c;
        if (verdict == "malicious") {
            c.is_malicious = true;
        } else if (verdict == "benign") {
            c.is_malicious = false;
        } else if (verdict == "inconclusive") {
            c.inconclusive = true;
        } else {
            return std::nullopt; // unknown verdict word: malformed block
        }
        // PATHS: section follows the verdict line
        bool in_paths = false;
        for (const std::string& raw2 : lines) {
            std::string l2 = util::trim(raw2);
            if (l2.find("PATHS:") != std::string::npos) {
                in_paths = true;
                continue;
            }
            if (!in_paths || l2.empty()) continue;
            if (l2.find("VERDICT:") != std::string::npos) continue;
            if (util::starts_with(l2, "- ")) l2 = util::trim(l2.substr(2));
            if (!l2.empty()) c.code_paths.push_back(l2);
        }
        c.finding = before_last_fence(analyzer_output);
        TurnOutcome out;
        out.kind = TurnOutcome::Kind::conclusion;
        out.conclusion = std::move(c);
        return out;
    }
    return std::nullopt;
}

namespace {

// best-effort extraction from prose like "... the method j defined in
// class b ..." when the reviewer says the output is a follow-up
std::optional<FollowUpQuery> extract_followup_from_prose(const std::string& text) {
    auto grab_after = [&](std::string_view marker) -> std::string {
        auto pos = text.find(marker);
        if (pos == std::string::npos) return "";
        std::size_t i = pos + marker.size();
        while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) ||
                                   text[i] == '"' || text[i] == '\'' || text[i] == '`'))
            ++i;
        std::size_t j = i;
        while (j < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_' ||
                text[j] == '$' || text[j] == '.'))
            ++j;
        std::string word(text.substr(i, j - i));
        while (!word.empty() && word.back() == '.') word.pop_back();
        return word;
    };
    FollowUpQuery f;
    f.method_name = grab_after("method ");
    f.class_name = grab_after("class ");
    if (f.method_name.empty() || f.class_name.empty()) return std::nullopt;
    return f;
}

} // namespace

TurnOutcome parse_terminal(llm::LlmGateway& gateway, const std::string& analyzer_output,
                           AnalysisStats& stats) {
    if (auto structured = parse_terminal_block(analyzer_output)) {
        return *structured;
    }

    auto malformed = [&](const std::string& why) {
        stats.warnings.push_back("analyzer output malformed (" + why + "), treated as inconclusive");
        TurnOutcome out;
        out.kind = TurnOutcome::Kind::conclusion;
        out.conclusion.inconclusive = true;
        out.conclusion.finding = analyzer_output;
        return out;
    };

    std::string classification;
    try {
        auto resp = gateway.ask(llm::Role::query_reviewer, {{"output", analyzer_output}});
        classification = util::to_lower(resp.text);
    } catch (const std::exception& e) {
        return malformed(std::string("query reviewer unavailable: ") + e.what());
    }

    if (classification.find("followup") != std::string::npos ||
        classification.find("follow-up") != std::string::npos) {
        if (auto f = extract_followup_from_prose(analyzer_output)) {
            TurnOutcome out;
            out.kind = TurnOutcome::Kind::followup;
            out.followup = *f;
            return out;
        }
        return malformed("follow-up without target");
    }
    return malformed("no terminal block");
}

// ---------------------------------------------------------------------------

std::vector<vec::RetrievalResult> retrieve_stage(const vec::Store& store,
                                                 vec::EmbeddingProvider& embedder,
                                                 const QuerySpec& query, std::size_t top_k) {
    vec::EmbeddingVector qvec = embedder.embed(query.text);
    return store.search(qvec, top_k);
}

std::vector<vec::RetrievalResult> relevance_filter(llm::LlmGateway& gateway,
                                                   const vec::Store& store, const QuerySpec& query,
                                                   const std::vector<vec::RetrievalResult>& hits,
                                                   AnalysisStats& stats) {
    std::vector<vec::RetrievalResult> kept;
    for (const vec::RetrievalResult& hit : hits) {
        auto rec = store.get(hit.record_id);
        if (!rec) continue;
        bool keep = false;
        try {
            auto resp = gateway.ask(llm::Role::relevance_reviewer,
                                    {{"query", query.text},
                                     {"code", rec->code_text},
                                     {"description", rec->description}});
            bool parsed = false;
            for (const std::string& raw : split_lines(resp.text)) {
                std::string line = util::trim(raw);
                auto pos = line.find("VERDICT:");
                if (pos == std::string::npos) continue;
                std::string v = util::to_lower(util::trim(line.substr(pos + 8)));
                if (v == "keep") {
                    keep = true;
                    parsed = true;
                } else if (v == "drop") {
                    keep = false;
                    parsed = true;
                }
                break;
            }
            if (!parsed) {
                stats.warnings.push_back("unparseable relevance verdict for " + hit.record_id +
                                         ", dropped");
            }
        } catch (const std::exception& e) {
            stats.warnings.push_back("relevance review failed for " + hit.record_id + " (" +
                                     e.what() + "), dropped");
        }
        if (keep) kept.push_back(hit);
    }
    return kept;
}

std::optional<std::string> resolve_followup(llm::LlmGateway& gateway, const vec::Store& store,
                                            const FollowUpQuery& f, const std::string& context,
                                            AnalysisStats& stats) {
    vec::MetadataFilter primary;
    primary.method_name = f.method_name;
    primary.class_name = f.class_name;
    if (f.param_count) primary.param_count = *f.param_count;

    std::set<std::string> ids = store.filter_candidates(primary);
    if (ids.empty()) {
        // class names mutate under obfuscation; retry on method name alone
        vec::MetadataFilter relaxed;
        relaxed.method_name = f.method_name;
        ids = store.filter_candidates(relaxed);
    }
    if (ids.empty()) {
        return std::nullopt;
    }
    if (ids.size() == 1) {
        return *ids.begin();
    }

    std::vector<std::string> ordered(ids.begin(), ids.end());
    std::string candidates;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        auto rec = store.get(ordered[i]);
        candidates += std::to_string(i + 1) + ". " + rec->class_name + "." + rec->method_name +
                      " (params: " + std::to_string(rec->param_count) + ")\n";
        candidates += rec->code_text.substr(0, 200) + "\n\n";
    }
    try {
        auto resp = gateway.ask(llm::Role::collision_reviewer,
                                {{"context", context}, {"candidates", candidates}});
        for (const std::string& raw : split_lines(resp.text)) {
            std::string line = util::trim(raw);
            auto pos = line.find("CHOICE:");
            if (pos == std::string::npos) continue;
            try {
                long n = std::stol(util::trim(line.substr(pos + 7)));
                if (n >= 1 && static_cast<std::size_t>(n) <= ordered.size()) {
                    return ordered[static_cast<std::size_t>(n) - 1];
                }
            } catch (...) {
            }
            break;
        }
        stats.warnings.push_back("collision reviewer gave no usable choice, using first candidate");
    } catch (const std::exception& e) {
        stats.warnings.push_back(std::string("collision review failed (") + e.what() +
                                 "), using first candidate");
    }
    return ordered.front();
}

// ---------------------------------------------------------------------------

namespace {

std::string turn_summary(const AnalysisTurn& turn, const vec::IndexedRecord& rec) {
    std::string text = before_last_fence(turn.analyzer_output);
    // single line, bounded
    std::string squashed;
    bool space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
        } else {
            if (space && !squashed.empty()) squashed.push_back(' ');
            space = false;
            squashed.push_back(c);
        }
    }
    if (squashed.size() > 600) squashed = squashed.substr(0, 600) + "...";
    return "turn " + std::to_string(turn.turn_index) + " (" + rec.class_name + "." +
           rec.method_name + "): " + squashed;
}

Conclusion synthesize_conclusion(const std::vector<std::string>& summaries,
                                 const std::string& reason) {
    Conclusion c;
    c.inconclusive = true;
    std::string joined;
    for (const std::string& s : summaries) {
        if (!joined.empty()) joined += "\n";
        joined += s;
    }
    c.finding = joined.empty() ? "analysis aborted (" + reason + ") before any finding"
                               : joined + "\nanalysis aborted (" + reason + ")";
    return c;
}

} // namespace

AnalysisSession analyze_snippet(llm::LlmGateway& gateway, const vec::Store& store,
                                const QuerySpec& query, const std::string& seed_id,
                                const AnalysisConfig& cfg, AnalysisStats& stats) {
    AnalysisSession session;
    session.query_id = query.query_id;
    session.seed_snippet_id = seed_id;
    session.visited.push_back(seed_id);

    std::vector<std::string> summaries;
    std::string current = seed_id;

    for (int turn_index = 1; turn_index <= cfg.max_turns; ++turn_index) {
        auto rec = store.get(current);
        if (!rec) {
            session.aborted = true;
            session.abort_reason = "missing snippet " + current;
            session.turns.push_back(
                {turn_index, current, "", {TurnOutcome::Kind::abort, {}, {}, session.abort_reason}});
            break;
        }

        std::string prior = summaries.empty() ? "(first turn)" : "";
        for (const std::string& s : summaries) {
            if (!prior.empty()) prior += "\n";
            prior += s;
        }

        AnalysisTurn turn;
        turn.turn_index = turn_index;
        turn.input_snippet_id = current;
        try {
            auto resp = gateway.ask(llm::Role::analyzer, {{"query", query.text},
                                                          {"class_name", rec->class_name},
                                                          {"method_name", rec->method_name},
                                                          {"code", rec->code_text},
                                                          {"description", rec->description},
                                                          {"prior_summaries", prior}});
            turn.analyzer_output = resp.text;
        } catch (const std::exception& e) {
            turn.outcome.kind = TurnOutcome::Kind::abort;
            turn.outcome.abort_reason = std::string("provider: ") + e.what();
            session.turns.push_back(turn);
            session.aborted = true;
            session.abort_reason = turn.outcome.abort_reason;
            break;
        }

        turn.outcome = parse_terminal(gateway, turn.analyzer_output, stats);

        if (turn.outcome.kind == TurnOutcome::Kind::conclusion) {
            session.turns.push_back(turn);
            session.final_conclusion = turn.outcome.conclusion;
            return session;
        }

        // follow-up
        if (turn_index == cfg.max_turns) {
            // out of budget: the follow-up is never resolved
            turn.outcome.kind = TurnOutcome::Kind::abort;
            turn.outcome.abort_reason = "budget";
            session.turns.push_back(turn);
            session.aborted = true;
            session.abort_reason = "budget";
            break;
        }

        session.turns.push_back(turn);
        summaries.push_back(turn_summary(turn, *rec));

        const FollowUpQuery& f = turn.outcome.followup;
        std::string context = "query " + query.query_id + " (" + query.text + "), analyzing " +
                              rec->class_name + "." + rec->method_name +
                              "; requested method=" + f.method_name + " class=" + f.class_name;
        auto resolved = resolve_followup(gateway, store, f, context, stats);
        if (!resolved) {
            summaries.push_back("implementation unavailable: method=" + f.method_name +
                                " class=" + f.class_name);
            continue; // re-analyze the current snippet knowing the gap
        }
        if (std::find(session.visited.begin(), session.visited.end(), *resolved) !=
            session.visited.end()) {
            session.turns.push_back({turn_index + 1,
                                     *resolved,
                                     "",
                                     {TurnOutcome::Kind::abort, {}, {}, "cycle"}});
            session.aborted = true;
            session.abort_reason = "cycle";
            break;
        }
        stats.followups_resolved++;
        session.visited.push_back(*resolved);
        current = *resolved;
    }

    if (session.final_conclusion.finding.empty() && !session.aborted) {
        // loop exhausted without conclusion (only reachable via unresolved
        // follow-ups on the final turn)
        session.aborted = true;
        session.abort_reason = "budget";
    }
    if (session.aborted) {
        session.final_conclusion = synthesize_conclusion(summaries, session.abort_reason);
    }
    return session;
}

BatteryResult run_battery(llm::LlmGateway& gateway, const vec::Store& store,
                          vec::EmbeddingProvider& embedder, const std::vector<QuerySpec>& queries,
                          const AnalysisConfig& cfg) {
    BatteryResult result;
    for (const QuerySpec& query : queries) {
        QueryOutcome outcome;
        outcome.query = query;
        try {
            auto hits = retrieve_stage(store, embedder, query, cfg.top_k);
            auto kept = relevance_filter(gateway, store, query, hits, result.stats);
            if (kept.empty()) {
                outcome.no_relevant_code = true;
            } else {
                for (const vec::RetrievalResult& hit : kept) {
                    outcome.sessions.push_back(
                        analyze_snippet(gateway, store, query, hit.record_id, cfg, result.stats));
                }
            }
        } catch (const std::exception& e) {
            outcome.no_relevant_code = true;
            result.stats.warnings.push_back(query.query_id + " failed: " + e.what());
        }
        result.outcomes.push_back(std::move(outcome));
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

json conclusion_to_json(const Conclusion& c) {
    return json{{"finding", c.finding},
                {"is_malicious", c.is_malicious},
                {"inconclusive", c.inconclusive},
                {"code_paths", c.code_paths}};
}

Conclusion conclusion_from_json(const json& j) {
    Conclusion c;
    c.finding = j.at("finding").get<std::string>();
    c.is_malicious = j.at("is_malicious").get<bool>();
    c.inconclusive = j.at("inconclusive").get<bool>();
    c.code_paths = j.at("code_paths").get<std::vector<std::string>>();
    return c;
}

json outcome_to_json(const TurnOutcome& o) {
    json j{{"kind", o.kind == TurnOutcome::Kind::conclusion ? "conclusion"
                    : o.kind == TurnOutcome::Kind::followup ? "followup"
                                                            : "abort"}};
    if (o.kind == TurnOutcome::Kind::conclusion) {
        j["conclusion"] = conclusion_to_json(o.conclusion);
    } else if (o.kind == TurnOutcome::Kind::followup) {
        j["followup"] = json{{"method_name", o.followup.method_name},
                             {"class_name", o.followup.class_name}};
        if (o.followup.param_count) j["followup"]["param_count"] = *o.followup.param_count;
    } else {
        j["abort_reason"] = o.abort_reason;
    }
    return j;
}

TurnOutcome outcome_from_json(const json& j) {
    TurnOutcome o;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "conclusion") {
        o.kind = TurnOutcome::Kind::conclusion;
        o.conclusion = conclusion_from_json(j.at("conclusion"));
    } else if (kind == "followup") {
        o.kind = TurnOutcome::Kind::followup;
        o.followup.method_name = j.at("followup").at("method_name").get<std::string>();
        o.followup.class_name = j.at("followup").at("class_name").get<std::string>();
        if (j.at("followup").contains("param_count")) {
            o.followup.param_count = j.at("followup").at("param_count").get<std::int64_t>();
        }
    } else {
        o.kind = TurnOutcome::Kind::abort;
        o.abort_reason = j.at("abort_reason").get<std::string>();
    }
    return o;
}

} // namespace

std::string outcomes_to_jsonl(const std::vector<QueryOutcome>& outcomes) {
    std::string out;
    for (const QueryOutcome& q : outcomes) {
        json sessions = json::array();
        for (const AnalysisSession& s : q.sessions) {
            json turns = json::array();
            for (const AnalysisTurn& t : s.turns) {
                turns.push_back(json{{"turn_index", t.turn_index},
                                     {"input_snippet_id", t.input_snippet_id},
                                     {"analyzer_output", t.analyzer_output},
                                     {"outcome", outcome_to_json(t.outcome)}});
            }
            sessions.push_back(json{{"query_id", s.query_id},
                                    {"seed_snippet_id", s.seed_snippet_id},
                                    {"turns", turns},
                                    {"visited", s.visited},
                                    {"final_conclusion", conclusion_to_json(s.final_conclusion)},
                                    {"aborted", s.aborted},
                                    {"abort_reason", s.abort_reason}});
        }
        json j{{"query_id", q.query.query_id},
               {"category", std::string(category_name(q.query.category))},
               {"text", q.query.text},
               {"no_relevant_code", q.no_relevant_code},
               {"sessions", sessions}};
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::vector<QueryOutcome> outcomes_from_jsonl(const std::string& text) {
    std::vector<QueryOutcome> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).empty()) continue;
        json j = json::parse(line);
        QueryOutcome q;
        q.query.query_id = j.at("query_id").get<std::string>();
        auto cat = category_from_name(j.at("category").get<std::string>());
        if (!cat) {
            throw std::runtime_error("unknown behavior category in outcomes file");
        }
        q.query.category = *cat;
        q.query.text = j.at("text").get<std::string>();
        q.no_relevant_code = j.at("no_relevant_code").get<bool>();
        for (const json& sj : j.at("sessions")) {
            AnalysisSession s;
            s.query_id = sj.at("query_id").get<std::string>();
            s.seed_snippet_id = sj.at("seed_snippet_id").get<std::string>();
            for (const json& tj : sj.at("turns")) {
                AnalysisTurn t;
                t.turn_index = tj.at("turn_index").get<int>();
                t.input_snippet_id = tj.at("input_snippet_id").get<std::string>();
                t.analyzer_output = tj.at("analyzer_output").get<std::string>();
                t.outcome = outcome_from_json(tj.at("outcome"));
                s.turns.push_back(std::move(t));
            }
            s.visited = sj.at("visited").get<std::vector<std::string>>();
            s.final_conclusion = conclusion_from_json(sj.at("final_conclusion"));
            s.aborted = sj.at("aborted").get<bool>();
            s.abort_reason = sj.at("abort_reason").get<std::string>();
            q.sessions.push_back(std::move(s));
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<QuerySpec> queries_from_jsonl(const std::string& text) {
    std::vector<QuerySpec> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).empty()) continue;
        json j = json::parse(line);
        QuerySpec q;
        q.query_id = j.at("query_id").get<std::string>();
        auto cat = category_from_name(j.at("category").get<std::string>());
        if (!cat) {
            throw std::runtime_error("unknown behavior category in query file");
        }
        q.category = *cat;
        q.text = j.at("text").get<std::string>();
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace tracerag::analysis
