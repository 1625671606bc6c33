#include "tracerag/report.hpp"

#include "tracerag/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace tracerag::report {

using nlohmann::json;

namespace {

// A claimed path must resolve to a stored record: exact
// "<class>.<method>" first, then "<SimpleClass>.<method>" suffix.
std::vector<std::string> resolve_path(const vec::Store& store, const std::string& path) {
    std::vector<std::string> ids;
    store.for_each([&](const vec::IndexedRecord& rec) {
        std::string exact = rec.class_name + "." + rec.method_name;
        if (exact == path) {
            ids.push_back(rec.record_id);
            return;
        }
        auto dollar = rec.class_name.rfind('$');
        auto dot = rec.class_name.rfind('.');
        std::size_t cut = dollar == std::string::npos
                              ? (dot == std::string::npos ? 0 : dot + 1)
                              : dollar + 1;
        std::string simple = rec.class_name.substr(cut) + "." + rec.method_name;
        bool dotted_suffix = path.size() > simple.size() &&
                             path.compare(path.size() - simple.size() - 1, 1, ".") == 0 &&
                             path.compare(path.size() - simple.size(), simple.size(), simple) == 0;
        if (path == simple || dotted_suffix) {
            ids.push_back(rec.record_id);
        }
    });
    return ids;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const std::string& l : lines) {
        if (!out.empty()) out += "\n";
        out += l;
    }
    return out;
}

} // namespace

CodeReport build_code_report(llm::LlmGateway& gateway, const vec::Store& store,
                             const analysis::AnalysisSession& session) {
    CodeReport report;
    report.query_id = session.query_id;
    report.seed_snippet_id = session.seed_snippet_id;

    // structural fields come from the terminal conclusion, never from prose
    const analysis::Conclusion& conclusion = session.final_conclusion;
    report.is_malicious = conclusion.is_malicious;
    report.inconclusive = conclusion.inconclusive;

    for (const std::string& id : session.visited) {
        if (store.get(id)) {
            report.referenced_snippet_ids.push_back(id);
        }
    }
    for (const std::string& path : conclusion.code_paths) {
        std::vector<std::string> ids = resolve_path(store, path);
        if (ids.empty()) {
            report.warnings.push_back("code path does not resolve to a stored record: " + path);
            continue;
        }
        report.code_paths.push_back(path);
        for (const std::string& id : ids) {
            if (std::find(report.referenced_snippet_ids.begin(),
                          report.referenced_snippet_ids.end(),
                          id) == report.referenced_snippet_ids.end()) {
                report.referenced_snippet_ids.push_back(id);
            }
        }
    }
    if (report.is_malicious && report.code_paths.empty()) {
        // the explanation-backed rule: no concrete code path, no detection
        report.is_malicious = false;
        report.inconclusive = true;
        report.warnings.push_back("malicious conclusion without resolvable code paths demoted");
    }

    std::vector<std::string> material_lines;
    for (const analysis::AnalysisTurn& turn : session.turns) {
        auto rec = store.get(turn.input_snippet_id);
        std::string where = rec ? rec->class_name + "." + rec->method_name : turn.input_snippet_id;
        material_lines.push_back("turn " + std::to_string(turn.turn_index) + " (" + where +
                                 "): " + turn.analyzer_output);
    }
    material_lines.push_back("terminal finding: " + conclusion.finding);

    std::string seed_desc = report.seed_snippet_id;
    if (auto rec = store.get(session.seed_snippet_id)) {
        seed_desc = rec->class_name + "." + rec->method_name;
    }
    try {
        auto resp = gateway.ask(
            llm::Role::organizer,
            {{"task", "Write the code report for query " + session.query_id + " on snippet " +
                          seed_desc + ": synthesize the analysis turns into one narrative."},
             {"material", join_lines(material_lines)}});
        report.narrative = util::trim(resp.text);
    } catch (const std::exception&) {
        report.organizer_fallback = true;
    }
    if (report.narrative.empty()) {
        report.organizer_fallback = true;
        report.narrative = join_lines(material_lines);
    }
    return report;
}

QueryReport build_query_report(llm::LlmGateway& gateway, const vec::Store& store,
                               const analysis::QueryOutcome& outcome) {
    QueryReport report;
    report.query = outcome.query;
    report.no_relevant_code = outcome.no_relevant_code;
    for (const analysis::AnalysisSession& session : outcome.sessions) {
        report.code_reports.push_back(build_code_report(gateway, store, session));
    }
    report.detected = std::any_of(report.code_reports.begin(), report.code_reports.end(),
                                  [](const CodeReport& c) { return c.is_malicious; });
    return report;
}

FinalReport build_final_report(llm::LlmGateway& gateway, const AppInfo& app_info,
                               const std::vector<QueryReport>& query_reports) {
    if (query_reports.size() != 11) {
        throw WrongQueryCount(query_reports.size());
    }
    FinalReport report;
    report.app_info = app_info;
    report.detailed_analyses = query_reports;

    for (const QueryReport& q : query_reports) {
        report.verdict.per_query[q.query.query_id] = q.detected;
        if (q.detected) {
            report.verdict.detected_categories.insert(q.query.category);
        }
    }
    report.verdict.is_malicious =
        std::any_of(query_reports.begin(), query_reports.end(), [](const QueryReport& q) {
            if (!q.detected) return false;
            return std::any_of(q.code_reports.begin(), q.code_reports.end(),
                               [](const CodeReport& c) {
                                   return c.is_malicious && !c.code_paths.empty();
                               });
        });

    std::vector<std::string> summary_lines;
    for (const QueryReport& q : query_reports) {
        std::string line = q.query.query_id + " (" + q.query.text + "): ";
        if (q.no_relevant_code) {
            line += "no related code retrieved";
        } else if (q.detected) {
            line += "malicious behavior identified";
            for (const CodeReport& c : q.code_reports) {
                for (const std::string& p : c.code_paths) line += "; " + p;
            }
        } else {
            line += "analyzed, no malicious behavior confirmed";
        }
        summary_lines.push_back(line);
    }
    try {
        auto resp = gateway.ask(
            llm::Role::organizer,
            {{"task", "Write the overall summary section of the final report from the per-query "
                      "results below."},
             {"material", join_lines(summary_lines)}});
        report.overall_summary = util::trim(resp.text);
    } catch (const std::exception&) {
    }
    if (report.overall_summary.empty()) {
        report.overall_summary = join_lines(summary_lines);
    }

    if (report.verdict.is_malicious) {
        std::string cats;
        for (analysis::BehaviorCategory c : report.verdict.detected_categories) {
            if (!cats.empty()) cats += ", ";
            cats += analysis::category_name(c);
        }
        std::string queries;
        for (const QueryReport& q : query_reports) {
            if (q.detected) {
                if (!queries.empty()) queries += ", ";
                queries += q.query.query_id;
            }
        }
        report.conclusion = "The application is assessed as malicious. Detected queries: " +
                            queries + ". Behavior categories: " + cats +
                            ". Every detection above is backed by the referenced code paths.";
    } else {
        report.conclusion =
            "No explanation-backed malicious behavior was identified; the application is "
            "assessed as benign under the eleven-query battery.";
    }
    return report;
}

// ---------------------------------------------------------------------------

std::string render_markdown(const FinalReport& report) {
    std::ostringstream md;
    md << "# App Info\n\n";
    md << "- package: " << report.app_info.package_name << "\n";
    md << "- sha256: " << report.app_info.sha256 << "\n";
    md << "- app id: " << report.app_info.app_id << "\n";
    md << "- code units indexed: " << report.app_info.unit_count << "\n";
    md << "\n# Overall Summary\n\n";
    md << report.overall_summary << "\n";
    md << "\n# Detailed Analyses\n";
    for (const QueryReport& q : report.detailed_analyses) {
        md << "\n## " << q.query.query_id << ": " << q.query.text << "\n\n";
        if (q.no_relevant_code) {
            md << "No related code was retrieved for this query; no related malicious activity "
                  "is detected.\n";
            continue;
        }
        if (!q.detected) {
            md << "No related malicious activity is detected (" << q.code_reports.size()
               << " snippet(s) reviewed without a confirmed finding).\n";
            continue;
        }
        for (const CodeReport& c : q.code_reports) {
            if (!c.is_malicious) continue;
            md << c.narrative << "\n\n";
            md << "Code paths:\n";
            for (const std::string& p : c.code_paths) {
                md << "- " << p << "\n";
            }
            md << "\n";
        }
    }
    md << "\n# Conclusion\n\n";
    md << report.conclusion << "\n\n";
    md << "Verdict: " << (report.verdict.is_malicious ? "malicious" : "benign") << "\n";
    return md.str();
}

namespace {

json code_report_to_json(const CodeReport& c) {
    return json{{"query_id", c.query_id},
                {"seed_snippet_id", c.seed_snippet_id},
                {"narrative", c.narrative},
                {"code_paths", c.code_paths},
                {"is_malicious", c.is_malicious},
                {"inconclusive", c.inconclusive},
                {"referenced_snippet_ids", c.referenced_snippet_ids},
                {"organizer_fallback", c.organizer_fallback},
                {"warnings", c.warnings}};
}

CodeReport code_report_from_json(const json& j) {
    CodeReport c;
    c.query_id = j.at("query_id").get<std::string>();
    c.seed_snippet_id = j.at("seed_snippet_id").get<std::string>();
    c.narrative = j.at("narrative").get<std::string>();
    c.code_paths = j.at("code_paths").get<std::vector<std::string>>();
    c.is_malicious = j.at("is_malicious").get<bool>();
    c.inconclusive = j.at("inconclusive").get<bool>();
    c.referenced_snippet_ids = j.at("referenced_snippet_ids").get<std::vector<std::string>>();
    c.organizer_fallback = j.at("organizer_fallback").get<bool>();
    c.warnings = j.at("warnings").get<std::vector<std::string>>();
    return c;
}

} // namespace

std::string render_structured(const FinalReport& report) {
    json detailed = json::array();
    for (const QueryReport& q : report.detailed_analyses) {
        json code_reports = json::array();
        for (const CodeReport& c : q.code_reports) {
            code_reports.push_back(code_report_to_json(c));
        }
        detailed.push_back(json{{"query_id", q.query.query_id},
                                {"category", std::string(analysis::category_name(q.query.category))},
                                {"text", q.query.text},
                                {"code_reports", code_reports},
                                {"no_relevant_code", q.no_relevant_code},
                                {"detected", q.detected}});
    }
    json categories = json::array();
    for (analysis::BehaviorCategory c : report.verdict.detected_categories) {
        categories.push_back(std::string(analysis::category_name(c)));
    }
    json j{{"app_info",
            {{"package_name", report.app_info.package_name},
             {"sha256", report.app_info.sha256},
             {"app_id", report.app_info.app_id},
             {"unit_count", report.app_info.unit_count}}},
           {"overall_summary", report.overall_summary},
           {"detailed_analyses", detailed},
           {"conclusion", report.conclusion},
           {"verdict",
            {{"is_malicious", report.verdict.is_malicious},
             {"detected_categories", categories},
             {"per_query", report.verdict.per_query}}}};
    return j.dump(2) + "\n";
}

FinalReport parse_structured(const std::string& text) {
    json j = json::parse(text);
    FinalReport report;
    report.app_info.package_name = j.at("app_info").at("package_name").get<std::string>();
    report.app_info.sha256 = j.at("app_info").at("sha256").get<std::string>();
    report.app_info.app_id = j.at("app_info").at("app_id").get<std::string>();
    report.app_info.unit_count = j.at("app_info").at("unit_count").get<std::size_t>();
    report.overall_summary = j.at("overall_summary").get<std::string>();
    report.conclusion = j.at("conclusion").get<std::string>();
    for (const json& qj : j.at("detailed_analyses")) {
        QueryReport q;
        q.query.query_id = qj.at("query_id").get<std::string>();
        auto cat = analysis::category_from_name(qj.at("category").get<std::string>());
        if (!cat) {
            throw std::runtime_error("unknown behavior category in structured report");
        }
        q.query.category = *cat;
        q.query.text = qj.at("text").get<std::string>();
        for (const json& cj : qj.at("code_reports")) {
            q.code_reports.push_back(code_report_from_json(cj));
        }
        q.no_relevant_code = qj.at("no_relevant_code").get<bool>();
        q.detected = qj.at("detected").get<bool>();
        report.detailed_analyses.push_back(std::move(q));
    }
    report.verdict.is_malicious = j.at("verdict").at("is_malicious").get<bool>();
    for (const json& cj : j.at("verdict").at("detected_categories")) {
        auto cat = analysis::category_from_name(cj.get<std::string>());
        if (cat) report.verdict.detected_categories.insert(*cat);
    }
    for (const auto& [k, v] : j.at("verdict").at("per_query").items()) {
        report.verdict.per_query[k] = v.get<bool>();
    }
    return report;
}

std::string verdict_to_json(const AppInfo& app_info, const Verdict& verdict) {
    json categories = json::array();
    for (analysis::BehaviorCategory c : verdict.detected_categories) {
        categories.push_back(std::string(analysis::category_name(c)));
    }
    json j{{"app_id", app_info.app_id},
           {"package_name", app_info.package_name},
           {"sha256", app_info.sha256},
           {"is_malicious", verdict.is_malicious},
           {"detected_categories", categories},
           {"per_query", verdict.per_query}};
    return j.dump(2) + "\n";
}

} // namespace tracerag::report
