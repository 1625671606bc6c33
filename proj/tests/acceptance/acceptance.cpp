// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run end to end against the bundled fixtures with the
// mock embedder and authored replay transcripts; nothing here touches the
// network.

#include "fixture_run.hpp"
#include "scripted_provider.hpp"
#include "splitter_oracle.hpp"
#include "test_paths.hpp"

#include "cli.hpp"
#include "tracerag/analysis.hpp"
#include "tracerag/eval.hpp"
#include "tracerag/report.hpp"
#include "tracerag/runner.hpp"
#include "tracerag/splitter.hpp"
#include "tracerag/util.hpp"
#include "tracerag/vecstore.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace tracerag;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = TRACERAG_FIXTURES_DIR;

int g_failures = 0;

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::ostringstream errors;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            errors << "    " << what << "\n";
        }
    }
};

void run_criterion(int number, const std::string& name, double budget_seconds,
                   const std::function<void(Criterion&)>& body) {
    Criterion c{number, name, budget_seconds, {}};
    auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.errors << "    unexpected exception: " << e.what() << "\n";
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed >= budget_seconds) {
        c.errors << "    runtime " << elapsed << " s exceeded budget " << budget_seconds << " s\n";
    }
    std::string verdict = c.errors.str().empty() ? "PASS" : "FAIL";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", elapsed);
    std::cout << "criterion " << number << " (" << name << "): " << verdict << " (" << buf
              << " s)\n";
    if (!c.errors.str().empty()) {
        std::cout << c.errors.str();
        ++g_failures;
    }
}

// swallows CLI stdout inside a criterion so the suite's own lines stay clean
struct QuietStdout {
    QuietStdout() : old(std::cout.rdbuf(sink.rdbuf())) {}
    ~QuietStdout() { std::cout.rdbuf(old); }
    std::ostringstream sink;
    std::streambuf* old;
};

bool eq4(std::optional<double> got, double want) {
    return got.has_value() && util::round4(*got) == want;
}

std::filesystem::path temp_root() {
    auto dir = std::filesystem::temp_directory_path() / "tracerag_acceptance";
    std::filesystem::create_directories(dir);
    return dir;
}

// brute-force, index-order double arithmetic; intentionally independent of
// the production kernels
double brute_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string random_text(std::mt19937& rng) {
    static const char* words[] = {"sms",     "url",    "download", "crypt",  "load",
                                  "intent",  "root",   "shell",    "billing", "click",
                                  "ad",      "screen", "key",      "record", "exec",
                                  "boot",    "socket", "popup",    "token",  "lock"};
    std::string text;
    int len = 1 + static_cast<int>(rng() % 9);
    for (int i = 0; i < len; ++i) {
        text += std::string(words[rng() % 20]) + " ";
    }
    return text;
}

void criterion_binary_metrics(Criterion& c) {
    auto m = eval::binary_metrics({70, 10, 0, 20});
    c.expect(eq4(m.accuracy, 0.9000), "accuracy != 0.9000");
    c.expect(eq4(m.precision, 0.8750), "precision != 0.8750");
    c.expect(eq4(m.recall, 1.0000), "recall != 1.0000");
    c.expect(eq4(m.f1, 0.9333), "f1 != 0.9333");
}

void criterion_behavior_metrics(Criterion& c) {
    c.expect(util::round4(eval::behavior_accuracy(176, 210)) == 0.8381,
             "behavior_accuracy(176, 210) != 0.8381");
    c.expect(util::round4(eval::behavior_accuracy(53, 70)) == 0.7571,
             "behavior_accuracy(53, 70) != 0.7571");
}

void criterion_splitter_coverage(Criterion& c) {
    namespace fs = std::filesystem;
    auto corpus = kFixtures / "corpus";
    int files = 0;
    for (const auto& entry : fs::directory_iterator(corpus)) {
        if (entry.path().extension() != ".java") continue;
        ++files;
        std::string name = entry.path().filename().string();
        std::string text = util::read_file(entry.path());
        int oracle = testsupport::count_method_declarations(text);
        auto result = splitter::extract_methods({name, text});
        if (oracle < 0) {
            c.expect(result.units.empty(), name + ": unbalanced file must yield zero units");
            c.expect(!result.warnings.empty(), name + ": unbalanced file must warn");
            continue;
        }
        c.expect(static_cast<int>(result.units.size()) == oracle,
                 name + ": unit count " + std::to_string(result.units.size()) +
                     " != oracle " + std::to_string(oracle));
        // span fidelity
        for (const auto& u : result.units) {
            c.expect(text.substr(u.span_begin, u.span_end - u.span_begin) == u.body_text,
                     name + ": span does not reproduce body for " + u.method_name);
        }
        // no leakage: same-class member spans are disjoint
        for (std::size_t i = 0; i < result.units.size(); ++i) {
            for (std::size_t j = i + 1; j < result.units.size(); ++j) {
                const auto& a = result.units[i];
                const auto& b = result.units[j];
                if (a.class_name != b.class_name) continue;
                bool disjoint = a.span_end <= b.span_begin || b.span_end <= a.span_begin;
                c.expect(disjoint, name + ": overlapping sibling spans in " + a.class_name);
            }
        }
    }
    c.expect(files == 25, "corpus must hold 25 files, found " + std::to_string(files));
}

void criterion_retrieval_oracle(Criterion& c) {
    auto embedder = vec::make_mock_embedder();
    std::mt19937 rng(777);
    int mismatches = 0;
    for (int store_i = 0; store_i < 200; ++store_i) {
        std::size_t n = 1 + rng() % 1000;
        vec::Store store("oracle", embedder->dim());
        std::vector<std::pair<std::string, std::vector<double>>> rows;
        rows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            vec::IndexedRecord r;
            r.record_id = util::to_hex((static_cast<std::uint64_t>(store_i) << 32) ^ rng());
            std::string text = random_text(rng);
            r.code_text = text;
            r.description = text;
            r.method_name = "m";
            r.class_name = "C";
            r.param_count = 0;
            r.embedding = embedder->embed(text);
            rows.emplace_back(r.record_id, r.embedding.values());
            store.upsert(std::move(r));
        }
        for (int q = 0; q < 20; ++q) {
            auto qvec = embedder->embed(random_text(rng));
            auto got = store.search(qvec, 5);

            std::vector<std::pair<double, std::string>> oracle;
            oracle.reserve(rows.size());
            for (const auto& [id, values] : rows) {
                oracle.emplace_back(brute_cosine(qvec.values(), values), id);
            }
            std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            std::size_t want = std::min<std::size_t>(5, oracle.size());
            if (got.size() != want) {
                ++mismatches;
                continue;
            }
            for (std::size_t i = 0; i < want; ++i) {
                if (got[i].record_id != oracle[i].second) {
                    ++mismatches;
                    break;
                }
            }
        }
    }
    c.expect(mismatches == 0,
             std::to_string(mismatches) + " of 4000 searches diverged from the oracle");
}

void criterion_e2e_malicious(Criterion& c) {
    QuietStdout quiet;
    auto cache = temp_root() / "acc_mal_cache.jsonl";
    auto record_out = temp_root() / "acc_mal_record";
    testsupport::record_fixture_run(kFixtures / "app_malicious" / "src",
                                    kFixtures / "app_malicious" / "script.json", "fixture-mal",
                                    record_out, cache);

    auto replay1 = temp_root() / "acc_mal_replay1";
    auto replay2 = temp_root() / "acc_mal_replay2";
    std::filesystem::remove_all(replay1);
    std::filesystem::remove_all(replay2);
    for (const auto& dir : {replay1, replay2}) {
        int code = cli::run_cli({"run", "--app-root",
                                 (kFixtures / "app_malicious" / "src").string(), "--app-id",
                                 "fixture-mal", "--out-dir", dir.string(), "--mode", "replay",
                                 "--cache", cache.string()});
        c.expect(code == 0, "replay run exited with " + std::to_string(code));
    }

    json verdict = json::parse(util::read_file(replay1 / "verdict.json"));
    c.expect(verdict["is_malicious"] == true, "verdict must be malicious");
    std::set<std::string> detected;
    for (const auto& [qid, hit] : verdict["per_query"].items()) {
        if (hit.get<bool>()) detected.insert(qid);
    }
    c.expect(detected == std::set<std::string>{"Q3", "Q5"},
             "detected queries must be exactly {Q3, Q5}");
    std::set<std::string> cats;
    for (const auto& cat : verdict["detected_categories"]) {
        cats.insert(cat.get<std::string>());
    }
    c.expect(cats == std::set<std::string>{"InformationTheftAndAbuse",
                                           "MonetaryFraudAndFinancialAbuse"},
             "detected categories mismatch");

    // every reported code path resolves to a store record
    vec::Store store = vec::Store::load(replay1 / "store.jsonl");
    std::set<std::string> known_paths;
    for (const std::string& id : store.record_ids()) {
        auto rec = store.get(id);
        known_paths.insert(rec->class_name + "." + rec->method_name);
    }
    report::FinalReport rep = report::parse_structured(util::read_file(replay1 / "report.json"));
    int paths_seen = 0;
    for (const auto& q : rep.detailed_analyses) {
        for (const auto& cr : q.code_reports) {
            for (const std::string& path : cr.code_paths) {
                ++paths_seen;
                c.expect(known_paths.count(path) == 1,
                         "code path does not resolve to a store record: " + path);
            }
        }
    }
    c.expect(paths_seen >= 4, "expected the scripted call-chain paths to be present");

    c.expect(util::read_file(replay1 / "report.md") == util::read_file(replay2 / "report.md"),
             "two replay runs must produce byte-identical markdown");
    for (const char* name : {"store.jsonl", "store.prov.jsonl", "outcomes.jsonl", "report.json",
                             "verdict.json"}) {
        c.expect(util::read_file(replay1 / name) == util::read_file(replay2 / name),
                 std::string("replay artifact differs across runs: ") + name);
    }

    json manifest = json::parse(util::read_file(replay1 / "manifest.json"));
    c.expect(manifest["provider_calls"] == 0, "replay made provider calls");
}

void criterion_benign_gating(Criterion& c) {
    QuietStdout quiet;
    auto cache = temp_root() / "acc_ben_cache.jsonl";
    auto record_out = temp_root() / "acc_ben_record";
    auto fixture =
        testsupport::record_fixture_run(kFixtures / "app_benign" / "src",
                                        kFixtures / "app_benign" / "script.json", "fixture-ben",
                                        record_out, cache);
    c.expect(!fixture.result.final_report.verdict.is_malicious,
             "record-phase verdict must be benign");

    auto replay_out = temp_root() / "acc_ben_replay";
    std::filesystem::remove_all(replay_out);
    int code = cli::run_cli({"run", "--app-root", (kFixtures / "app_benign" / "src").string(),
                             "--app-id", "fixture-ben", "--out-dir", replay_out.string(),
                             "--mode", "replay", "--cache", cache.string()});
    c.expect(code == 0, "benign replay exited with " + std::to_string(code));

    json verdict = json::parse(util::read_file(replay_out / "verdict.json"));
    c.expect(verdict["is_malicious"] == false, "verdict must be benign");

    auto outcomes = analysis::outcomes_from_jsonl(util::read_file(replay_out / "outcomes.jsonl"));
    c.expect(outcomes.size() == 11, "outcomes file must hold 11 query outcomes");
    int no_relevant = 0;
    for (const auto& o : outcomes) {
        if (o.no_relevant_code && o.sessions.empty()) ++no_relevant;
    }
    c.expect(no_relevant == 11, "all 11 queries must be NoRelevantCode");

    json manifest = json::parse(util::read_file(replay_out / "manifest.json"));
    c.expect(manifest["calls_by_role"]["Analyzer"] == 0,
             "benign gating must make zero Analyzer calls");
    c.expect(manifest["provider_calls"] == 0, "replay made provider calls");
}

void criterion_ablations(Criterion& c) {
    QuietStdout quiet;
    // --no-split-clean: zero cleanser calls, one record per file
    {
        auto cache = temp_root() / "acc_nosplit_cache.jsonl";
        auto record_out = temp_root() / "acc_nosplit_record";
        testsupport::record_fixture_run(kFixtures / "app_malicious" / "src",
                                        kFixtures / "app_malicious" / "script.json",
                                        "fixture-mal", record_out, cache,
                                        [](config::Config& cfg) { cfg.split_and_clean = false; });
        auto replay_out = temp_root() / "acc_nosplit_replay";
        std::filesystem::remove_all(replay_out);
        int code = cli::run_cli({"run", "--app-root",
                                 (kFixtures / "app_malicious" / "src").string(), "--app-id",
                                 "fixture-mal", "--out-dir", replay_out.string(), "--mode",
                                 "replay", "--cache", cache.string(), "--no-split-clean"});
        c.expect(code == 0, "no-split-clean replay exited with " + std::to_string(code));
        json manifest = json::parse(util::read_file(replay_out / "manifest.json"));
        c.expect(manifest["calls_by_role"]["Cleanser"] == 0,
                 "no-split-clean must make zero Cleanser calls");
        vec::Store store = vec::Store::load(replay_out / "store.jsonl");
        c.expect(store.count() == 5, "no-split store must hold one record per file (5), got " +
                                         std::to_string(store.count()));
    }
    // --raw-code-index: zero describer calls
    {
        auto cache = temp_root() / "acc_raw_cache.jsonl";
        auto record_out = temp_root() / "acc_raw_record";
        testsupport::record_fixture_run(kFixtures / "app_malicious" / "src",
                                        kFixtures / "app_malicious" / "script.json",
                                        "fixture-mal", record_out, cache,
                                        [](config::Config& cfg) { cfg.use_descriptions = false; });
        auto replay_out = temp_root() / "acc_raw_replay";
        std::filesystem::remove_all(replay_out);
        int code = cli::run_cli({"run", "--app-root",
                                 (kFixtures / "app_malicious" / "src").string(), "--app-id",
                                 "fixture-mal", "--out-dir", replay_out.string(), "--mode",
                                 "replay", "--cache", cache.string(), "--raw-code-index"});
        c.expect(code == 0, "raw-code-index replay exited with " + std::to_string(code));
        json manifest = json::parse(util::read_file(replay_out / "manifest.json"));
        c.expect(manifest["calls_by_role"]["Describer"] == 0,
                 "raw-code-index must make zero Describer calls");
    }
    // --single-turn: zero follow-up resolutions despite scripted FOLLOWUP
    {
        auto cache = temp_root() / "acc_single_cache.jsonl";
        auto record_out = temp_root() / "acc_single_record";
        testsupport::record_fixture_run(kFixtures / "app_malicious" / "src",
                                        kFixtures / "app_malicious" / "script.json",
                                        "fixture-mal", record_out, cache,
                                        [](config::Config& cfg) { cfg.max_turns = 1; });
        auto replay_out = temp_root() / "acc_single_replay";
        std::filesystem::remove_all(replay_out);
        int code = cli::run_cli({"run", "--app-root",
                                 (kFixtures / "app_malicious" / "src").string(), "--app-id",
                                 "fixture-mal", "--out-dir", replay_out.string(), "--mode",
                                 "replay", "--cache", cache.string(), "--single-turn"});
        c.expect(code == 0, "single-turn replay exited with " + std::to_string(code));
        json manifest = json::parse(util::read_file(replay_out / "manifest.json"));
        c.expect(manifest["followups_resolved"] == 0,
                 "single-turn must resolve zero follow-ups");
        auto outcomes =
            analysis::outcomes_from_jsonl(util::read_file(replay_out / "outcomes.jsonl"));
        bool followup_scripted = false;
        for (const auto& o : outcomes) {
            for (const auto& s : o.sessions) {
                for (const auto& t : s.turns) {
                    if (t.analyzer_output.find("FOLLOWUP:") != std::string::npos) {
                        followup_scripted = true;
                    }
                }
            }
        }
        c.expect(followup_scripted,
                 "fixture must actually script a FOLLOWUP for this ablation to bite");
    }
}

void criterion_boundedness(Criterion& c) {
    auto embedder = vec::make_mock_embedder();
    vec::Store store("fuzz", embedder->dim());
    std::vector<std::string> methods;
    for (int i = 0; i < 10; ++i) {
        vec::IndexedRecord r;
        r.record_id = "id" + std::to_string(i);
        r.method_name = "m" + std::to_string(i);
        r.class_name = "Fuzz";
        r.param_count = 0;
        r.code_text = "void m" + std::to_string(i) + "() {}";
        r.description = "fuzz target " + std::to_string(i);
        r.embedding = embedder->embed(vec::index_text_for(r));
        methods.push_back(r.method_name);
        store.upsert(std::move(r));
    }

    std::mt19937 rng(31337);
    const auto& query = analysis::default_queries()[2];
    for (int round = 0; round < 150; ++round) {
        int mode = round % 3;
        auto provider = std::make_shared<testsupport::LambdaProvider>(
            [&, mode](const llm::CompletionRequest& req) -> std::string {
                if (req.role == llm::Role::query_reviewer) {
                    return rng() % 2 == 0 ? "CLASSIFICATION: conclusion"
                                          : "CLASSIFICATION: followup";
                }
                if (req.role == llm::Role::collision_reviewer) {
                    return "CHOICE: " + std::to_string(1 + rng() % 4);
                }
                if (mode == 0) {
                    return "chase\n```\nFOLLOWUP: method=" + methods[rng() % methods.size()] +
                           " class=Fuzz params=0\n```";
                }
                if (mode == 1) {
                    return "self\n```\nFOLLOWUP: method=m0 class=Fuzz params=0\n```";
                }
                switch (rng() % 4) {
                case 0: return "nothing structured here at all";
                case 1: return "```\nVERDICT: perhaps\n```";
                case 2: return "```\nFOLLOWUP: method= class= params=x\n```";
                default: return "```\nhalf a fence";
                }
            });
        llm::GatewayConfig gcfg;
        gcfg.mode = llm::GatewayMode::live;
        llm::LlmGateway gateway(gcfg, provider, nullptr);
        analysis::AnalysisStats stats;
        analysis::AnalysisConfig acfg;
        acfg.max_turns = 5;
        auto session =
            analysis::analyze_snippet(gateway, store, query, "id" + std::to_string(round % 10),
                                      acfg, stats);
        c.expect(session.turns.size() <= 5, "session exceeded max_turns");
        std::set<std::string> seen(session.visited.begin(), session.visited.end());
        c.expect(seen.size() == session.visited.size(), "session revisited a snippet");
        bool terminal = !session.turns.empty() &&
                        (session.turns.back().outcome.kind ==
                             analysis::TurnOutcome::Kind::conclusion ||
                         session.turns.back().outcome.kind == analysis::TurnOutcome::Kind::abort);
        c.expect(terminal, "session lacks a terminal turn");
        if (session.aborted) {
            c.expect(session.final_conclusion.inconclusive,
                     "aborted session must synthesize an inconclusive conclusion");
        }
    }
}

void criterion_store_roundtrip(Criterion& c) {
    auto embedder = vec::make_mock_embedder();
    std::mt19937 rng(10101);
    auto dir = temp_root() / "roundtrip";
    std::filesystem::create_directories(dir);
    for (int round = 0; round < 100; ++round) {
        std::size_t n = 1 + rng() % 60;
        vec::Store store("rt" + std::to_string(round), embedder->dim());
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            vec::IndexedRecord r;
            r.record_id = util::to_hex(rng());
            std::string text = random_text(rng);
            r.code_text = text;
            r.description = text;
            r.method_name = "m" + std::to_string(rng() % 5);
            r.class_name = "C" + std::to_string(rng() % 3);
            r.param_count = static_cast<std::int64_t>(rng() % 4);
            r.embedding = embedder->embed(text);
            ids.push_back(r.record_id);
            store.upsert(std::move(r));
        }
        auto path = dir / ("store_" + std::to_string(round) + ".jsonl");
        store.save(path);
        vec::Store loaded = vec::Store::load(path);

        c.expect(loaded.count() == store.count(), "count changed across round-trip");
        for (const auto& id : ids) {
            auto a = store.get(id);
            auto b = loaded.get(id);
            if (!b.has_value() || !(*a == *b)) {
                c.expect(false, "record " + id + " changed across round-trip");
                break;
            }
        }
        for (int q = 0; q < 3; ++q) {
            auto qvec = embedder->embed(random_text(rng));
            if (!(store.search(qvec, 5) == loaded.search(qvec, 5))) {
                c.expect(false, "search results changed across round-trip");
                break;
            }
        }
        vec::MetadataFilter f;
        f.method_name = "m" + std::to_string(rng() % 5);
        if (rng() % 2 == 0) f.class_name = "C" + std::to_string(rng() % 3);
        c.expect(store.filter_candidates(f) == loaded.filter_candidates(f),
                 "filter results changed across round-trip");
    }
}

} // namespace

int main() {
    std::cout << "acceptance suite\n";
    run_criterion(1, "metric oracle, binary detection", 1.0, criterion_binary_metrics);
    run_criterion(2, "metric oracle, behavior accuracy", 1.0, criterion_behavior_metrics);
    run_criterion(3, "splitter coverage vs declaration oracle", 5.0, criterion_splitter_coverage);
    run_criterion(4, "retrieval equals brute-force oracle", 60.0, criterion_retrieval_oracle);
    run_criterion(5, "end-to-end replay determinism, malicious fixture", 30.0,
                  criterion_e2e_malicious);
    run_criterion(6, "benign gating, zero analyzer calls", 10.0, criterion_benign_gating);
    run_criterion(7, "ablation observability", 30.0, criterion_ablations);
    run_criterion(8, "bounded adversarial sessions", 30.0, criterion_boundedness);
    run_criterion(9, "store round-trip preservation", 30.0, criterion_store_roundtrip);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
