#include "cli.hpp"

#include "tracerag/analysis.hpp"
#include "tracerag/config.hpp"
#include "tracerag/eval.hpp"
#include "tracerag/pipeline.hpp"
#include "tracerag/report.hpp"
#include "tracerag/runner.hpp"
#include "tracerag/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

namespace tracerag::cli {

using nlohmann::json;

namespace {

// CLI flags land in optionals so the layering stays explicit:
// defaults < config file < environment < flags.
struct CommonFlags {
    std::optional<std::string> config_file;
    std::optional<std::string> mode;
    std::optional<std::string> cache;
    std::optional<std::string> model;
    std::optional<std::string> base_url;
    std::optional<std::string> templates_dir;
    std::optional<std::string> provider; // embedding provider
    std::optional<int> concurrency;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_file, "config file (key = value lines)");
    cmd->add_option("--mode", flags.mode, "gateway mode: live, record or replay");
    cmd->add_option("--cache", flags.cache, "replay cache file (JSON lines)");
    cmd->add_option("--model", flags.model, "chat model name");
    cmd->add_option("--base-url", flags.base_url, "provider base URL");
    cmd->add_option("--templates-dir", flags.templates_dir, "prompt template overrides");
    cmd->add_option("--provider", flags.provider, "embedding provider: mock or remote");
    cmd->add_option("--concurrency", flags.concurrency, "provider concurrency limit");
}

config::Config build_config(const CommonFlags& flags) {
    config::Config cfg;
    std::string file;
    if (flags.config_file) {
        file = *flags.config_file;
    } else if (const char* env = std::getenv("TRACERAG_CONFIG"); env && *env) {
        file = env;
    }
    if (!file.empty()) {
        cfg = config::load_config_file(file);
    }
    config::apply_environment(cfg);
    if (flags.mode) cfg.mode = *flags.mode;
    if (flags.cache) cfg.cache_path = *flags.cache;
    if (flags.model) cfg.model = *flags.model;
    if (flags.base_url) cfg.provider_base_url = *flags.base_url;
    if (flags.templates_dir) cfg.templates_dir = *flags.templates_dir;
    if (flags.provider) cfg.embedding_provider = *flags.provider;
    if (flags.concurrency) cfg.concurrency = *flags.concurrency;
    return cfg;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    out += "'";
    return out;
}

// optional pre-step: run a configured decompiler command on an APK and
// ingest its output directory ({apk} and {out} substitute into the template)
void maybe_decompile(const std::string& apk, const std::string& cmd_template,
                     const std::string& app_root) {
    if (apk.empty() && cmd_template.empty()) return;
    if (apk.empty() || cmd_template.empty()) {
        throw config::ConfigError("--apk and --decompiler-cmd must be given together");
    }
    std::filesystem::create_directories(app_root);
    std::string cmd = cmd_template;
    auto replace_all = [&cmd](const std::string& what, const std::string& with) {
        for (std::size_t pos = cmd.find(what); pos != std::string::npos;
             pos = cmd.find(what, pos + with.size())) {
            cmd.replace(pos, what.size(), with);
        }
    };
    replace_all("{apk}", shell_quote(apk));
    replace_all("{out}", shell_quote(app_root));
    int rc = std::system(cmd.c_str());
    if (rc != 0) {
        throw std::runtime_error("decompiler command failed (exit " + std::to_string(rc) +
                                 "): " + cmd);
    }
}

std::unique_ptr<vec::EmbeddingProvider> embedder_for_store(const vec::Store& store,
                                                           const config::Config& cfg) {
    std::string kind = store.meta("embedder");
    config::Config adjusted = cfg;
    adjusted.embedding_provider = kind.empty() ? cfg.embedding_provider : kind;
    if (adjusted.embedding_provider == "remote") {
        adjusted.remote_embed_dim = store.dim();
    }
    return runner::build_embedder(adjusted);
}

// a gateway whose completions always fail; report can then fall back to
// turn-summary narratives without a cache
std::shared_ptr<llm::LlmGateway> offline_gateway(const config::Config& cfg) {
    llm::GatewayConfig gw;
    gw.mode = llm::GatewayMode::live;
    gw.model = cfg.model;
    return std::make_shared<llm::LlmGateway>(gw, nullptr, nullptr);
}

int cmd_index(const CommonFlags& flags, const std::string& app_root, const std::string& app_id,
              const std::string& sha256, bool no_split_clean, bool raw_code_index,
              const std::string& out_file, const std::string& apk,
              const std::string& decompiler_cmd) {
    config::Config cfg = build_config(flags);
    cfg.split_and_clean = cfg.split_and_clean && !no_split_clean;
    cfg.use_descriptions = cfg.use_descriptions && !raw_code_index;
    config::validate(cfg);
    maybe_decompile(apk, decompiler_cmd, app_root);

    auto gateway = runner::build_gateway(cfg);
    auto embedder = runner::build_embedder(cfg);

    pipeline::AppMeta meta;
    meta.app_id = app_id;
    meta.source_root = app_root;
    meta.sha256 = sha256.empty() ? pipeline::tree_digest(app_root) : sha256;

    pipeline::PipelineConfig pcfg;
    pcfg.split_and_clean = cfg.split_and_clean;
    pcfg.use_descriptions = cfg.use_descriptions;
    pcfg.oversize_char_cap = cfg.oversize_char_cap;
    pcfg.concurrency = cfg.concurrency;

    pipeline::IngestResult result = pipeline::ingest_app(meta, pcfg, *gateway, *embedder);

    std::filesystem::path store_path = out_file.empty() ? "store.jsonl" : out_file;
    result.store.save(store_path);
    pipeline::write_provenance(pipeline::provenance_path_for(store_path), result.provenance);

    std::cout << "indexed " << result.store.count() << " record(s) into " << store_path.string()
              << "\n";
    std::cout << "cleaned: " << result.stats.cleaned_count
              << ", described: " << result.stats.described_count
              << ", warnings: " << result.stats.warnings.size() << "\n";
    for (const std::string& w : result.stats.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return 0;
}

int cmd_analyze(const CommonFlags& flags, const std::string& store_file,
                const std::string& queries_file, std::optional<int> max_turns, bool single_turn,
                const std::string& out_file) {
    config::Config cfg = build_config(flags);
    if (max_turns) cfg.max_turns = *max_turns;
    if (single_turn) cfg.max_turns = 1;
    config::validate(cfg);

    vec::Store store = vec::Store::load(store_file);
    auto gateway = runner::build_gateway(cfg);
    auto embedder = embedder_for_store(store, cfg);

    std::vector<analysis::QuerySpec> queries =
        queries_file.empty() ? analysis::default_queries()
                             : analysis::queries_from_jsonl(util::read_file(queries_file));

    analysis::AnalysisConfig acfg;
    acfg.top_k = cfg.top_k;
    acfg.max_turns = cfg.max_turns;
    analysis::BatteryResult battery =
        analysis::run_battery(*gateway, store, *embedder, queries, acfg);

    util::write_file(out_file, analysis::outcomes_to_jsonl(battery.outcomes));
    std::cout << "analyzed " << queries.size() << " quer(ies), follow-ups resolved: "
              << battery.stats.followups_resolved << "\n";
    for (const std::string& w : battery.stats.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& outcomes_file,
               const std::string& store_file, const std::string& format,
               const std::string& out_file) {
    config::Config cfg = build_config(flags);
    if (format != "markdown" && format != "structured") {
        throw config::ConfigError("format must be markdown or structured");
    }

    vec::Store store = vec::Store::load(store_file);
    std::vector<analysis::QueryOutcome> outcomes =
        analysis::outcomes_from_jsonl(util::read_file(outcomes_file));

    std::shared_ptr<llm::LlmGateway> gateway;
    if (!cfg.cache_path.empty()) {
        config::validate(cfg);
        gateway = runner::build_gateway(cfg);
    } else {
        gateway = offline_gateway(cfg);
    }

    report::AppInfo info;
    info.app_id = store.app_id();
    info.package_name = store.meta("package_name");
    info.sha256 = store.meta("sha256");
    info.unit_count = store.count();

    std::vector<report::QueryReport> query_reports;
    for (const analysis::QueryOutcome& outcome : outcomes) {
        query_reports.push_back(report::build_query_report(*gateway, store, outcome));
    }
    report::FinalReport final_report = report::build_final_report(*gateway, info, query_reports);

    util::write_file(out_file, format == "markdown" ? report::render_markdown(final_report)
                                                    : report::render_structured(final_report));
    std::cout << "report written to " << out_file << " (verdict: "
              << (final_report.verdict.is_malicious ? "malicious" : "benign") << ")\n";
    return 0;
}

struct TruthEntry {
    bool is_malicious = false;
    std::set<analysis::BehaviorCategory> labels;
};

std::map<std::string, TruthEntry> load_truth(const std::string& path) {
    std::map<std::string, TruthEntry> truth;
    std::istringstream in(util::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).empty()) continue;
        json j = json::parse(line);
        TruthEntry entry;
        entry.is_malicious = j.at("is_malicious").get<bool>();
        for (const json& l : j.value("behavior_labels", json::array())) {
            auto cat = analysis::category_from_name(l.get<std::string>());
            if (!cat) {
                throw std::runtime_error("unknown behavior label: " + l.get<std::string>());
            }
            entry.labels.insert(*cat);
        }
        if (!entry.is_malicious && !entry.labels.empty()) {
            throw std::runtime_error("benign sample with behavior labels: " +
                                     j.at("app_id").get<std::string>());
        }
        truth[j.at("app_id").get<std::string>()] = std::move(entry);
    }
    return truth;
}

struct PredictionEntry {
    bool is_malicious = false;
    std::set<analysis::BehaviorCategory> categories;
};

std::map<std::string, PredictionEntry> load_predictions(const std::string& path) {
    std::map<std::string, PredictionEntry> out;
    auto consume = [&](const json& j) {
        PredictionEntry p;
        p.is_malicious = j.at("is_malicious").get<bool>();
        for (const json& c : j.value("detected_categories", json::array())) {
            auto cat = analysis::category_from_name(c.get<std::string>());
            if (cat) p.categories.insert(*cat);
        }
        out[j.at("app_id").get<std::string>()] = std::move(p);
    };
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().filename() == "verdict.json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            consume(json::parse(util::read_file(f)));
        }
    } else {
        std::istringstream in(util::read_file(path));
        std::string line;
        while (std::getline(in, line)) {
            if (util::trim(line).empty()) continue;
            consume(json::parse(line));
        }
    }
    return out;
}

json metric_or_null(const std::optional<double>& v) {
    if (!v) return nullptr;
    return util::round4(*v);
}

int cmd_eval(const std::string& verdicts_path, const std::string& truth_path,
             const std::string& out_file) {
    auto truth = load_truth(truth_path);
    auto predictions = load_predictions(verdicts_path);

    std::map<std::string, bool> pred_binary;
    std::map<std::string, bool> truth_binary;
    for (const auto& [id, p] : predictions) pred_binary[id] = p.is_malicious;
    for (const auto& [id, t] : truth) truth_binary[id] = t.is_malicious;

    eval::ConfusionCounts binary = eval::confusion(pred_binary, truth_binary);
    eval::BinaryMetrics binary_m = eval::binary_metrics(binary);

    // behavior metrics over malicious-labeled samples, one binary task per
    // category, micro-averaged
    const analysis::BehaviorCategory cats[] = {
        analysis::BehaviorCategory::information_theft_and_abuse,
        analysis::BehaviorCategory::monetary_fraud_and_financial_abuse,
        analysis::BehaviorCategory::privilege_abuse_and_system_exploitation,
    };
    std::vector<eval::ConfusionCounts> per_category(3);
    std::int64_t correct_cells = 0;
    std::int64_t total_cells = 0;
    for (const auto& [id, t] : truth) {
        if (!t.is_malicious) continue;
        auto pit = predictions.find(id);
        if (pit == predictions.end()) {
            throw eval::KeyMismatch();
        }
        for (std::size_t i = 0; i < 3; ++i) {
            bool actual = t.labels.count(cats[i]) > 0;
            bool predicted = pit->second.categories.count(cats[i]) > 0;
            ++total_cells;
            if (predicted == actual) ++correct_cells;
            if (predicted && actual) per_category[i].tp++;
            else if (predicted && !actual) per_category[i].fp++;
            else if (!predicted && actual) per_category[i].fn++;
            else per_category[i].tn++;
        }
    }

    json out{{"binary",
              {{"counts",
                {{"tp", binary.tp}, {"fp", binary.fp}, {"fn", binary.fn}, {"tn", binary.tn}}},
               {"accuracy", metric_or_null(binary_m.accuracy)},
               {"precision", metric_or_null(binary_m.precision)},
               {"recall", metric_or_null(binary_m.recall)},
               {"f1", metric_or_null(binary_m.f1)}}}};
    if (total_cells > 0) {
        eval::MicroMetrics micro = eval::micro_metrics(per_category);
        json per_cat = json::object();
        for (std::size_t i = 0; i < 3; ++i) {
            per_cat[std::string(analysis::category_name(cats[i]))] =
                json{{"tp", per_category[i].tp},
                     {"fp", per_category[i].fp},
                     {"fn", per_category[i].fn},
                     {"tn", per_category[i].tn}};
        }
        out["behavior"] = json{
            {"per_category", per_cat},
            {"micro",
             {{"precision", metric_or_null(micro.precision)},
              {"recall", metric_or_null(micro.recall)},
              {"f1", metric_or_null(micro.f1)}}},
            {"accuracy",
             {{"correct", correct_cells},
              {"total", total_cells},
              {"value", util::round4(eval::behavior_accuracy(correct_cells, total_cells))}}}};
    }
    util::write_file(out_file, out.dump(2) + "\n");
    std::cout << "metrics written to " << out_file << "\n";
    return 0;
}

int cmd_run(const CommonFlags& flags, const std::string& app_root, const std::string& app_id,
            const std::string& sha256, const std::string& out_dir, bool no_split_clean,
            bool raw_code_index, bool single_turn, std::optional<int> max_turns,
            const std::string& apk, const std::string& decompiler_cmd) {
    config::Config cfg = build_config(flags);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.split_and_clean = cfg.split_and_clean && !no_split_clean;
    cfg.use_descriptions = cfg.use_descriptions && !raw_code_index;
    if (max_turns) cfg.max_turns = *max_turns;
    if (single_turn) cfg.max_turns = 1;
    config::validate(cfg); // fail fast, before any work
    maybe_decompile(apk, decompiler_cmd, app_root);

    auto gateway = runner::build_gateway(cfg);
    auto embedder = runner::build_embedder(cfg);

    runner::RunInputs inputs;
    inputs.app_root = app_root;
    inputs.app_id = app_id;
    inputs.sha256 = sha256;

    runner::RunResult result = runner::run_app(inputs, cfg, *gateway, *embedder);
    std::cout << "verdict: " << (result.final_report.verdict.is_malicious ? "malicious" : "benign")
              << "\n";
    std::cout << "artifacts under " << cfg.out_dir.string() << ":\n";
    std::cout << "  " << result.paths.store.string() << "\n";
    std::cout << "  " << result.paths.outcomes.string() << "\n";
    std::cout << "  " << result.paths.report_md.string() << "\n";
    std::cout << "  " << result.paths.report_json.string() << "\n";
    std::cout << "  " << result.paths.verdict.string() << "\n";
    std::cout << "  " << result.paths.manifest.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"method-level RAG pipeline for Android app behavior analysis"};
    app.require_subcommand(1);

    // index
    CommonFlags index_flags;
    std::string index_root, index_app_id, index_sha, index_out;
    bool index_no_split = false, index_raw = false;
    auto* index_cmd = app.add_subcommand("index", "ingest one app into a per-app store");
    index_cmd->add_option("--app-root", index_root, "decompiled source tree")->required();
    index_cmd->add_option("--app-id", index_app_id, "app identifier")->required();
    index_cmd->add_option("--sha256", index_sha, "APK sha256 (64 hex chars)");
    index_cmd->add_flag("--no-split-clean", index_no_split, "index whole files, skip cleaning");
    index_cmd->add_flag("--raw-code-index", index_raw, "skip descriptions, embed code text");
    index_cmd->add_option("--out", index_out, "store file path");
    std::string index_apk, index_decompiler;
    index_cmd->add_option("--apk", index_apk, "APK to decompile before ingesting");
    index_cmd->add_option("--decompiler-cmd", index_decompiler,
                          "decompiler command template ({apk}, {out})");
    add_common_flags(index_cmd, index_flags);

    // analyze
    CommonFlags analyze_flags;
    std::string analyze_store, analyze_queries, analyze_out;
    std::optional<int> analyze_max_turns;
    bool analyze_single = false;
    auto* analyze_cmd = app.add_subcommand("analyze", "run the behavior query battery");
    analyze_cmd->add_option("--store", analyze_store, "store file")->required();
    analyze_cmd->add_option("--queries", analyze_queries, "query file (JSON lines)");
    analyze_cmd->add_option("--max-turns", analyze_max_turns, "analysis turn budget");
    analyze_cmd->add_flag("--single-turn", analyze_single, "single-pass analysis (no follow-ups)");
    analyze_cmd->add_option("--out", analyze_out, "outcomes file")->required();
    add_common_flags(analyze_cmd, analyze_flags);

    // report
    CommonFlags report_flags;
    std::string report_outcomes, report_store, report_format = "markdown", report_out;
    auto* report_cmd = app.add_subcommand("report", "build the final report from outcomes");
    report_cmd->add_option("--outcomes", report_outcomes, "outcomes file")->required();
    report_cmd->add_option("--store", report_store, "store file")->required();
    report_cmd->add_option("--format", report_format, "markdown or structured");
    report_cmd->add_option("--out", report_out, "output path")->required();
    add_common_flags(report_cmd, report_flags);

    // eval
    std::string eval_verdicts, eval_truth, eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "compute detection metrics against ground truth");
    eval_cmd->add_option("--verdicts", eval_verdicts, "verdict dir or JSONL file")->required();
    eval_cmd->add_option("--truth", eval_truth, "ground-truth manifest (JSON lines)")->required();
    eval_cmd->add_option("--out", eval_out, "metrics file")->required();

    // run
    CommonFlags run_flags;
    std::string run_root, run_app_id, run_sha, run_out_dir;
    bool run_no_split = false, run_raw = false, run_single = false;
    std::optional<int> run_max_turns;
    auto* run_cmd = app.add_subcommand("run", "index + analyze + report in one pass");
    run_cmd->add_option("--app-root", run_root, "decompiled source tree")->required();
    run_cmd->add_option("--app-id", run_app_id, "app identifier")->required();
    run_cmd->add_option("--sha256", run_sha, "APK sha256 (64 hex chars)");
    run_cmd->add_option("--out-dir", run_out_dir, "artifact directory");
    run_cmd->add_flag("--no-split-clean", run_no_split, "index whole files, skip cleaning");
    run_cmd->add_flag("--raw-code-index", run_raw, "skip descriptions, embed code text");
    run_cmd->add_flag("--single-turn", run_single, "single-pass analysis (no follow-ups)");
    run_cmd->add_option("--max-turns", run_max_turns, "analysis turn budget");
    std::string run_apk, run_decompiler;
    run_cmd->add_option("--apk", run_apk, "APK to decompile before ingesting");
    run_cmd->add_option("--decompiler-cmd", run_decompiler,
                        "decompiler command template ({apk}, {out})");
    add_common_flags(run_cmd, run_flags);

    std::vector<std::string> argv_storage = args;
    std::vector<const char*> argv;
    argv.push_back("tracerag");
    for (const std::string& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (index_cmd->parsed()) {
            return cmd_index(index_flags, index_root, index_app_id, index_sha, index_no_split,
                             index_raw, index_out, index_apk, index_decompiler);
        }
        if (analyze_cmd->parsed()) {
            return cmd_analyze(analyze_flags, analyze_store, analyze_queries, analyze_max_turns,
                               analyze_single, analyze_out);
        }
        if (report_cmd->parsed()) {
            return cmd_report(report_flags, report_outcomes, report_store, report_format,
                              report_out);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_verdicts, eval_truth, eval_out);
        }
        if (run_cmd->parsed()) {
            return cmd_run(run_flags, run_root, run_app_id, run_sha, run_out_dir, run_no_split,
                           run_raw, run_single, run_max_turns, run_apk, run_decompiler);
        }
    } catch (const config::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace tracerag::cli
