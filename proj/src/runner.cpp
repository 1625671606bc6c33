#include "tracerag/runner.hpp"

#include "tracerag/util.hpp"

#include <json.hpp>

#include <chrono>

namespace tracerag::runner {

using nlohmann::json;

std::shared_ptr<llm::LlmGateway> build_gateway(const config::Config& cfg,
                                               std::shared_ptr<llm::ChatProvider> provider) {
    llm::GatewayConfig gw;
    gw.model = cfg.model;
    gw.concurrency = cfg.concurrency;
    gw.cache_path = cfg.cache_path;
    if (cfg.mode == "live") gw.mode = llm::GatewayMode::live;
    else if (cfg.mode == "record") gw.mode = llm::GatewayMode::record;
    else gw.mode = llm::GatewayMode::replay;

    if (!provider && gw.mode != llm::GatewayMode::replay) {
        llm::HttpProviderConfig http;
        http.base_url = cfg.provider_base_url;
        http.api_key = cfg.api_key;
        http.backoff_initial_ms = cfg.backoff_initial_ms;
        provider = make_http_provider(http);
    }
    auto templates = std::make_shared<llm::TemplateRegistry>(
        cfg.templates_dir.empty() ? llm::TemplateRegistry::builtin()
                                  : llm::TemplateRegistry::from_directory(cfg.templates_dir));
    return std::make_shared<llm::LlmGateway>(gw, std::move(provider), std::move(templates));
}

std::unique_ptr<vec::EmbeddingProvider> build_embedder(const config::Config& cfg) {
    if (cfg.embedding_provider == "remote") {
        vec::RemoteEmbedderConfig remote;
        remote.base_url = cfg.provider_base_url;
        remote.api_key = cfg.api_key;
        remote.model = cfg.embed_model;
        remote.dim = cfg.remote_embed_dim;
        remote.backoff_initial_ms = cfg.backoff_initial_ms;
        return vec::make_remote_embedder(remote);
    }
    return vec::make_mock_embedder();
}

RunPaths artifact_paths(const std::filesystem::path& out_dir) {
    RunPaths p;
    p.store = out_dir / "store.jsonl";
    p.provenance = pipeline::provenance_path_for(p.store);
    p.outcomes = out_dir / "outcomes.jsonl";
    p.report_md = out_dir / "report.md";
    p.report_json = out_dir / "report.json";
    p.verdict = out_dir / "verdict.json";
    p.manifest = out_dir / "manifest.json";
    return p;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

} // namespace

RunResult run_app(const RunInputs& inputs, const config::Config& cfg, llm::LlmGateway& gateway,
                  vec::EmbeddingProvider& embedder) {
    config::validate(cfg);

    RunPaths paths = artifact_paths(cfg.out_dir);
    std::filesystem::create_directories(cfg.out_dir);

    auto t_start = std::chrono::steady_clock::now();

    pipeline::AppMeta meta;
    meta.app_id = inputs.app_id;
    meta.source_root = inputs.app_root;
    meta.sha256 = inputs.sha256.empty() ? pipeline::tree_digest(inputs.app_root) : inputs.sha256;

    pipeline::PipelineConfig pcfg;
    pcfg.split_and_clean = cfg.split_and_clean;
    pcfg.use_descriptions = cfg.use_descriptions;
    pcfg.oversize_char_cap = cfg.oversize_char_cap;
    pcfg.concurrency = cfg.concurrency;

    pipeline::IngestResult ingest = pipeline::ingest_app(meta, pcfg, gateway, embedder);
    double t_ingest = ms_since(t_start);

    ingest.store.save(paths.store);
    pipeline::write_provenance(paths.provenance, ingest.provenance);

    auto t_analysis_start = std::chrono::steady_clock::now();
    analysis::AnalysisConfig acfg;
    acfg.top_k = cfg.top_k;
    acfg.max_turns = cfg.max_turns;
    analysis::BatteryResult battery =
        analysis::run_battery(gateway, ingest.store, embedder, analysis::default_queries(), acfg);
    double t_analysis = ms_since(t_analysis_start);

    util::write_file(paths.outcomes, analysis::outcomes_to_jsonl(battery.outcomes));

    auto t_report_start = std::chrono::steady_clock::now();
    report::AppInfo app_info;
    app_info.app_id = meta.app_id;
    app_info.package_name = ingest.store.meta("package_name");
    app_info.sha256 = meta.sha256;
    app_info.unit_count = ingest.store.count();

    std::vector<report::QueryReport> query_reports;
    for (const analysis::QueryOutcome& outcome : battery.outcomes) {
        query_reports.push_back(report::build_query_report(gateway, ingest.store, outcome));
    }
    report::FinalReport final_report =
        report::build_final_report(gateway, app_info, query_reports);
    double t_report = ms_since(t_report_start);

    util::write_file(paths.report_md, report::render_markdown(final_report));
    util::write_file(paths.report_json, report::render_structured(final_report));
    util::write_file(paths.verdict, report::verdict_to_json(app_info, final_report.verdict));

    // run manifest: counters, tokens, warnings, timings (not a report
    // artifact; timing values vary run to run)
    json calls = json::object();
    for (llm::Role r : llm::kAllRoles) {
        calls[std::string(llm::role_name(r))] = gateway.call_count(r);
    }
    llm::TokenUsage tokens = gateway.total_tokens();
    std::vector<std::string> warnings = ingest.stats.warnings;
    warnings.insert(warnings.end(), battery.stats.warnings.begin(), battery.stats.warnings.end());
    json manifest{
        {"app_id", meta.app_id},
        {"package_name", app_info.package_name},
        {"sha256", meta.sha256},
        {"unit_count", app_info.unit_count},
        {"store_records", ingest.store.count()},
        {"calls_by_role", calls},
        {"provider_calls", gateway.provider_call_count()},
        {"followups_resolved", battery.stats.followups_resolved},
        {"tokens", {{"input", tokens.input}, {"output", tokens.output},
                    {"total", tokens.input + tokens.output}}},
        {"warnings", warnings},
        {"verdict", final_report.verdict.is_malicious ? "malicious" : "benign"},
        {"config",
         {{"mode", cfg.mode},
          {"model", cfg.model},
          {"embedding_provider", cfg.embedding_provider},
          {"top_k", cfg.top_k},
          {"max_turns", cfg.max_turns},
          {"split_and_clean", cfg.split_and_clean},
          {"use_descriptions", cfg.use_descriptions}}},
        {"timings_ms",
         {{"ingest", t_ingest}, {"analysis", t_analysis}, {"report", t_report},
          {"total", ms_since(t_start)}}}};
    util::write_file(paths.manifest, manifest.dump(2) + "\n");

    RunResult result;
    result.final_report = std::move(final_report);
    result.paths = paths;
    result.ingest_stats = std::move(ingest.stats);
    result.analysis_stats = std::move(battery.stats);
    return result;
}

} // namespace tracerag::runner
