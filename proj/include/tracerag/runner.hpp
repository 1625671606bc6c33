#pragma once

#include "tracerag/analysis.hpp"
#include "tracerag/config.hpp"
#include "tracerag/llm.hpp"
#include "tracerag/pipeline.hpp"
#include "tracerag/report.hpp"
#include "tracerag/vecstore.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace tracerag::runner {

// gateway + embedder wired from config; the provider is only constructed for
// live/record modes so replay runs cannot touch the network
std::shared_ptr<llm::LlmGateway> build_gateway(const config::Config& cfg,
                                               std::shared_ptr<llm::ChatProvider> provider = {});
std::unique_ptr<vec::EmbeddingProvider> build_embedder(const config::Config& cfg);

struct RunInputs {
    std::filesystem::path app_root;
    std::string app_id;
    std::string sha256; // optional; tree digest when empty
};

struct RunPaths {
    std::filesystem::path store;
    std::filesystem::path provenance;
    std::filesystem::path outcomes;
    std::filesystem::path report_md;
    std::filesystem::path report_json;
    std::filesystem::path verdict;
    std::filesystem::path manifest;
};

RunPaths artifact_paths(const std::filesystem::path& out_dir);

struct RunResult {
    report::FinalReport final_report;
    RunPaths paths;
    pipeline::IngestionStats ingest_stats;
    analysis::AnalysisStats analysis_stats;
};

// The full pipeline: ingest, battery, reports, verdict, manifest. All
// artifacts land under cfg.out_dir; report artifacts carry no timestamps so
// replay runs are byte-identical.
RunResult run_app(const RunInputs& inputs, const config::Config& cfg, llm::LlmGateway& gateway,
                  vec::EmbeddingProvider& embedder);

} // namespace tracerag::runner
