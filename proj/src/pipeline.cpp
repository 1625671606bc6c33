#include "tracerag/pipeline.hpp"

#include "tracerag/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace tracerag::pipeline {

using nlohmann::json;

namespace {

std::string truncate_for_prompt(const std::string& text, std::size_t cap) {
    if (text.size() <= cap) return text;
    return text.substr(0, cap) + std::string(kTruncationMarker);
}

bool valid_sha256(const std::string& s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

} // namespace

CleanOutcome clean_unit(llm::LlmGateway& gateway, const splitter::CodeUnit& unit) {
    CleanOutcome out;
    std::string prompt_code = unit.body_text;
    std::map<std::string, std::string> vars{{"code", prompt_code}};
    out.prompt_digest = llm::cache_key(llm::role_name(llm::Role::cleanser), gateway.model(),
                                       gateway.render_prompt(llm::Role::cleanser, vars));
    try {
        auto resp = gateway.ask(llm::Role::cleanser, vars);
        if (util::trim(resp.text).empty()) {
            out.text = unit.body_text;
            out.fallback = true;
        } else {
            out.text = resp.text;
        }
    } catch (const std::exception&) {
        out.text = unit.body_text;
        out.fallback = true;
    }
    return out;
}

DescribeOutcome describe_unit(llm::LlmGateway& gateway, const std::string& cleaned,
                              const splitter::CodeUnit& unit, std::size_t oversize_char_cap) {
    (void)unit;
    DescribeOutcome out;
    std::string prompt_code = truncate_for_prompt(cleaned, oversize_char_cap);
    std::map<std::string, std::string> vars{{"code", prompt_code}};
    out.prompt_digest = llm::cache_key(llm::role_name(llm::Role::describer), gateway.model(),
                                       gateway.render_prompt(llm::Role::describer, vars));
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            auto resp = gateway.ask(llm::Role::describer, vars);
            if (!util::trim(resp.text).empty()) {
                out.text = resp.text;
                return out;
            }
        } catch (const std::exception&) {
            break; // gateway errors do not get a second identical attempt
        }
    }
    out.text = cleaned.substr(0, 200);
    out.fallback = true;
    return out;
}

namespace {

struct UnitWork {
    splitter::CodeUnit unit;
    vec::IndexedRecord record;
    ProvenanceEntry prov;
    std::vector<std::string> warnings;
};

void process_unit(UnitWork& work, const PipelineConfig& cfg, llm::LlmGateway& gateway,
                  vec::EmbeddingProvider& embedder, IngestionStats& stats, std::mutex& stats_mu) {
    const splitter::CodeUnit& unit = work.unit;
    work.prov.record_id = unit.unit_id;
    work.prov.raw_text = unit.body_text;

    std::string code_text = unit.body_text;
    if (cfg.split_and_clean) {
        CleanOutcome cleaned = clean_unit(gateway, unit);
        code_text = cleaned.text;
        work.prov.cleaned_text = cleaned.text;
        work.prov.clean_prompt_digest = cleaned.prompt_digest;
        work.prov.clean_fallback = cleaned.fallback;
        std::lock_guard lock(stats_mu);
        if (cleaned.fallback) {
            stats.clean_fallbacks++;
            stats.warnings.push_back("cleanser fallback for " + unit.unit_id + " (" +
                                     unit.class_name + "." + unit.method_name + ")");
        } else {
            stats.cleaned_count++;
        }
    } else {
        work.prov.cleaned_text = code_text;
    }

    vec::IndexedRecord rec;
    rec.record_id = unit.unit_id;
    rec.code_text = code_text;
    rec.method_name = unit.method_name;
    rec.class_name = unit.class_name;
    rec.param_count = static_cast<std::int64_t>(unit.param_count);

    if (cfg.use_descriptions) {
        DescribeOutcome desc = describe_unit(gateway, code_text, unit, cfg.oversize_char_cap);
        rec.description = desc.text;
        work.prov.description = desc.text;
        work.prov.describe_prompt_digest = desc.prompt_digest;
        work.prov.description_fallback = desc.fallback;
        std::lock_guard lock(stats_mu);
        if (desc.fallback) {
            stats.description_fallbacks++;
            stats.warnings.push_back("describer fallback for " + unit.unit_id);
        } else {
            stats.described_count++;
        }
    }

    std::string embed_text = cfg.use_descriptions ? vec::index_text_for(rec) : rec.code_text;
    rec.embedding = embedder.embed(embed_text);
    work.record = std::move(rec);
}

} // namespace

IngestResult ingest_app(const AppMeta& meta, const PipelineConfig& cfg, llm::LlmGateway& gateway,
                        vec::EmbeddingProvider& embedder) {
    if (!meta.sha256.empty() && !valid_sha256(meta.sha256)) {
        throw std::invalid_argument("sha256 must be 64 lowercase hex chars");
    }

    llm::TokenUsage tokens_before = gateway.total_tokens();

    std::vector<splitter::CodeUnit> units;
    IngestionStats stats;

    if (cfg.split_and_clean) {
        splitter::ParseResult parsed = splitter::parse_source_tree(meta.source_root);
        units = std::move(parsed.units);
        for (const auto& w : parsed.warnings) {
            stats.warnings.push_back(w.path + ": " + w.message);
        }
    } else {
        // ablation: one record per file, no splitting, no cleaning
        namespace fs = std::filesystem;
        if (!fs::exists(meta.source_root)) {
            throw splitter::RootNotFound(meta.source_root.string());
        }
        std::vector<std::pair<std::string, fs::path>> files;
        for (const auto& entry : fs::recursive_directory_iterator(
                 meta.source_root, fs::directory_options::skip_permission_denied)) {
            if (entry.is_regular_file() && entry.path().extension() == ".java") {
                files.emplace_back(fs::relative(entry.path(), meta.source_root).generic_string(),
                                   entry.path());
            }
        }
        if (files.empty()) {
            throw splitter::EmptyTree(meta.source_root.string());
        }
        std::sort(files.begin(), files.end());
        for (const auto& [rel, abs] : files) {
            splitter::CodeUnit unit;
            unit.source_path = rel;
            unit.body_text = util::read_file(abs);
            std::string dotted = rel.substr(0, rel.size() - 5); // strip .java
            std::replace(dotted.begin(), dotted.end(), '/', '.');
            unit.class_name = dotted;
            unit.method_name = "";
            unit.param_count = 0;
            unit.span_begin = 0;
            unit.span_end = unit.body_text.size();
            unit.unit_id = util::sha256_hex("file\x1f" + rel).substr(0, 16);
            units.push_back(std::move(unit));
        }
    }

    stats.unit_count = units.size();

    std::string package_name = meta.package_name;
    if (package_name.empty()) {
        package_name = splitter::derive_package_name(units);
    }

    std::vector<UnitWork> work(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        work[i].unit = std::move(units[i]);
    }

    std::mutex stats_mu;
    std::atomic<std::size_t> next{0};
    int workers = std::max(1, cfg.concurrency);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= work.size()) break;
                    process_unit(work[i], cfg, gateway, embedder, stats, stats_mu);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    vec::Store store(meta.app_id, embedder.dim());
    store.set_meta("package_name", package_name);
    store.set_meta("sha256", meta.sha256);
    store.set_meta("embedder", embedder.name());

    IngestResult result{std::move(store), std::move(stats), {}};
    for (UnitWork& w : work) {
        result.store.upsert(std::move(w.record));
        result.provenance.push_back(std::move(w.prov));
    }
    std::sort(result.provenance.begin(), result.provenance.end(),
              [](const ProvenanceEntry& a, const ProvenanceEntry& b) {
                  return a.record_id < b.record_id;
              });

    llm::TokenUsage tokens_after = gateway.total_tokens();
    result.stats.tokens.input = tokens_after.input - tokens_before.input;
    result.stats.tokens.output = tokens_after.output - tokens_before.output;
    return result;
}

void write_provenance(const std::filesystem::path& path,
                      const std::vector<ProvenanceEntry>& entries) {
    std::string body;
    for (const ProvenanceEntry& e : entries) {
        json j{{"record_id", e.record_id},
               {"raw_text", e.raw_text},
               {"cleaned_text", e.cleaned_text},
               {"description", e.description},
               {"clean_prompt_digest", e.clean_prompt_digest},
               {"describe_prompt_digest", e.describe_prompt_digest},
               {"clean_fallback", e.clean_fallback},
               {"description_fallback", e.description_fallback}};
        body += j.dump();
        body += "\n";
    }
    util::write_file(path, body);
}

std::filesystem::path provenance_path_for(const std::filesystem::path& store_path) {
    std::filesystem::path p = store_path;
    p.replace_extension(".prov.jsonl");
    return p;
}

std::string tree_digest(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::vector<std::pair<std::string, fs::path>> files;
    for (const auto& entry :
         fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied)) {
        if (entry.is_regular_file() && entry.path().extension() == ".java") {
            files.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    util::Sha256 h;
    for (const auto& [rel, abs] : files) {
        h.update(rel);
        h.update(std::string_view("\0", 1));
        h.update(util::read_file(abs));
        h.update(std::string_view("\0", 1));
    }
    return h.hex_digest();
}

} // namespace tracerag::pipeline
