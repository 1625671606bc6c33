#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracerag::vec {

struct EmptyText : std::runtime_error {
    EmptyText() : std::runtime_error("cannot embed empty text") {}
};

struct DimMismatch : std::runtime_error {
    DimMismatch(std::size_t got, std::size_t want)
        : std::runtime_error("embedding dim " + std::to_string(got) + " does not match " +
                             std::to_string(want)) {}
};

struct EmptyStore : std::runtime_error {
    EmptyStore() : std::runtime_error("search over empty store") {}
};

struct NoFilterFields : std::runtime_error {
    NoFilterFields() : std::runtime_error("metadata filter needs at least one field") {}
};

struct CorruptStore : std::runtime_error {
    explicit CorruptStore(const std::string& why) : std::runtime_error("corrupt store: " + why) {}
};

// Finite, non-zero vector; rejects NaN/inf and all-zero values at construction.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

inline constexpr std::size_t kMockDim = 256;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
};

// Deterministic offline embedder: lowercase, split on non-alphanumeric runs,
// FNV-1a 64 per token, bucket = digest mod 256, accumulate counts,
// L2-normalize.
std::unique_ptr<EmbeddingProvider> make_mock_embedder();

struct RemoteEmbedderConfig {
    std::string base_url;
    std::string api_key;
    std::string model = "text-embedding-ada-002";
    std::size_t dim = 1536;
    int timeout_seconds = 60;
    int max_attempts = 3;
    int backoff_initial_ms = 500;
};

std::unique_ptr<EmbeddingProvider> make_remote_embedder(RemoteEmbedderConfig cfg);

struct IndexedRecord {
    std::string record_id; // equals the splitter unit_id
    std::string code_text;
    std::string description;
    std::string method_name;
    std::string class_name;
    std::int64_t param_count = 0;
    EmbeddingVector embedding;

    bool operator==(const IndexedRecord&) const = default;
};

// "class: ...\nmethod: ...\n<description>" — the text that gets embedded.
std::string index_text_for(const IndexedRecord& record);

struct RetrievalResult {
    std::string record_id;
    double score = 0.0; // cosine in [-1, 1]
    int rank = 0;       // 1-based

    bool operator==(const RetrievalResult&) const = default;
};

struct MetadataFilter {
    std::optional<std::string> method_name;
    std::optional<std::string> class_name;
    std::optional<std::int64_t> param_count;

    bool empty() const { return !method_name && !class_name && !param_count; }
};

// Per-app flat store with exact top-k cosine scan and exact-match metadata
// filtering. One instance per app keeps apps isolated by construction.
class Store {
public:
    Store(std::string app_id, std::size_t dim);

    const std::string& app_id() const { return app_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t count() const;

    // extra header fields persisted with the store (package name, hash,
    // embedder identity); values must be stable for byte-identical saves
    void set_meta(const std::string& key, const std::string& value);
    std::string meta(const std::string& key) const;

    std::string upsert(IndexedRecord record);
    std::optional<IndexedRecord> get(const std::string& record_id) const;

    std::vector<RetrievalResult> search(const EmbeddingVector& query, std::size_t k,
                                        const std::optional<MetadataFilter>& filter = {}) const;

    std::set<std::string> filter_candidates(const MetadataFilter& filter) const;

    std::vector<std::string> record_ids() const;

    // read-only pass over all records in id order, without copying them
    void for_each(const std::function<void(const IndexedRecord&)>& fn) const;

    void save(const std::filesystem::path& path) const;
    static Store load(const std::filesystem::path& path);

private:
    std::string app_id_;
    std::size_t dim_;
    std::map<std::string, std::string> meta_;
    std::map<std::string, IndexedRecord> records_; // keyed by record_id
    // behind a pointer so store handles stay movable
    mutable std::unique_ptr<std::shared_mutex> mu_;
};

} // namespace tracerag::vec
