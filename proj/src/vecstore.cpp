#include "tracerag/vecstore.hpp"

#include "tracerag/kernels.hpp"
#include "tracerag/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace tracerag::vec {

using nlohmann::json;

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    bool any_nonzero = false;
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("embedding value not finite");
        }
        if (v != 0.0) any_nonzero = true;
    }
    if (values_.empty() || !any_nonzero) {
        throw std::runtime_error("embedding must be non-empty and non-zero");
    }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimMismatch(b.dim(), a.dim());
    }
    // index-order scalar arithmetic: ranking ties must be bit-reproducible
    // against a straightforward brute-force rescan
    double dot = kernels::dot_scalar(a.values(), b.values());
    double na = std::sqrt(kernels::dot_scalar(a.values(), a.values()));
    double nb = std::sqrt(kernels::dot_scalar(b.values(), b.values()));
    double c = dot / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::string index_text_for(const IndexedRecord& record) {
    return "class: " + record.class_name + "\nmethod: " + record.method_name + "\n" +
           record.description;
}

// ---------------------------------------------------------------------------

namespace {

class MockEmbedder : public EmbeddingProvider {
public:
    EmbeddingVector embed(const std::string& text) override {
        if (util::trim(text).empty()) {
            throw EmptyText();
        }
        std::vector<double> buckets(kMockDim, 0.0);
        for (const std::string& token : util::tokenize_alnum(text)) {
            std::uint64_t digest = util::fnv1a64(token);
            buckets[digest % kMockDim] += 1.0;
        }
        double norm = kernels::l2_norm(buckets);
        if (norm == 0.0) {
            throw EmptyText();
        }
        for (double& v : buckets) v /= norm;
        return EmbeddingVector(std::move(buckets));
    }

    std::size_t dim() const override { return kMockDim; }
    std::string name() const override { return "mock"; }
};

} // namespace

std::unique_ptr<EmbeddingProvider> make_mock_embedder() {
    return std::make_unique<MockEmbedder>();
}

// ---------------------------------------------------------------------------

Store::Store(std::string app_id, std::size_t dim)
    : app_id_(std::move(app_id)), dim_(dim), mu_(std::make_unique<std::shared_mutex>()) {
    if (dim_ == 0) {
        throw std::runtime_error("store dim must be positive");
    }
}

std::size_t Store::count() const {
    std::shared_lock lock(*mu_);
    return records_.size();
}

void Store::set_meta(const std::string& key, const std::string& value) {
    std::unique_lock lock(*mu_);
    meta_[key] = value;
}

std::string Store::meta(const std::string& key) const {
    std::shared_lock lock(*mu_);
    auto it = meta_.find(key);
    return it == meta_.end() ? std::string() : it->second;
}

std::string Store::upsert(IndexedRecord record) {
    if (record.embedding.dim() != dim_) {
        throw DimMismatch(record.embedding.dim(), dim_);
    }
    std::unique_lock lock(*mu_);
    std::string id = record.record_id;
    records_[id] = std::move(record);
    return id;
}

std::optional<IndexedRecord> Store::get(const std::string& record_id) const {
    std::shared_lock lock(*mu_);
    auto it = records_.find(record_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

namespace {

// SIMD scores differ from index-order scalar scores by at most a few ulps;
// this margin is orders of magnitude wider than that bound, so the prefilter
// can never drop a record the exact rescore would have ranked into the top k.
constexpr double kPrefilterMargin = 1e-9;

} // namespace

std::vector<RetrievalResult> Store::search(const EmbeddingVector& query, std::size_t k,
                                           const std::optional<MetadataFilter>& filter) const {
    if (query.dim() != dim_) {
        throw DimMismatch(query.dim(), dim_);
    }
    std::shared_lock lock(*mu_);
    if (records_.empty() && (!filter || filter->empty())) {
        throw EmptyStore();
    }

    std::vector<const IndexedRecord*> candidates;
    candidates.reserve(records_.size());
    for (const auto& [id, rec] : records_) {
        if (filter && !filter->empty()) {
            if (filter->method_name && rec.method_name != *filter->method_name) continue;
            if (filter->class_name && rec.class_name != *filter->class_name) continue;
            if (filter->param_count && rec.param_count != *filter->param_count) continue;
        }
        candidates.push_back(&rec);
    }

    // wide scan with the dispatched kernel, exact rescore of the survivors
    if (candidates.size() > k) {
        const double qnorm = kernels::l2_norm(query.values());
        std::vector<double> approx(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& values = candidates[i]->embedding.values();
            approx[i] = kernels::dot(query.values(), values) /
                        (qnorm * kernels::l2_norm(values));
        }
        std::vector<double> top(approx);
        std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k) - 1,
                         top.end(), std::greater<double>());
        double threshold = top[k - 1] - kPrefilterMargin;
        std::vector<const IndexedRecord*> kept;
        kept.reserve(k + 8);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (approx[i] >= threshold) kept.push_back(candidates[i]);
        }
        candidates = std::move(kept);
    }

    std::vector<RetrievalResult> scored;
    scored.reserve(candidates.size());
    for (const IndexedRecord* rec : candidates) {
        RetrievalResult r;
        r.record_id = rec->record_id;
        r.score = cosine(query, rec->embedding);
        scored.push_back(std::move(r));
    }
    std::sort(scored.begin(), scored.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.record_id < b.record_id;
    });
    if (scored.size() > k) {
        scored.resize(k);
    }
    for (std::size_t i = 0; i < scored.size(); ++i) {
        scored[i].rank = static_cast<int>(i) + 1;
    }
    return scored;
}

std::set<std::string> Store::filter_candidates(const MetadataFilter& filter) const {
    if (filter.empty()) {
        throw NoFilterFields();
    }
    std::shared_lock lock(*mu_);
    std::set<std::string> out;
    for (const auto& [id, rec] : records_) {
        if (filter.method_name && rec.method_name != *filter.method_name) continue;
        if (filter.class_name && rec.class_name != *filter.class_name) continue;
        if (filter.param_count && rec.param_count != *filter.param_count) continue;
        out.insert(id);
    }
    return out;
}

std::vector<std::string> Store::record_ids() const {
    std::shared_lock lock(*mu_);
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& [id, _] : records_) out.push_back(id);
    return out;
}

void Store::for_each(const std::function<void(const IndexedRecord&)>& fn) const {
    std::shared_lock lock(*mu_);
    for (const auto& [_, rec] : records_) fn(rec);
}

// ---------------------------------------------------------------------------
// File format: first line is a header object {app_id, dim, count, checksum,
// meta}, followed by one record object per line. The checksum is FNV-1a 64
// over the record lines (newlines included).

namespace {

json record_to_json(const IndexedRecord& r) {
    return json{{"record_id", r.record_id},
                {"code_text", r.code_text},
                {"description", r.description},
                {"method_name", r.method_name},
                {"class_name", r.class_name},
                {"param_count", r.param_count},
                {"embedding", r.embedding.values()}};
}

IndexedRecord record_from_json(const json& j) {
    IndexedRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.code_text = j.at("code_text").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.method_name = j.at("method_name").get<std::string>();
    r.class_name = j.at("class_name").get<std::string>();
    r.param_count = j.at("param_count").get<std::int64_t>();
    r.embedding = EmbeddingVector(j.at("embedding").get<std::vector<double>>());
    return r;
}

} // namespace

void Store::save(const std::filesystem::path& path) const {
    std::shared_lock lock(*mu_);
    std::string body;
    for (const auto& [id, rec] : records_) {
        body += record_to_json(rec).dump();
        body += "\n";
    }
    json header{{"app_id", app_id_},
                {"dim", dim_},
                {"count", records_.size()},
                {"checksum", util::to_hex(util::fnv1a64(body))},
                {"meta", meta_}};
    util::write_file(path, header.dump() + "\n" + body);
}

Store Store::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorruptStore("cannot open " + path.string());
    }
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw CorruptStore("missing header");
    }
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw CorruptStore(std::string("bad header: ") + e.what());
    }
    if (!header.contains("app_id") || !header.contains("dim") || !header.contains("count") ||
        !header.contains("checksum")) {
        throw CorruptStore("header missing required fields");
    }

    std::string body;
    {
        std::ostringstream rest;
        rest << in.rdbuf();
        body = rest.str();
    }
    if (util::to_hex(util::fnv1a64(body)) != header["checksum"].get<std::string>()) {
        throw CorruptStore("checksum mismatch");
    }

    Store store(header["app_id"].get<std::string>(), header["dim"].get<std::size_t>());
    if (header.contains("meta")) {
        for (const auto& [k, v] : header["meta"].items()) {
            store.meta_[k] = v.get<std::string>();
        }
    }
    std::istringstream lines(body);
    std::string line;
    std::size_t parsed = 0;
    while (std::getline(lines, line)) {
        if (util::trim(line).empty()) continue;
        IndexedRecord rec;
        try {
            rec = record_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw CorruptStore(std::string("bad record: ") + e.what());
        }
        if (rec.embedding.dim() != store.dim_) {
            throw CorruptStore("record dim does not match header dim");
        }
        store.records_[rec.record_id] = std::move(rec);
        ++parsed;
    }
    if (parsed != header["count"].get<std::size_t>()) {
        throw CorruptStore("record count does not match header");
    }
    return store;
}

} // namespace tracerag::vec
