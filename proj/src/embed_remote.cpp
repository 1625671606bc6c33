#include "tracerag/vecstore.hpp"

#include "tracerag/llm.hpp" // ProviderError
#include "tracerag/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

namespace tracerag::vec {

using nlohmann::json;

namespace {

class RemoteEmbedder : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {}

    EmbeddingVector embed(const std::string& text) override {
        if (util::trim(text).empty()) {
            throw EmptyText();
        }
        auto scheme_end = cfg_.base_url.find("://");
        std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = cfg_.base_url.find('/', host_start);
        std::string host = path_start == std::string::npos ? cfg_.base_url
                                                           : cfg_.base_url.substr(0, path_start);
        std::string prefix = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

        json body{{"model", cfg_.model}, {"input", text}};
        int last_status = 0;
        std::string last_message;
        for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_initial_ms << (attempt - 1)));
            }
            httplib::Client client(host);
            client.set_read_timeout(cfg_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) {
                headers.emplace("Authorization", "Bearer " + cfg_.api_key);
            }
            auto res = client.Post(prefix + "/embeddings", headers, body.dump(), "application/json");
            if (!res) {
                last_status = 0;
                last_message = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_status = res->status;
                last_message = res->body;
                if (res->status == 429 || res->status >= 500) continue;
                break;
            }
            json reply = json::parse(res->body);
            auto values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
            return EmbeddingVector(std::move(values));
        }
        throw llm::ProviderError(last_status, last_message);
    }

    std::size_t dim() const override { return cfg_.dim; }
    std::string name() const override { return "remote"; }

private:
    RemoteEmbedderConfig cfg_;
};

} // namespace

std::unique_ptr<EmbeddingProvider> make_remote_embedder(RemoteEmbedderConfig cfg) {
    return std::make_unique<RemoteEmbedder>(std::move(cfg));
}

} // namespace tracerag::vec
