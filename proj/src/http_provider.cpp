#include "tracerag/llm.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

namespace tracerag::llm {

using nlohmann::json;

namespace {

// "http://host:port/prefix" -> {"http://host:port", "/prefix"}
std::pair<std::string, std::string> split_base_url(const std::string& base) {
    auto scheme_end = base.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base.find('/', host_start);
    if (path_start == std::string::npos) {
        return {base, ""};
    }
    std::string prefix = base.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base.substr(0, path_start), prefix};
}

bool retryable(int status) {
    return status == 429 || status >= 500;
}

class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        auto [host, prefix] = split_base_url(cfg_.base_url);
        json body{{"model", req.model},
                  {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
                  {"temperature", req.temperature},
                  {"max_tokens", req.max_output_tokens}};

        int last_status = 0;
        std::string last_message;
        for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_initial_ms << (attempt - 1)));
            }
            httplib::Client client(host);
            client.set_read_timeout(cfg_.timeout_seconds, 0);
            client.set_connection_timeout(cfg_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) {
                headers.emplace("Authorization", "Bearer " + cfg_.api_key);
            }
            auto start = std::chrono::steady_clock::now();
            auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                                   "application/json");
            if (!res) {
                last_status = 0;
                last_message = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_status = res->status;
                last_message = res->body;
                if (retryable(res->status)) continue;
                break;
            }
            json reply = json::parse(res->body);
            CompletionResponse out;
            out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            if (reply.contains("usage")) {
                out.tokens.input = reply["usage"].value("prompt_tokens", 0);
                out.tokens.output = reply["usage"].value("completion_tokens", 0);
            }
            out.latency_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
            return out;
        }
        throw ProviderError(last_status, last_message);
    }

private:
    HttpProviderConfig cfg_;
};

} // namespace

std::unique_ptr<ChatProvider> make_http_provider(HttpProviderConfig cfg) {
    return std::make_unique<HttpChatProvider>(std::move(cfg));
}

} // namespace tracerag::llm
