#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracerag::llm {

enum class Role {
    cleanser,
    describer,
    analyzer,
    relevance_reviewer,
    collision_reviewer,
    query_reviewer,
    organizer,
};

inline constexpr Role kAllRoles[] = {
    Role::cleanser,          Role::describer,          Role::analyzer,
    Role::relevance_reviewer, Role::collision_reviewer, Role::query_reviewer,
    Role::organizer,
};

std::string_view role_name(Role r);
std::optional<Role> role_from_name(std::string_view name);

struct PromptTemplate {
    Role role;
    std::string template_text; // named {placeholder} slots
    std::set<std::string> required_placeholders;
};

struct MissingPlaceholder : std::runtime_error {
    explicit MissingPlaceholder(const std::string& name)
        : std::runtime_error("missing placeholder: " + name), placeholder(name) {}
    std::string placeholder;
};

// One template per role. Defaults are compiled in; a directory of
// <role>.txt files may override them.
class TemplateRegistry {
public:
    static TemplateRegistry builtin();
    static TemplateRegistry from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(Role r) const;
    std::string render(Role r, const std::map<std::string, std::string>& variables) const;

private:
    std::map<Role, PromptTemplate> templates_;
};

// The built-in template text for one role (what from_directory falls back to
// and what ships in templates/).
std::string_view builtin_template_text(Role r);

struct TokenUsage {
    std::int64_t input = 0;
    std::int64_t output = 0;
};

struct CompletionRequest {
    Role role;
    std::string prompt; // rendered
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 4096;
};

struct CompletionResponse {
    std::string text;
    TokenUsage tokens;
    double latency_ms = 0.0;
};

struct ProviderError : std::runtime_error {
    ProviderError(int status_, const std::string& message)
        : std::runtime_error("provider error (" + std::to_string(status_) + "): " + message),
          status(status_) {}
    int status;
};

struct CacheMiss : std::runtime_error {
    explicit CacheMiss(const std::string& key_)
        : std::runtime_error("replay cache miss for key " + key_), key(key_) {}
    std::string key;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
};

struct HttpProviderConfig {
    std::string base_url = "http://localhost:8080";
    std::string api_key;
    int timeout_seconds = 120;
    int max_attempts = 3;
    int backoff_initial_ms = 500;
};

// Talks to a chat-completions endpoint ({base_url}/chat/completions).
std::unique_ptr<ChatProvider> make_http_provider(HttpProviderConfig cfg);

std::string cache_key(std::string_view role, std::string_view model, std::string_view prompt);

// JSON-lines file of {key, role, response, tokens}; append-friendly,
// last entry wins on duplicate keys.
class ReplayCache {
public:
    ReplayCache() : mu_(std::make_unique<std::mutex>()) {}

    static ReplayCache load(const std::filesystem::path& file);
    void open_for_append(const std::filesystem::path& file);

    std::optional<CompletionResponse> lookup(const std::string& key) const;
    void put(const std::string& key, std::string_view role, const CompletionResponse& resp);
    std::size_t size() const;

private:
    mutable std::unique_ptr<std::mutex> mu_; // keeps the cache movable
    std::map<std::string, CompletionResponse> entries_;
    std::map<std::string, std::string> roles_;
    std::filesystem::path append_path_;
};

enum class GatewayMode { live, replay, record };

struct GatewayConfig {
    GatewayMode mode = GatewayMode::replay;
    std::string model = "o3-mini";
    int concurrency = 4;
    std::filesystem::path cache_path; // required for replay/record
};

// Single chat-completion abstraction: live provider calls, deterministic
// replay, or record (live + persist). Tracks per-role call counts and
// token totals for the run manifest.
class LlmGateway {
public:
    LlmGateway(GatewayConfig cfg, std::shared_ptr<ChatProvider> provider,
               std::shared_ptr<TemplateRegistry> templates);
    ~LlmGateway(); // out of line: Semaphore is incomplete here

    std::string render_prompt(Role r, const std::map<std::string, std::string>& variables) const;

    CompletionResponse complete(const CompletionRequest& req);

    // render + complete for the configured model
    CompletionResponse ask(Role r, const std::map<std::string, std::string>& variables);

    const TemplateRegistry& templates() const { return *templates_; }
    const std::string& model() const { return cfg_.model; }
    GatewayMode mode() const { return cfg_.mode; }

    std::int64_t call_count(Role r) const;
    std::int64_t provider_call_count() const;
    TokenUsage total_tokens() const;

private:
    GatewayConfig cfg_;
    std::shared_ptr<ChatProvider> provider_;
    std::shared_ptr<TemplateRegistry> templates_;
    ReplayCache cache_;

    mutable std::mutex stats_mu_;
    std::map<Role, std::int64_t> calls_;
    std::int64_t provider_calls_ = 0;
    TokenUsage totals_;

    std::unique_ptr<class Semaphore> sem_;
};

} // namespace tracerag::llm
