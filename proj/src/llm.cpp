#include "tracerag/llm.hpp"

#include "tracerag/util.hpp"

#include <json.hpp>

#include <condition_variable>
#include <fstream>
#include <sstream>

namespace tracerag::llm {

using nlohmann::json;

std::string_view role_name(Role r) {
    switch (r) {
    case Role::cleanser: return "Cleanser";
    case Role::describer: return "Describer";
    case Role::analyzer: return "Analyzer";
    case Role::relevance_reviewer: return "RelevanceReviewer";
    case Role::collision_reviewer: return "CollisionReviewer";
    case Role::query_reviewer: return "QueryReviewer";
    case Role::organizer: return "Organizer";
    }
    return "Unknown";
}

std::optional<Role> role_from_name(std::string_view name) {
    for (Role r : kAllRoles) {
        if (role_name(r) == name) return r;
    }
    return std::nullopt;
}

namespace {

bool is_slot_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Placeholders are {name} runs in the template; literal braces that do not
// form a name slot pass through, and substituted values are never re-scanned
// (code fragments full of braces are safe).
std::set<std::string> scan_placeholders(std::string_view text) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_slot_char(text[j])) ++j;
        if (j > i + 1 && j < text.size() && text[j] == '}') {
            out.insert(std::string(text.substr(i + 1, j - i - 1)));
            i = j;
        }
    }
    return out;
}

} // namespace

TemplateRegistry TemplateRegistry::builtin() {
    TemplateRegistry reg;
    for (Role r : kAllRoles) {
        std::string text(builtin_template_text(r));
        reg.templates_[r] = PromptTemplate{r, text, scan_placeholders(text)};
    }
    return reg;
}

TemplateRegistry TemplateRegistry::from_directory(const std::filesystem::path& dir) {
    TemplateRegistry reg = builtin();
    for (Role r : kAllRoles) {
        // RelevanceReviewer -> relevance_reviewer.txt
        std::string snake;
        for (char c : std::string(role_name(r))) {
            if (std::isupper(static_cast<unsigned char>(c)) && !snake.empty()) snake.push_back('_');
            snake.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        auto path = dir / (snake + ".txt");
        if (std::filesystem::exists(path)) {
            std::string text = util::read_file(path);
            reg.templates_[r] = PromptTemplate{r, text, scan_placeholders(text)};
        }
    }
    return reg;
}

const PromptTemplate& TemplateRegistry::get(Role r) const {
    return templates_.at(r);
}

std::string TemplateRegistry::render(Role r,
                                     const std::map<std::string, std::string>& variables) const {
    const PromptTemplate& tpl = templates_.at(r);
    const std::string& text = tpl.template_text;
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_slot_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                std::string name(text.substr(i + 1, j - i - 1));
                auto it = variables.find(name);
                if (it == variables.end()) {
                    throw MissingPlaceholder(name);
                }
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

std::string cache_key(std::string_view role, std::string_view model, std::string_view prompt) {
    util::Sha256 h;
    h.update(role);
    h.update("\x1f");
    h.update(model);
    h.update("\x1f");
    h.update(prompt);
    return h.hex_digest();
}

// ---------------------------------------------------------------------------

ReplayCache ReplayCache::load(const std::filesystem::path& file) {
    ReplayCache cache;
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot open replay cache: " + file.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).empty()) continue;
        json j = json::parse(line);
        CompletionResponse resp;
        resp.text = j.at("response").get<std::string>();
        resp.tokens.input = j.value("tokens", json::object()).value("input", 0);
        resp.tokens.output = j.value("tokens", json::object()).value("output", 0);
        cache.entries_[j.at("key").get<std::string>()] = std::move(resp);
        cache.roles_[j.at("key").get<std::string>()] = j.value("role", "");
    }
    return cache;
}

void ReplayCache::open_for_append(const std::filesystem::path& file) {
    std::lock_guard lock(*mu_);
    append_path_ = file;
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
}

std::optional<CompletionResponse> ReplayCache::lookup(const std::string& key) const {
    std::lock_guard lock(*mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ReplayCache::put(const std::string& key, std::string_view role,
                      const CompletionResponse& resp) {
    std::lock_guard lock(*mu_);
    entries_[key] = resp;
    roles_[key] = std::string(role);
    if (!append_path_.empty()) {
        json j{{"key", key},
               {"role", std::string(role)},
               {"response", resp.text},
               {"tokens", {{"input", resp.tokens.input}, {"output", resp.tokens.output}}}};
        std::ofstream out(append_path_, std::ios::app);
        out << j.dump() << "\n";
    }
}

std::size_t ReplayCache::size() const {
    std::lock_guard lock(*mu_);
    return entries_.size();
}

// ---------------------------------------------------------------------------

class Semaphore {
public:
    explicit Semaphore(int slots) : slots_(slots) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

LlmGateway::LlmGateway(GatewayConfig cfg, std::shared_ptr<ChatProvider> provider,
                       std::shared_ptr<TemplateRegistry> templates)
    : cfg_(std::move(cfg)), provider_(std::move(provider)), templates_(std::move(templates)) {
    if (!templates_) {
        templates_ = std::make_shared<TemplateRegistry>(TemplateRegistry::builtin());
    }
    if (cfg_.mode == GatewayMode::replay || cfg_.mode == GatewayMode::record) {
        if (cfg_.cache_path.empty()) {
            throw std::runtime_error("replay/record mode requires a cache path");
        }
        if (std::filesystem::exists(cfg_.cache_path)) {
            cache_ = ReplayCache::load(cfg_.cache_path);
        } else if (cfg_.mode == GatewayMode::replay) {
            throw std::runtime_error("replay cache file not found: " + cfg_.cache_path.string());
        }
        if (cfg_.mode == GatewayMode::record) {
            cache_.open_for_append(cfg_.cache_path);
        }
    }
    sem_ = std::make_unique<Semaphore>(std::max(1, cfg_.concurrency));
}

LlmGateway::~LlmGateway() = default;

std::string LlmGateway::render_prompt(Role r,
                                      const std::map<std::string, std::string>& variables) const {
    return templates_->render(r, variables);
}

CompletionResponse LlmGateway::complete(const CompletionRequest& req) {
    const std::string key = cache_key(role_name(req.role), req.model, req.prompt);

    auto count = [&](const CompletionResponse& resp) {
        std::lock_guard lock(stats_mu_);
        calls_[req.role]++;
        totals_.input += resp.tokens.input;
        totals_.output += resp.tokens.output;
    };

    if (cfg_.mode == GatewayMode::replay) {
        auto hit = cache_.lookup(key);
        if (!hit) {
            throw CacheMiss(key);
        }
        count(*hit);
        return *hit;
    }

    if (cfg_.mode == GatewayMode::record) {
        if (auto hit = cache_.lookup(key)) {
            count(*hit);
            return *hit;
        }
    }

    if (!provider_) {
        throw ProviderError(0, "no provider configured for live call");
    }
    sem_->acquire();
    CompletionResponse resp;
    try {
        resp = provider_->complete(req);
    } catch (...) {
        sem_->release();
        throw;
    }
    sem_->release();
    {
        std::lock_guard lock(stats_mu_);
        provider_calls_++;
    }
    if (cfg_.mode == GatewayMode::record) {
        cache_.put(key, role_name(req.role), resp);
    }
    count(resp);
    return resp;
}

CompletionResponse LlmGateway::ask(Role r, const std::map<std::string, std::string>& variables) {
    CompletionRequest req;
    req.role = r;
    req.prompt = render_prompt(r, variables);
    req.model = cfg_.model;
    req.temperature = 0.0;
    return complete(req);
}

std::int64_t LlmGateway::call_count(Role r) const {
    std::lock_guard lock(stats_mu_);
    auto it = calls_.find(r);
    return it == calls_.end() ? 0 : it->second;
}

std::int64_t LlmGateway::provider_call_count() const {
    std::lock_guard lock(stats_mu_);
    return provider_calls_;
}

TokenUsage LlmGateway::total_tokens() const {
    std::lock_guard lock(stats_mu_);
    return totals_;
}

} // namespace tracerag::llm
