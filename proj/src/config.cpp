#include "tracerag/config.hpp"

#include "tracerag/util.hpp"

#include <cstdlib>
#include <sstream>

namespace tracerag::config {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    std::string low = util::to_lower(v);
    if (low == "true" || low == "1" || low == "yes" || low == "on") return true;
    if (low == "false" || low == "0" || low == "no" || low == "off") return false;
    throw ConfigError("bad boolean for " + key + ": " + v);
}

long parse_int(const std::string& v, const std::string& key) {
    try {
        return std::stol(v);
    } catch (...) {
        throw ConfigError("bad integer for " + key + ": " + v);
    }
}

} // namespace

Config parse_config_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = util::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + " is not key = value");
        }
        std::string key = util::trim(stripped.substr(0, eq));
        std::string value = util::trim(stripped.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }

        if (key == "provider_base_url") cfg.provider_base_url = value;
        else if (key == "model") cfg.model = value;
        else if (key == "embed_model") cfg.embed_model = value;
        else if (key == "api_key") cfg.api_key = value;
        else if (key == "mode") cfg.mode = value;
        else if (key == "cache_path") cfg.cache_path = value;
        else if (key == "templates_dir") cfg.templates_dir = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "embedding_provider") cfg.embedding_provider = value;
        else if (key == "remote_embed_dim") cfg.remote_embed_dim = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "concurrency") cfg.concurrency = static_cast<int>(parse_int(value, key));
        else if (key == "max_turns") cfg.max_turns = static_cast<int>(parse_int(value, key));
        else if (key == "top_k") cfg.top_k = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "split_and_clean") cfg.split_and_clean = parse_bool(value, key);
        else if (key == "use_descriptions") cfg.use_descriptions = parse_bool(value, key);
        else if (key == "oversize_char_cap") cfg.oversize_char_cap = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "backoff_initial_ms") cfg.backoff_initial_ms = static_cast<int>(parse_int(value, key));
        else throw ConfigError("unknown key: " + key);
    }
    return cfg;
}

Config load_config_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    return parse_config_text(util::read_file(path));
}

void apply_environment(Config& cfg) {
    if (const char* key = std::getenv("TRACERAG_API_KEY"); key && *key) {
        cfg.api_key = key;
    }
}

void validate(const Config& cfg) {
    if (cfg.mode != "live" && cfg.mode != "record" && cfg.mode != "replay") {
        throw ConfigError("mode must be live, record or replay, got: " + cfg.mode);
    }
    if (cfg.mode == "replay" && cfg.cache_path.empty()) {
        throw ConfigError("replay mode requires a cache path");
    }
    if (cfg.mode == "replay" && !std::filesystem::exists(cfg.cache_path)) {
        throw ConfigError("replay cache file not found: " + cfg.cache_path.string());
    }
    if (cfg.top_k < 1) {
        throw ConfigError("top_k must be >= 1");
    }
    if (cfg.max_turns < 1) {
        throw ConfigError("max_turns must be >= 1");
    }
    if (cfg.embedding_provider != "mock" && cfg.embedding_provider != "remote") {
        throw ConfigError("embedding_provider must be mock or remote");
    }
    if (cfg.concurrency < 1) {
        throw ConfigError("concurrency must be >= 1");
    }
}

} // namespace tracerag::config
