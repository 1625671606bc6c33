#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace tracerag::config {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& why) : std::runtime_error("config error: " + why) {}
};

// Layered configuration: defaults < config file < environment < CLI flags.
struct Config {
    std::string provider_base_url = "https://api.openai.com/v1";
    std::string model = "o3-mini";
    std::string embed_model = "text-embedding-ada-002";
    std::string api_key; // TRACERAG_API_KEY or the api_key file entry
    std::string mode = "replay"; // live | record | replay
    std::filesystem::path cache_path;
    std::filesystem::path templates_dir;
    std::filesystem::path out_dir = "out";
    std::string embedding_provider = "mock"; // mock | remote
    std::size_t remote_embed_dim = 1536;
    int concurrency = 4;
    int max_turns = 5;
    std::size_t top_k = 5;
    bool split_and_clean = true;
    bool use_descriptions = true;
    std::size_t oversize_char_cap = 8000;
    int backoff_initial_ms = 500;
};

// `key = value` lines, '#' comments; unknown keys are errors.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::filesystem::path& path);

// TRACERAG_API_KEY overrides the file-level key.
void apply_environment(Config& cfg);

// throws ConfigError; called before any work starts
void validate(const Config& cfg);

} // namespace tracerag::config
