#pragma once

#include "ctscan/racnet/config.hpp"
#include "ctscan/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ctscan {

/// Everything a batch command needs. Values resolve as flags > environment > file > defaults.
struct RunConfig {
    PipelineConfig pipeline;
    racnet::RACNetConfig racnet;
    std::uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path data_root;
    std::filesystem::path output_root = "out";
    std::string backend = "fake";
    std::filesystem::path fake_config;
    int train_steps = 200;
    bool unsegmented = false;

    /// Sets `section.key` from text; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    /// Canonical `[section]` / `key = value` text with a fixed key order.
    std::string to_text() const;

    /// Canonical text of the classifier section only, used for checkpoint compatibility checks.
    std::string racnet_text() const;

    void validate() const;

    /// Every recognized key, in canonical order.
    static const std::vector<std::string>& keys();

    /// `CTSCAN_<SECTION>_<KEY>`, upper-cased.
    static std::string env_name(const std::string& key);
};

/// Applies `[section]` / `key = value` text on top of `config`. Relative paths stay as written.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "<text>");
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Applies every `CTSCAN_*` variable that names a known key. `lookup` defaults to std::getenv.
void apply_environment(RunConfig& config,
                       const std::function<const char*(const char*)>& lookup = nullptr);

/// Applies `section.key=value` overrides.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

RunConfig parse_config_text(const std::string& text);

}  // namespace ctscan
