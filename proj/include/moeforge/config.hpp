#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "moeforge/task_suite.hpp"
#include "moeforge/trainer.hpp"

namespace moeforge {

/// Resolved run configuration: file values with command-line overrides applied.
struct CliConfig {
  SuiteConfig suite;
  TrainConfig train;
  std::filesystem::path out_dir = "moeforge_run";
  std::uint64_t seed = 0;

  /// Pushes the single top-level seed into every consumer.
  void propagate_seed();
};

/// Applies flat INI text (`[section]` headers, `key = value` lines, `#` or `;`
/// comments) on top of `cfg`. Sections: run, suite, train, merge, autoencoder,
/// output. Unknown sections or keys raise ConfigError.
void apply_config_text(CliConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(CliConfig& cfg, const std::filesystem::path& path);

/// Applies a single `section.key = value` setting.
void apply_setting(CliConfig& cfg, const std::string& section, const std::string& key,
                   const std::string& value);

/// Renders every setting; applying the result to a default CliConfig
/// reproduces `cfg` exactly.
std::string render_config(const CliConfig& cfg);

}  // namespace moeforge
