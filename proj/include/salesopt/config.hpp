#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "salesopt/bandit.hpp"
#include "salesopt/datagen.hpp"
#include "salesopt/explain.hpp"
#include "salesopt/optimizer.hpp"
#include "salesopt/pipeline.hpp"

namespace salesopt {

struct ServiceSettings {
  /// Bandit updates required before the bandit overrides the cold-start action.
  int warmup_updates = 50;
  /// Write a policy snapshot record every this many runs (0 = never).
  int snapshot_every = 10;
  std::string product = "Product A";
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct Settings {
  GenConfig gen;
  OptimizerParams optimizer;
  BanditPolicyParams bandit;
  TrainingOptions training;
  PanelConfig panel;
  OutcomeWorldSpec world;
  ServiceSettings service;
  ExternalHttpConfig textgen;
  /// "mock" or "http".
  std::string textgen_client = "mock";
};

/// Flat `section.key = value` lines; '#' starts a comment. Throws ConfigError on a
/// malformed line or a repeated key.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

/// Applies every key onto `base`. Throws ConfigError naming an unknown key or a
/// value that does not parse.
Settings apply_config(const std::map<std::string, std::string>& values, Settings base = {});

/// Every supported key with its current value, sorted by key.
std::map<std::string, std::string> dump_config(const Settings& s);
std::string format_config(const std::map<std::string, std::string>& values);

/// Supported keys, for --help.
std::vector<std::string> config_keys();

}  // namespace salesopt
