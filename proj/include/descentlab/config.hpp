#pragma once

#include <string>
#include <utility>
#include <vector>

#include "descentlab/sweep.hpp"

namespace descentlab {

// Flat `key = value` config format: one assignment per line, `#` comments,
// grids as comma-separated lists. Unknown keys are an error. The full key
// list is documented in the README and in default_config_text().
SweepConfig parse_config_text(const std::string& text,
                              const std::string& origin = "<string>");
SweepConfig parse_config_file(const std::string& path);

// Applies `key=value` overrides on top of a parsed config. Duplicate keys
// with different values are rejected.
void apply_overrides(SweepConfig& cfg,
                     const std::vector<std::string>& overrides);

// Canonical serialization of the effective config; reparsing it reproduces
// the same SweepConfig.
std::string serialize_config(const SweepConfig& cfg);

// Short stable hash of the canonical serialization, used to derive output
// file names.
std::string config_hash(const SweepConfig& cfg);

// A commented template listing every key with its default.
std::string default_config_text();

}  // namespace descentlab
