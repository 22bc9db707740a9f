#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "visern/trainer.hpp"

namespace visern {

/// Ordered key=value pairs. Later duplicates override earlier ones.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key=value` lines; `#` starts a comment, blank lines are ignored,
/// whitespace around keys and values is trimmed.
KeyValues parse_key_values(const std::string& text);
std::string dump_key_values(const KeyValues& kv);
KeyValues load_key_values(const std::filesystem::path& path);

/// Applies known keys onto `cfg`, range-checking each. Unknown keys raise
/// ConfigError.
void apply_config(TrainConfig& cfg, const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& cfg);

bool operator==(const TrainConfig& a, const TrainConfig& b);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace visern
