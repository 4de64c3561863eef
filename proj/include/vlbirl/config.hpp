#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vlbirl/trainer.hpp"

namespace vlbirl {

/// Flat key=value config with [section] headers; '#' starts a comment.
/// Keys are reported as "section.key".
struct ParsedConfig {
  std::map<std::string, std::string> values;
};

ParsedConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
ParsedConfig parse_config_file(const std::string& path);

/// Applies file values onto a TrainConfig. Unknown keys and unparsable
/// values are rejected with the offending key named.
void apply_to_train_config(const ParsedConfig& parsed, TrainConfig& cfg);

/// Canonical render of a config: one sorted key=value line per field.
/// Written next to run outputs so a run is reproducible from the file alone.
std::string canonical_config_string(const TrainConfig& cfg);

std::uint64_t fnv1a(const std::string& text);

/// Hash of the canonical config with the seed excluded; run directories are
/// named <hash>-s<seed> so reruns of the same setup land side by side.
std::string config_hash_hex(const TrainConfig& cfg);

}  // namespace vlbirl
