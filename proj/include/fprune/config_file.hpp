#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fprune {

// Entries of an INI/TOML-style experiment file as (dotted key, value) pairs in
// file order:
//
//   seed = 3
//   [optim]
//   lr = 0.02
//   [pruning]
//   criteria = ["random", "l1_norm"]   # -> pruning.criteria = random,l1_norm
//
// '#' and ';' start comments, quotes around values are dropped and arrays are
// flattened to comma-separated lists.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

ConfigEntries parse_config_text(std::string_view text);
ConfigEntries read_config_file(const std::filesystem::path& path);

}  // namespace fprune
