// Copyright 2026 The cliqueformer-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLIQUEFORMER_CONFIG_HPP_
#define CLIQUEFORMER_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace cliqueformer {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, and a `[section]` line prefixes later keys with "section.".
/// Duplicate keys and lines without '=' are errors (std::invalid_argument,
/// with the line number).
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_CONFIG_HPP_
