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

// Checkpoint container (little-endian):
//
//   magic      8 bytes  "CQFCKPT\0"
//   version    u32      currently 1
//   header     u64 length + UTF-8 JSON (model kind and configuration)
//   tensors    u64 count, then per tensor:
//                u32 name length, name bytes, u64 rows, u64 cols,
//                rows*cols IEEE-754 doubles in row-major order
//
// Values are stored bit-for-bit, so save/load is an exact round trip.

#ifndef CLIQUEFORMER_CHECKPOINT_HPP_
#define CLIQUEFORMER_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/model.hpp"

namespace cliqueformer {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string header;  // JSON text
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& header,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const CliqueformerConfig& config);
CliqueformerConfig config_from_json(const std::string& text);

void save_cliqueformer(const std::filesystem::path& path, const Cliqueformer& model);
Cliqueformer load_cliqueformer(const std::filesystem::path& path);

/// Reads the "kind" field of a checkpoint header ("cliqueformer", "mlp", ...).
std::string checkpoint_kind(const Checkpoint& ckpt);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_CHECKPOINT_HPP_
