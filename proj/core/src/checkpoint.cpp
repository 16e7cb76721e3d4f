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

#include "cliqueformer/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cliqueformer {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'C', 'Q', 'F', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint " + path.string() + " is truncated");
  return v;
}

std::string read_string(std::ifstream& in, std::size_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint " + path.string() + " is truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& header,
                     const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_pod<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + " is not a checkpoint");
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path.string() + " has unsupported version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.header = read_string(in, read_pod<std::uint64_t>(in, path), path);
  const auto count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = read_string(in, read_pod<std::uint32_t>(in, path), path);
    const auto rows = static_cast<Index>(read_pod<std::uint64_t>(in, path));
    const auto cols = static_cast<Index>(read_pod<std::uint64_t>(in, path));
    Matrix value(rows, cols);
    in.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint " + path.string() + " is truncated");
    ckpt.params.add(std::move(name), std::move(value));
  }
  return ckpt;
}

std::string config_to_json(const CliqueformerConfig& c) {
  nlohmann::json j;
  j["kind"] = "cliqueformer";
  j["d_model"] = c.d_model;
  j["n_blocks"] = c.n_blocks;
  j["n_heads"] = c.n_heads;
  j["mlp_hidden"] = c.mlp_hidden;
  j["ff_hidden"] = c.ff_hidden;
  j["n_clique"] = c.layout.n_clique();
  j["clique_dim"] = c.layout.clique_dim();
  j["knot_dim"] = c.layout.knot_dim();
  j["dropout"] = c.dropout;
  j["activation"] = std::string(to_string(c.activation));
  j["modality"] = c.modality == Modality::kContinuous ? "continuous" : "discrete";
  j["design_dim"] = c.design_dim;
  j["vocab"] = c.vocab;
  return j.dump();
}

CliqueformerConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CliqueformerConfig c;
  c.d_model = j.at("d_model").get<Index>();
  c.n_blocks = j.at("n_blocks").get<Index>();
  c.n_heads = j.at("n_heads").get<Index>();
  c.mlp_hidden = j.at("mlp_hidden").get<Index>();
  c.ff_hidden = j.at("ff_hidden").get<Index>();
  c.layout = make_chain(j.at("n_clique").get<int>(), j.at("clique_dim").get<int>(),
                        j.at("knot_dim").get<int>());
  c.dropout = j.at("dropout").get<double>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.modality = j.at("modality").get<std::string>() == "discrete" ? Modality::kDiscrete
                                                                   : Modality::kContinuous;
  c.design_dim = j.at("design_dim").get<Index>();
  c.vocab = j.at("vocab").get<Index>();
  return c;
}

void save_cliqueformer(const std::filesystem::path& path, const Cliqueformer& model) {
  save_checkpoint(path, config_to_json(model.config()), model.params());
}

Cliqueformer load_cliqueformer(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (checkpoint_kind(ckpt) != "cliqueformer") {
    throw std::runtime_error(path.string() + " does not hold a Cliqueformer model");
  }
  return Cliqueformer(config_from_json(ckpt.header), std::move(ckpt.params));
}

std::string checkpoint_kind(const Checkpoint& ckpt) {
  const auto j = nlohmann::json::parse(ckpt.header);
  return j.value("kind", "");
}

}  // namespace cliqueformer
