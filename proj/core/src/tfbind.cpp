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

#include <charconv>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "cliqueformer/tasks.hpp"

namespace cliqueformer {

std::vector<int> encode_dna(std::string_view sequence) {
  std::vector<int> out;
  out.reserve(sequence.size());
  for (char c : sequence) {
    switch (c) {
      case 'A': out.push_back(0); break;
      case 'C': out.push_back(1); break;
      case 'G': out.push_back(2); break;
      case 'T': out.push_back(3); break;
      default:
        throw std::invalid_argument(std::string("unknown nucleotide '") + c + "'");
    }
  }
  return out;
}

std::string decode_dna(std::span<const double> symbols) {
  static constexpr char kLetters[] = {'A', 'C', 'G', 'T'};
  std::string out;
  out.reserve(symbols.size());
  for (double s : symbols) {
    const auto i = static_cast<int>(s);
    if (i < 0 || i > 3 || static_cast<double>(i) != s) {
      throw std::invalid_argument("decode_dna: symbol out of range");
    }
    out.push_back(kLetters[i]);
  }
  return out;
}

TfBindData load_tfbind8(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open TFBind-8 file " + path.string());

  auto table = std::make_shared<std::unordered_map<std::string, double>>();
  std::vector<std::string> sequences;
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected SEQUENCE<TAB>SCORE");
    }
    std::string seq = line.substr(0, tab);
    if (static_cast<Index>(seq.size()) != kTfBindLength) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": sequence must have length 8");
    }
    try {
      (void)encode_dna(seq);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string field = line.substr(tab + 1);
    double score = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), score);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed score '" + field + "'");
    }
    if (!table->emplace(seq, score).second) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": duplicate sequence " + seq);
    }
    sequences.push_back(std::move(seq));
    scores.push_back(score);
  }
  if (sequences.empty()) throw std::runtime_error("TFBind-8 file " + path.string() + " is empty");

  TfBindData out;
  Dataset& full = out.full;
  full.modality = Modality::kDiscrete;
  full.vocab = kDnaVocab;
  full.designs.resize(static_cast<Index>(sequences.size()), kTfBindLength);
  full.scores.resize(static_cast<Index>(sequences.size()));
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    const auto sym = encode_dna(sequences[r]);
    for (Index p = 0; p < kTfBindLength; ++p) {
      full.designs(static_cast<Index>(r), p) = sym[static_cast<std::size_t>(p)];
    }
    full.scores(static_cast<Index>(r)) = scores[r];
  }
  full.stats = compute_stats(full.scores);

  out.oracle = OracleHandle(
      [table](std::span<const double> design) -> OracleResult {
        if (static_cast<Index>(design.size()) != kTfBindLength) return {0.0, false};
        std::string key;
        try {
          key = decode_dna(design);
        } catch (const std::invalid_argument&) {
          return {0.0, false};
        }
        const auto it = table->find(key);
        if (it == table->end()) return {0.0, false};
        return {it->second, true};
      },
      full.stats);
  return out;
}

}  // namespace cliqueformer
