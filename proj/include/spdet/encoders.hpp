// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spdet/bfe.hpp"
#include "spdet/dtpg.hpp"
#include "spdet/nn.hpp"

namespace spdet::enc {

inline constexpr std::int64_t kPadId = -1;
inline constexpr std::size_t kUnknownId = 0;
inline constexpr std::size_t kDefaultMaxLength = 64;

/// Lowercased words split on whitespace and punctuation.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary. Id 0 is the unknown token; known tokens are numbered
/// 1.. in sorted order.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, std::size_t max_length = kDefaultMaxLength);

  static Vocabulary build(const std::vector<std::string>& texts, std::size_t max_length = kDefaultMaxLength);

  std::size_t id(const std::string& token) const;
  /// Number of ids including the unknown slot.
  std::size_t size() const { return tokens_.size() + 1; }
  std::size_t max_length() const { return max_length_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line; line n (1-based) holds id n.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text, std::size_t max_length = kDefaultMaxLength);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path, std::size_t max_length = kDefaultMaxLength);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t max_length_ = kDefaultMaxLength;
};

/// Fixed-length id sequence; padded slots hold kPadId and a false mask flag.
struct TokenSequence {
  std::vector<std::int64_t> ids;
  std::vector<bool> mask;

  std::size_t real_length() const;
};

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

/// Token-level report encoder: embeddings + positions, one masked self-attention block.
struct ScpEncoder {
  Tensor token_embedding;     // [V × D]
  Tensor position_embedding;  // [max_len × D]
  Tensor null_row;            // [1 × D], used for empty reports
  nn::AttentionWeights attention;
  nn::LayerNorm norm;
  nn::FeedForward ffn;

  static ScpEncoder create(nn::ParamStore& store, const std::string& prefix, std::size_t vocab_size,
                           std::size_t max_length, std::size_t width, std::size_t heads, Rng& rng);
  std::size_t width() const { return token_embedding.cols(); }
};

/// [N_t × D] token matrix, N_t = number of non-pad tokens (1 null row when empty).
bfe::TextEmbedding encode_scp(const dtpg::Report& report, const Vocabulary& vocab, const ScpEncoder& encoder);

/// Phrase encoder: mean word embedding through a two-layer projection, rows L2-normalised.
struct DbpEncoder {
  Tensor token_embedding;  // [V × D_w]
  nn::Linear first;
  nn::Linear second;

  static DbpEncoder create(nn::ParamStore& store, const std::string& prefix, std::size_t vocab_size,
                           std::size_t word_width, std::size_t out_width, Rng& rng);
  std::size_t width() const { return second.weight.cols(); }
};

struct ClassEmbedding {
  Tensor matrix;  // [N × D_e], unit rows
  std::vector<std::string> class_names;
};

/// Throws UsageError on an empty list.
ClassEmbedding encode_dbp(const std::vector<std::string>& texts, const Vocabulary& vocab, const DbpEncoder& encoder);

}  // namespace spdet::enc
