// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::enc {

std::vector<std::string> split_words(std::string_view text) { return dtpg::similarity_words(text); }

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::size_t max_length) : max_length_(max_length) {
  if (max_length == 0) throw ConfigError("vocabulary: max length must be positive");
  std::ranges::sort(tokens);
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i + 1);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t max_length) {
  std::set<std::string> words;
  for (const std::string& t : texts)
    for (std::string& w : split_words(t)) words.insert(std::move(w));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()), max_length);
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknownId : it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const std::string& t : tokens_) out += t + "\n";
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text, std::size_t max_length) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0, offset = 0;
  std::string previous;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || std::ranges::any_of(line, [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
      throw ParseError("vocabulary: tokens must be non-empty and contain no whitespace", line_no, offset);
    if (!tokens.empty() && line <= previous) throw ParseError("vocabulary: tokens must be strictly sorted", line_no, offset);
    previous = line;
    tokens.push_back(line);
    offset += line.size() + 1;
  }
  return Vocabulary(std::move(tokens), max_length);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary to " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::size_t max_length) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read vocabulary from " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), max_length);
}

std::size_t TokenSequence::real_length() const {
  return static_cast<std::size_t>(std::ranges::count(mask, true));
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.assign(vocab.max_length(), kPadId);
  seq.mask.assign(vocab.max_length(), false);
  const auto words = split_words(text);
  const std::size_t n = std::min(words.size(), vocab.max_length());
  for (std::size_t i = 0; i < n; ++i) {
    seq.ids[i] = static_cast<std::int64_t>(vocab.id(words[i]));
    seq.mask[i] = true;
  }
  return seq;
}

ScpEncoder ScpEncoder::create(nn::ParamStore& store, const std::string& prefix, std::size_t vocab_size,
                              std::size_t max_length, std::size_t width, std::size_t heads, Rng& rng) {
  ScpEncoder e;
  e.token_embedding = store.add(prefix + ".tokens", Tensor::randn({vocab_size, width}, rng, 0.1), false);
  e.position_embedding = store.add(prefix + ".positions", Tensor::randn({max_length, width}, rng, 0.02), false);
  e.null_row = store.add(prefix + ".null", Tensor::randn({1, width}, rng, 0.1), false);
  e.attention = nn::AttentionWeights::create(store, prefix + ".attn", width, heads, rng);
  e.norm = nn::LayerNorm::create(store, prefix + ".norm", width);
  e.ffn = nn::FeedForward::create(store, prefix + ".ffn", width, rng);
  return e;
}

bfe::TextEmbedding encode_scp(const dtpg::Report& report, const Vocabulary& vocab, const ScpEncoder& encoder) {
  if (encoder.position_embedding.rows() < vocab.max_length()) {
    throw DimensionError("encode_scp: position table shorter than the vocabulary's max length");
  }
  const TokenSequence seq = tokenize(report.text(), vocab);
  const std::size_t n = seq.real_length();
  if (n == 0) return {encoder.null_row, bfe::Modality::kScp};

  const std::size_t len = seq.ids.size();
  std::vector<std::size_t> ids(len), positions(len);
  for (std::size_t i = 0; i < len; ++i) {
    // Pad slots look up the unknown row; the key mask hides them and their rows are dropped.
    ids[i] = seq.ids[i] == kPadId ? kUnknownId : static_cast<std::size_t>(seq.ids[i]);
    positions[i] = i;
  }
  Tensor x = add(gather_rows(encoder.token_embedding, ids), gather_rows(encoder.position_embedding, positions));
  Tensor attended = add(nn::multi_head_attention(x, x, x, encoder.attention, seq.mask), x);
  Tensor out = add(encoder.ffn.forward(encoder.norm.forward(attended)), attended);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < len; ++i)
    if (seq.mask[i]) keep.push_back(i);
  return {gather_rows(out, keep), bfe::Modality::kScp};
}

DbpEncoder DbpEncoder::create(nn::ParamStore& store, const std::string& prefix, std::size_t vocab_size,
                              std::size_t word_width, std::size_t out_width, Rng& rng) {
  DbpEncoder e;
  e.token_embedding = store.add(prefix + ".tokens", Tensor::randn({vocab_size, word_width}, rng, 0.1), false);
  e.first = nn::Linear::create(store, prefix + ".proj1", word_width, out_width, rng);
  e.second = nn::Linear::create(store, prefix + ".proj2", out_width, out_width, rng);
  return e;
}

ClassEmbedding encode_dbp(const std::vector<std::string>& texts, const Vocabulary& vocab, const DbpEncoder& encoder) {
  if (texts.empty()) throw UsageError("encode_dbp: empty phrase list");
  std::vector<std::size_t> ids;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const std::string& text : texts) {
    const std::size_t begin = ids.size();
    for (const std::string& w : split_words(text)) ids.push_back(vocab.id(w));
    if (ids.size() == begin) ids.push_back(kUnknownId);
    ranges.emplace_back(begin, ids.size());
  }
  std::vector<double> averaging(texts.size() * ids.size(), 0.0);
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    const auto [b, e] = ranges[r];
    for (std::size_t c = b; c < e; ++c) averaging[r * ids.size() + c] = 1.0 / static_cast<double>(e - b);
  }
  Tensor words = gather_rows(encoder.token_embedding, ids);
  Tensor pooled = matmul(Tensor::from({texts.size(), ids.size()}, std::move(averaging)), words);
  Tensor projected = encoder.second.forward(gelu(encoder.first.forward(pooled)));
  return {l2_normalize_rows(projected), texts};
}

}  // namespace spdet::enc
