// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace spdet::dtpg {

/// Report text after cleanup: terminated, whitespace-normalised, deduplicated sentences.
struct Report {
  std::string raw_text;
  std::vector<std::string> sentences;

  /// Sentences joined by single spaces.
  std::string text() const;
};

enum class Polarity { kPositive, kNegated };

struct CharSpan {
  std::size_t begin = 0;  // offsets within the sentence, end exclusive
  std::size_t end = 0;
};

struct NounPhrase {
  std::string text;  // lowercase, determiners stripped
  std::size_t sentence_index = 0;
  CharSpan span;
  Polarity polarity = Polarity::kPositive;
};

enum class PromptRole { kPositive, kNegative };

struct DiseaseBeacon {
  NounPhrase phrase;
  PromptRole role = PromptRole::kPositive;
};

struct BoxLabel {
  std::size_t box_id = 0;
  std::string class_label;
};

struct RegionTextPair {
  std::size_t box_id = 0;
  std::string class_label;
  std::string matched_phrase;
  double similarity = 0.0;
  bool fallback = false;  // no beacon cleared the threshold; paired with the class label itself
};

struct MatchResult {
  std::vector<RegionTextPair> pairs;        // exactly one per box, input box order
  std::vector<std::string> negative_prompts;
};

inline constexpr double kDefaultMatchThreshold = 0.6;

/// Splits on terminal punctuation, drops an unterminated trailing fragment,
/// collapses whitespace and removes repeated sentences (first occurrence wins).
Report postprocess_report(std::string_view raw);

/// Rule-based (DET)? (ADJ)* (NOUN)+ chunker over a lexicon-tagged token stream.
std::vector<NounPhrase> extract_noun_phrases(const Report& report);

/// Marks phrases that follow a negation cue in the same sentence with no
/// intervening "but" / "however" / "although".
std::vector<NounPhrase> detect_negations(const Report& report, std::vector<NounPhrase> phrases);

/// Negated phrases become negative prompts; everything else is a positive candidate.
std::vector<DiseaseBeacon> make_beacons(const std::vector<NounPhrase>& phrases);

/// Word vectors used for phrase/label similarity. Words missing from the table
/// fall back to hashed character-trigram vectors.
class WordEmbeddings {
 public:
  static constexpr std::size_t kDim = 32;

  WordEmbeddings() = default;
  explicit WordEmbeddings(std::map<std::string, std::vector<double>> table);

  /// Small bundled clinical vocabulary (class names + common report words).
  static const WordEmbeddings& bundled();

  bool contains(const std::string& word) const { return table_.count(word) > 0; }
  std::vector<double> lookup(const std::string& word) const;
  std::size_t dim() const { return dim_; }

 private:
  std::map<std::string, std::vector<double>> table_;
  std::size_t dim_ = kDim;
};

/// Lowercased alphanumeric words of `text`.
std::vector<std::string> similarity_words(std::string_view text);

/// Cosine similarity of mean word vectors, in [-1, 1].
double semantic_similarity(std::string_view phrase, std::string_view label, const WordEmbeddings& embeddings);

/// Pairs each box with its best positive beacon at or above `threshold`
/// (ties: earliest sentence, then earliest span). Boxes without a match are
/// paired with their own class label. Unused positive beacons and all negated
/// beacons form the negative-prompt pool. Throws ConfigError unless threshold is in (0, 1].
MatchResult match_region_text(const std::vector<BoxLabel>& boxes, const std::vector<DiseaseBeacon>& beacons,
                              double threshold, const WordEmbeddings& embeddings = WordEmbeddings::bundled());

/// Positive beacon phrases that resemble at least one class name; box-free, so
/// usable at inference. Canonical order, duplicates removed.
std::vector<std::string> disease_prompts(const std::vector<DiseaseBeacon>& beacons,
                                         const std::vector<std::string>& class_names, double threshold,
                                         const WordEmbeddings& embeddings = WordEmbeddings::bundled());

/// Everything the prompt generator produces for one image.
struct PromptRecord {
  std::string image_id;
  std::vector<RegionTextPair> positive_pairs;
  std::vector<std::string> negative_prompts;
  std::vector<std::string> disease_prompts;
  std::vector<std::string> sentences;
};

PromptRecord generate_prompts(const std::string& image_id, std::string_view report_text,
                              const std::vector<BoxLabel>& boxes, const std::vector<std::string>& class_names,
                              double threshold, const WordEmbeddings& embeddings = WordEmbeddings::bundled());

nlohmann::json to_json(const PromptRecord& record);
PromptRecord prompt_record_from_json(const nlohmann::json& j);

}  // namespace spdet::dtpg
