// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/dtpg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <set>
#include <tuple>
#include <unordered_set>
#include <utility>

#include "spdet/errors.hpp"

namespace spdet::dtpg {

std::string Report::text() const {
  std::string out;
  for (const std::string& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string collapse_whitespace(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

}  // namespace

Report postprocess_report(std::string_view raw) {
  Report report;
  report.raw_text = std::string(raw);
  const std::string text = collapse_whitespace(raw);
  std::unordered_set<std::string> seen;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminator(text[i])) continue;
    std::size_t end = i + 1;
    while (end < text.size() && is_terminator(text[end])) ++end;
    if (end < text.size() && text[end] != ' ') {
      i = end - 1;
      continue;
    }
    std::string sentence = text.substr(start, end - start);
    while (!sentence.empty() && sentence.front() == ' ') sentence.erase(sentence.begin());
    const bool has_word = std::ranges::any_of(sentence, [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
    if (has_word && seen.insert(sentence).second) report.sentences.push_back(std::move(sentence));
    start = end;
    i = end - 1;
  }
  // Anything after the last terminator is an incomplete fragment.
  return report;
}

namespace {

enum class Tag { kDet, kAdj, kNoun, kOther };

struct Token {
  std::string word;  // lowercase
  std::size_t begin = 0;
  std::size_t end = 0;
  Tag tag = Tag::kOther;
};

const std::set<std::string, std::less<>>& determiners() {
  static const std::set<std::string, std::less<>> words = {
      "a", "an", "the", "this", "that", "these", "those", "any", "some", "each", "every", "no", "its", "their", "his",
      "her", "another", "both", "either", "neither"};
  return words;
}

// Closed classes and common verbs/adverbs that must never start or extend a chunk.
const std::set<std::string, std::less<>>& non_nominal() {
  static const std::set<std::string, std::less<>> words = {
      // pronouns and existentials
      "there", "it", "he", "she", "they", "we", "which", "who", "what", "patient's",
      // prepositions
      "of", "in", "on", "at", "with", "within", "without", "from", "to", "for", "by", "along", "over", "under",
      "above", "below", "near", "into", "between", "across", "about", "per", "via", "throughout", "since", "after",
      "before", "than", "as", "around", "behind", "beneath", "overlying", "adjacent",
      // conjunctions
      "and", "or", "but", "however", "although", "though", "nor", "yet", "while", "whereas", "if",
      // auxiliaries and verbs
      "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do", "does", "did", "shows", "show",
      "showed", "shown", "demonstrates", "demonstrate", "demonstrated", "suggests", "suggest", "suggesting",
      "seen", "noted", "identified", "appears", "appear", "persists", "persist", "remains", "remain", "measures",
      "measuring", "denies", "denied", "ruled", "rule", "may", "might", "can", "could", "should", "will", "would",
      "involving", "involves", "represents", "represent", "seems", "observed", "visualized", "resolved", "improved",
      "worsened", "increased", "decreased", "projecting", "obscuring", "extending", "containing", "causing",
      "including", "reveals", "revealed", "indicates", "indicating", "favor", "favors", "exclude", "excluded",
      "see", "note", "out", "evaluate", "recommend", "recommended", "compared", "consider", "considered",
      // adverbs and negation particles
      "not", "also", "likely", "possibly", "probably", "again", "mildly", "slightly", "markedly", "very", "now",
      "still", "otherwise", "definitely", "clearly", "well", "further", "partially", "absence", "more", "less",
      "most", "least", "grossly", "newly"};
  return words;
}

const std::set<std::string, std::less<>>& adjectives() {
  static const std::set<std::string, std::less<>> words = {
      "large", "small", "mild", "moderate", "severe", "minimal", "slight", "new", "old", "left", "right", "bilateral",
      "upper", "lower", "mid", "middle", "clear", "normal", "abnormal", "enlarged", "present", "absent", "stable",
      "unchanged", "prominent", "focal", "diffuse", "patchy", "subtle", "possible", "probable", "significant",
      "acute", "chronic", "other", "multiple", "single", "several", "linear", "round", "dense", "faint",
      "additional", "apical", "basal", "basilar", "central", "peripheral", "visible", "evident", "consistent",
      "compatible", "suspicious", "negative", "positive", "free", "tiny", "trace", "known", "prior", "residual",
      "tortuous", "ill-defined", "well-defined", "small-volume", "unremarkable", "intact", "low", "high", "nodular",
      "reticular", "hazy", "irregular", "smooth", "widened", "elevated", "blunted", "calcified"};
  return words;
}

const std::set<std::string, std::less<>>& noun_exceptions() {
  static const std::set<std::string, std::less<>> words = {"interval", "scar", "vessel", "mediastinum",
                                                           "thorax", "apex", "base", "angle", "pleura"};
  return words;
}

bool has_suffix(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() + 3 && w.substr(w.size() - suffix.size()) == suffix;
}

Tag tag_word(const std::string& w) {
  if (std::ranges::any_of(w, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) return Tag::kOther;
  if (determiners().contains(w)) return Tag::kDet;
  if (non_nominal().contains(w)) return Tag::kOther;
  if (adjectives().contains(w)) return Tag::kAdj;
  if (noun_exceptions().contains(w)) return Tag::kNoun;
  for (std::string_view suffix : {"al", "ic", "ous", "ive", "ary", "ar", "ful", "less", "able", "ible", "ed"}) {
    if (has_suffix(w, suffix)) return Tag::kAdj;
  }
  if (has_suffix(w, "megaly") || has_suffix(w, "omaly")) return Tag::kNoun;
  if (has_suffix(w, "ly")) return Tag::kOther;
  return Tag::kNoun;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '/' || c == '\'';
}

// Word tokens plus one kOther token per punctuation mark so chunks never span it.
std::vector<Token> tokenize_sentence(std::string_view sentence) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (sentence[i] == ' ') {
      ++i;
      continue;
    }
    if (!is_word_char(sentence[i])) {
      tokens.push_back({std::string(1, sentence[i]), i, i + 1, Tag::kOther});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sentence.size() && is_word_char(sentence[j])) ++j;
    // Trim stray punctuation-like characters at the edges (e.g. "effusion-").
    std::size_t b = i, e = j;
    while (b < e && !std::isalnum(static_cast<unsigned char>(sentence[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(sentence[e - 1]))) --e;
    if (b < e) {
      Token t;
      t.word = lower(sentence.substr(b, e - b));
      t.begin = b;
      t.end = e;
      t.tag = tag_word(t.word);
      tokens.push_back(std::move(t));
    }
    i = j;
  }
  return tokens;
}

struct Cue {
  std::size_t end = 0;  // character offset just past the cue
};

std::vector<Cue> find_cues(const std::vector<Token>& tokens) {
  static const std::vector<std::vector<std::string>> kCues = {
      {"no"}, {"without"}, {"denies"}, {"absence", "of"}, {"negative", "for"}, {"free", "of"}, {"ruled", "out"}};
  std::vector<Cue> cues;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& cue : kCues) {
      if (i + cue.size() > tokens.size()) continue;
      bool hit = true;
      for (std::size_t k = 0; k < cue.size() && hit; ++k) hit = tokens[i + k].word == cue[k];
      if (hit) {
        cues.push_back({tokens[i + cue.size() - 1].end});
        break;
      }
    }
  }
  return cues;
}

bool is_reset(const std::string& w) { return w == "but" || w == "however" || w == "although"; }

}  // namespace

std::vector<NounPhrase> extract_noun_phrases(const Report& report) {
  std::vector<NounPhrase> phrases;
  for (std::size_t s = 0; s < report.sentences.size(); ++s) {
    const std::vector<Token> tokens = tokenize_sentence(report.sentences[s]);
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t j = i;
      if (tokens[j].tag == Tag::kDet) ++j;
      const std::size_t first = j;
      while (j < tokens.size() && tokens[j].tag == Tag::kAdj) ++j;
      const std::size_t nouns = j;
      while (j < tokens.size() && tokens[j].tag == Tag::kNoun) ++j;
      if (j == nouns) {
        i = std::max(i + 1, first);
        continue;
      }
      NounPhrase np;
      for (std::size_t k = first; k < j; ++k) {
        if (!np.text.empty()) np.text += ' ';
        np.text += tokens[k].word;
      }
      np.sentence_index = s;
      np.span = {tokens[first].begin, tokens[j - 1].end};
      phrases.push_back(std::move(np));
      i = j;
    }
  }
  return phrases;
}

std::vector<NounPhrase> detect_negations(const Report& report, std::vector<NounPhrase> phrases) {
  std::vector<std::vector<Token>> tokens(report.sentences.size());
  std::vector<std::vector<Cue>> cues(report.sentences.size());
  for (std::size_t s = 0; s < report.sentences.size(); ++s) {
    tokens[s] = tokenize_sentence(report.sentences[s]);
    cues[s] = find_cues(tokens[s]);
  }
  for (NounPhrase& np : phrases) {
    np.polarity = Polarity::kPositive;
    if (np.sentence_index >= report.sentences.size()) continue;
    for (const Cue& cue : cues[np.sentence_index]) {
      if (cue.end > np.span.begin) continue;
      const bool reset = std::ranges::any_of(tokens[np.sentence_index], [&](const Token& t) {
        return t.begin >= cue.end && t.end <= np.span.begin && is_reset(t.word);
      });
      if (!reset) {
        np.polarity = Polarity::kNegated;
        break;
      }
    }
  }
  return phrases;
}

std::vector<DiseaseBeacon> make_beacons(const std::vector<NounPhrase>& phrases) {
  std::vector<DiseaseBeacon> out;
  out.reserve(phrases.size());
  for (const NounPhrase& np : phrases) {
    out.push_back({np, np.polarity == Polarity::kNegated ? PromptRole::kNegative : PromptRole::kPositive});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Word embeddings

WordEmbeddings::WordEmbeddings(std::map<std::string, std::vector<double>> table) : table_(std::move(table)) {
  if (!table_.empty()) {
    dim_ = table_.begin()->second.size();
    for (const auto& [word, vec] : table_) {
      if (vec.size() != dim_) throw DimensionError("embedding table: inconsistent width for '" + word + "'");
    }
  }
}

namespace {

// Concept axes of the bundled table.
enum Axis : std::size_t {
  kAortic, kEnlarge, kAtelectasis, kCalcification, kCardiomegaly, kConsolidation, kInterstitial, kInfiltration,
  kOpacity, kNodule, kMass, kLesion, kEffusion, kThickening, kPneumothorax, kFibrosis, kPleural, kPulmonary, kLung,
  kHeart, kDisease, kOther, kLocation, kSeverity, kPneumonia, kEvidence, kNormal, kCollapse, kMisc
};

using Sparse = std::vector<std::pair<Axis, double>>;

std::map<std::string, std::vector<double>> build_bundled_table() {
  const std::vector<std::pair<std::string, Sparse>> entries = {
      {"aortic", {{kAortic, 1.0}}},
      {"aorta", {{kAortic, 1.0}}},
      {"enlargement", {{kEnlarge, 1.0}}},
      {"enlarged", {{kEnlarge, 0.8}, {kSeverity, 0.2}}},
      {"atelectasis", {{kAtelectasis, 1.0}}},
      {"atelectatic", {{kAtelectasis, 1.0}}},
      {"collapse", {{kAtelectasis, 0.85}, {kCollapse, 0.53}}},
      {"calcification", {{kCalcification, 1.0}}},
      {"calcifications", {{kCalcification, 1.0}}},
      {"calcified", {{kCalcification, 0.9}, {kSeverity, 0.2}}},
      {"cardiomegaly", {{kCardiomegaly, 1.0}, {kHeart, 0.3}}},
      {"consolidation", {{kConsolidation, 1.0}}},
      {"consolidations", {{kConsolidation, 1.0}}},
      {"airspace", {{kConsolidation, 0.6}, {kOpacity, 0.3}}},
      {"interstitial", {{kInterstitial, 1.0}}},
      {"ild", {{kInterstitial, 1.0}}},
      {"reticular", {{kInterstitial, 0.7}, {kFibrosis, 0.3}}},
      {"infiltration", {{kInfiltration, 1.0}}},
      {"infiltrate", {{kInfiltration, 1.0}}},
      {"infiltrates", {{kInfiltration, 1.0}}},
      {"opacity", {{kOpacity, 0.75}, {kConsolidation, 0.66}}},
      {"opacities", {{kOpacity, 0.75}, {kConsolidation, 0.66}}},
      {"opacification", {{kOpacity, 0.8}, {kConsolidation, 0.5}}},
      {"nodule", {{kNodule, 1.0}}},
      {"nodules", {{kNodule, 1.0}}},
      {"nodular", {{kNodule, 0.8}}},
      {"mass", {{kMass, 1.0}}},
      {"masses", {{kMass, 1.0}}},
      {"lesion", {{kLesion, 1.0}}},
      {"lesions", {{kLesion, 1.0}}},
      {"effusion", {{kEffusion, 1.0}}},
      {"effusions", {{kEffusion, 1.0}}},
      {"fluid", {{kEffusion, 0.6}, {kMisc, 0.3}}},
      {"thickening", {{kThickening, 1.0}}},
      {"thickened", {{kThickening, 0.9}}},
      {"pneumothorax", {{kPneumothorax, 1.0}}},
      {"fibrosis", {{kFibrosis, 1.0}}},
      {"fibrotic", {{kFibrosis, 1.0}}},
      {"scarring", {{kFibrosis, 0.7}, {kLesion, 0.2}}},
      {"pleural", {{kPleural, 0.5}}},
      {"pleura", {{kPleural, 0.5}}},
      {"pulmonary", {{kPulmonary, 0.5}}},
      {"lung", {{kLung, 0.5}}},
      {"lungs", {{kLung, 0.5}}},
      {"heart", {{kHeart, 1.0}}},
      {"cardiac", {{kHeart, 0.9}}},
      {"disease", {{kDisease, 0.3}}},
      {"other", {{kOther, 0.3}}},
      {"pneumonia", {{kPneumonia, 1.0}, {kConsolidation, 0.5}}},
      {"signs", {{kEvidence, 0.5}}},
      {"evidence", {{kEvidence, 0.5}}},
      {"finding", {{kEvidence, 0.3}}},
      {"findings", {{kEvidence, 0.3}}},
      {"normal", {{kNormal, 1.0}}},
      {"clear", {{kNormal, 0.8}}},
      {"unremarkable", {{kNormal, 0.9}}},
      {"size", {{kSeverity, 0.3}}},
      {"small", {{kSeverity, 0.3}}},
      {"large", {{kSeverity, 0.3}}},
      {"mild", {{kSeverity, 0.3}}},
      {"moderate", {{kSeverity, 0.3}}},
      {"severe", {{kSeverity, 0.3}}},
      {"minimal", {{kSeverity, 0.3}}},
      {"subtle", {{kSeverity, 0.3}}},
      {"focal", {{kSeverity, 0.2}, {kLocation, 0.2}}},
      {"diffuse", {{kSeverity, 0.2}, {kLocation, 0.2}}},
      {"patchy", {{kSeverity, 0.2}, {kOpacity, 0.1}}},
      {"left", {{kLocation, 0.3}}},
      {"right", {{kLocation, 0.3}}},
      {"bilateral", {{kLocation, 0.3}}},
      {"upper", {{kLocation, 0.3}}},
      {"lower", {{kLocation, 0.3}}},
      {"mid", {{kLocation, 0.3}}},
      {"zone", {{kLocation, 0.4}}},
      {"lobe", {{kLocation, 0.4}}},
      {"base", {{kLocation, 0.4}}},
      {"apex", {{kLocation, 0.4}}},
      {"apical", {{kLocation, 0.3}}},
      {"basal", {{kLocation, 0.3}}},
      {"hilar", {{kLocation, 0.3}}},
  };
  std::map<std::string, std::vector<double>> table;
  for (const auto& [word, sparse] : entries) {
    std::vector<double> v(WordEmbeddings::kDim, 0.0);
    for (const auto& [axis, weight] : sparse) v[axis] = weight;
    table.emplace(word, std::move(v));
  }
  return table;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> trigram_vector(const std::string& word, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  const std::string padded = "#" + word + "#";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a(std::string_view(padded).substr(i, 3));
    v[h % dim] += ((h >> 32) & 1U) ? 1.0 : -1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& x : v) x /= norm;
  return v;
}

}  // namespace

const WordEmbeddings& WordEmbeddings::bundled() {
  static const WordEmbeddings instance(build_bundled_table());
  return instance;
}

std::vector<double> WordEmbeddings::lookup(const std::string& word) const {
  if (auto it = table_.find(word); it != table_.end()) return it->second;
  return trigram_vector(word, dim_);
}

std::vector<std::string> similarity_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

double semantic_similarity(std::string_view phrase, std::string_view label, const WordEmbeddings& embeddings) {
  auto mean_vector = [&](std::string_view text) {
    std::vector<double> acc(embeddings.dim(), 0.0);
    const auto words = similarity_words(text);
    for (const std::string& w : words) {
      const auto v = embeddings.lookup(w);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    if (!words.empty())
      for (double& x : acc) x /= static_cast<double>(words.size());
    return acc;
  };
  const auto a = mean_vector(phrase);
  const auto b = mean_vector(label);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("match threshold must lie in (0, 1], got " + std::to_string(threshold));
  }
}

std::vector<DiseaseBeacon> canonical_order(std::vector<DiseaseBeacon> beacons) {
  std::ranges::sort(beacons, [](const DiseaseBeacon& a, const DiseaseBeacon& b) {
    return std::tie(a.phrase.sentence_index, a.phrase.span.begin, a.phrase.span.end, a.phrase.text, a.role) <
           std::tie(b.phrase.sentence_index, b.phrase.span.begin, b.phrase.span.end, b.phrase.text, b.role);
  });
  return beacons;
}

bool is_positive(const DiseaseBeacon& b) {
  return b.role == PromptRole::kPositive && b.phrase.polarity == Polarity::kPositive;
}

}  // namespace

MatchResult match_region_text(const std::vector<BoxLabel>& boxes, const std::vector<DiseaseBeacon>& beacons,
                              double threshold, const WordEmbeddings& embeddings) {
  check_threshold(threshold);
  const std::vector<DiseaseBeacon> ordered = canonical_order(beacons);
  std::vector<bool> used(ordered.size(), false);
  MatchResult result;
  for (const BoxLabel& box : boxes) {
    std::size_t best = ordered.size();
    double best_sim = -2.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (!is_positive(ordered[i])) continue;
      const double sim = semantic_similarity(ordered[i].phrase.text, box.class_label, embeddings);
      if (sim >= threshold && sim > best_sim) {
        best = i;
        best_sim = sim;
      }
    }
    RegionTextPair pair;
    pair.box_id = box.box_id;
    pair.class_label = box.class_label;
    if (best < ordered.size()) {
      used[best] = true;
      pair.matched_phrase = ordered[best].phrase.text;
      pair.similarity = best_sim;
    } else {
      pair.matched_phrase = box.class_label;
      pair.similarity = 1.0;
      pair.fallback = true;
    }
    result.pairs.push_back(std::move(pair));
  }
  std::unordered_set<std::string> pooled;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (is_positive(ordered[i]) && used[i]) continue;
    if (pooled.insert(ordered[i].phrase.text).second) result.negative_prompts.push_back(ordered[i].phrase.text);
  }
  return result;
}

std::vector<std::string> disease_prompts(const std::vector<DiseaseBeacon>& beacons,
                                         const std::vector<std::string>& class_names, double threshold,
                                         const WordEmbeddings& embeddings) {
  check_threshold(threshold);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const DiseaseBeacon& b : canonical_order(beacons)) {
    if (!is_positive(b) || seen.contains(b.phrase.text)) continue;
    const bool relevant = std::ranges::any_of(class_names, [&](const std::string& name) {
      return semantic_similarity(b.phrase.text, name, embeddings) >= threshold;
    });
    if (relevant) {
      seen.insert(b.phrase.text);
      out.push_back(b.phrase.text);
    }
  }
  return out;
}

PromptRecord generate_prompts(const std::string& image_id, std::string_view report_text,
                              const std::vector<BoxLabel>& boxes, const std::vector<std::string>& class_names,
                              double threshold, const WordEmbeddings& embeddings) {
  const Report report = postprocess_report(report_text);
  const auto beacons = make_beacons(detect_negations(report, extract_noun_phrases(report)));
  MatchResult match = match_region_text(boxes, beacons, threshold, embeddings);
  PromptRecord record;
  record.image_id = image_id;
  record.positive_pairs = std::move(match.pairs);
  record.negative_prompts = std::move(match.negative_prompts);
  record.disease_prompts = disease_prompts(beacons, class_names, threshold, embeddings);
  record.sentences = report.sentences;
  return record;
}

nlohmann::json to_json(const PromptRecord& record) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const RegionTextPair& p : record.positive_pairs) {
    pairs.push_back({{"box_id", p.box_id},
                     {"class_label", p.class_label},
                     {"phrase", p.matched_phrase},
                     {"similarity", p.similarity},
                     {"fallback", p.fallback}});
  }
  return {{"image_id", record.image_id},
          {"positive_pairs", pairs},
          {"negative_prompts", record.negative_prompts},
          {"disease_prompts", record.disease_prompts},
          {"sentences", record.sentences}};
}

PromptRecord prompt_record_from_json(const nlohmann::json& j) {
  try {
    PromptRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    for (const auto& p : j.at("positive_pairs")) {
      RegionTextPair pair;
      pair.box_id = p.at("box_id").get<std::size_t>();
      pair.class_label = p.at("class_label").get<std::string>();
      pair.matched_phrase = p.at("phrase").get<std::string>();
      pair.similarity = p.at("similarity").get<double>();
      pair.fallback = p.value("fallback", false);
      r.positive_pairs.push_back(std::move(pair));
    }
    r.negative_prompts = j.at("negative_prompts").get<std::vector<std::string>>();
    r.disease_prompts = j.value("disease_prompts", std::vector<std::string>{});
    r.sentences = j.value("sentences", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("prompt record: ") + e.what());
  }
}

}  // namespace spdet::dtpg
