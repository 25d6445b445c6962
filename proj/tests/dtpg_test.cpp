// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "spdet/dtpg.hpp"
#include "spdet/errors.hpp"

namespace spdet::dtpg {
namespace {

std::vector<std::string> phrase_texts(const std::vector<NounPhrase>& phrases) {
  std::vector<std::string> out;
  for (const auto& p : phrases) out.push_back(p.text);
  return out;
}

std::vector<NounPhrase> analyse(const std::string& text) {
  Report r = postprocess_report(text);
  return detect_negations(r, extract_noun_phrases(r));
}

const NounPhrase& find_phrase(const std::vector<NounPhrase>& phrases, const std::string& text) {
  auto it = std::ranges::find_if(phrases, [&](const NounPhrase& p) { return p.text == text; });
  if (it == phrases.end()) throw std::runtime_error("phrase not found: " + text);
  return *it;
}

DiseaseBeacon beacon(const std::string& text, std::size_t sentence, std::size_t begin, bool negated = false) {
  NounPhrase np;
  np.text = text;
  np.sentence_index = sentence;
  np.span = {begin, begin + text.size()};
  np.polarity = negated ? Polarity::kNegated : Polarity::kPositive;
  return {np, negated ? PromptRole::kNegative : PromptRole::kPositive};
}

TEST(Postprocess, DeduplicatesSentences) {
  EXPECT_EQ(postprocess_report("Heart is enlarged. Heart is enlarged.").sentences,
            (std::vector<std::string>{"Heart is enlarged."}));
}

TEST(Postprocess, DropsTrailingFragment) {
  EXPECT_EQ(postprocess_report("Lungs clear. The costophre").sentences, (std::vector<std::string>{"Lungs clear."}));
}

TEST(Postprocess, EmptyInput) { EXPECT_TRUE(postprocess_report("").sentences.empty()); }

TEST(Postprocess, NormalisesWhitespaceAndKeepsDecimals) {
  Report r = postprocess_report("  Nodule   measures 1.5 cm.\n\nNo  effusion!  Stable?");
  EXPECT_EQ(r.sentences, (std::vector<std::string>{"Nodule measures 1.5 cm.", "No effusion!", "Stable?"}));
}

TEST(Postprocess, Idempotent) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pieces = {"Heart is enlarged.", "No effusion", " ", "\n", "..", "Mild atelectasis!",
                                           "1.5 cm", "However", "?", "lungs clear"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string raw;
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) raw += pieces[rng() % pieces.size()] + (rng() % 2 ? " " : "");
    Report once = postprocess_report(raw);
    Report twice = postprocess_report(once.text());
    EXPECT_EQ(once.sentences, twice.sentences) << raw;
    for (const auto& s : once.sentences) EXPECT_TRUE(s.back() == '.' || s.back() == '!' || s.back() == '?');
  }
}

TEST(NounPhrases, AdjectivesAttachToHeadNoun) {
  EXPECT_EQ(phrase_texts(analyse("There is a large pleural effusion.")),
            (std::vector<std::string>{"large pleural effusion"}));
}

TEST(NounPhrases, SingleNoun) { EXPECT_EQ(phrase_texts(analyse("Cardiomegaly.")), (std::vector<std::string>{"cardiomegaly"})); }

TEST(NounPhrases, PredicateAdjectiveExcluded) {
  EXPECT_EQ(phrase_texts(analyse("The lungs are clear.")), (std::vector<std::string>{"lungs"}));
}

TEST(NounPhrases, SpansIndexIntoSentence) {
  Report r = postprocess_report("Small nodule in the left upper lobe. Heart size is normal.");
  for (const NounPhrase& p : extract_noun_phrases(r)) {
    const std::string& s = r.sentences[p.sentence_index];
    ASSERT_LE(p.span.end, s.size());
    std::string slice = s.substr(p.span.begin, p.span.end - p.span.begin);
    std::ranges::transform(slice, slice.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    EXPECT_EQ(slice, p.text);
  }
}

TEST(NounPhrases, PunctuationSplitsChunks) {
  EXPECT_EQ(phrase_texts(analyse("Atelectasis, effusion.")), (std::vector<std::string>{"atelectasis", "effusion"}));
}

TEST(Negation, NoSignsOf) {
  auto phrases = analyse("No signs of pneumonia.");
  EXPECT_EQ(find_phrase(phrases, "pneumonia").polarity, Polarity::kNegated);
}

TEST(Negation, NoCueIsPositive) {
  auto phrases = analyse("Effusion is present.");
  EXPECT_EQ(find_phrase(phrases, "effusion").polarity, Polarity::kPositive);
}

TEST(Negation, ConjunctionResetsScope) {
  auto phrases = analyse("No effusion, but consolidation persists.");
  EXPECT_EQ(find_phrase(phrases, "effusion").polarity, Polarity::kNegated);
  EXPECT_EQ(find_phrase(phrases, "consolidation").polarity, Polarity::kPositive);
}

TEST(Negation, MultiWordCues) {
  for (const char* text : {"Without pneumothorax.", "Absence of pneumothorax.", "Negative for pneumothorax.",
                           "Lungs free of pneumothorax.", "Patient denies pneumothorax.", "Ruled out pneumothorax."}) {
    auto phrases = analyse(text);
    EXPECT_EQ(find_phrase(phrases, "pneumothorax").polarity, Polarity::kNegated) << text;
  }
}

TEST(Negation, CueDoesNotCrossSentences) {
  auto phrases = analyse("No effusion. Atelectasis is seen.");
  EXPECT_EQ(find_phrase(phrases, "atelectasis").polarity, Polarity::kPositive);
}

TEST(Negation, CueAfterPhraseDoesNotApply) {
  auto phrases = analyse("Atelectasis but no effusion.");
  EXPECT_EQ(find_phrase(phrases, "atelectasis").polarity, Polarity::kPositive);
  EXPECT_EQ(find_phrase(phrases, "effusion").polarity, Polarity::kNegated);
}

TEST(Beacons, NegatedPhrasesBecomeNegativePrompts) {
  for (const DiseaseBeacon& b : make_beacons(analyse("No effusion, but consolidation persists."))) {
    EXPECT_EQ(b.role == PromptRole::kNegative, b.phrase.polarity == Polarity::kNegated);
  }
}

TEST(Similarity, SelfSimilarityIsOne) {
  const auto& e = WordEmbeddings::bundled();
  for (const char* w : {"opacity", "pleural effusion", "cardiomegaly", "nodule/mass"})
    EXPECT_NEAR(semantic_similarity(w, w, e), 1.0, 1e-12) << w;
}

TEST(Similarity, OrthogonalVectorsGiveZero) {
  WordEmbeddings e({{"alpha", {1, 0, 0}}, {"beta", {0, 1, 0}}});
  EXPECT_EQ(semantic_similarity("alpha", "beta", e), 0.0);
}

TEST(Similarity, OverlappingFindingsScoreHigher) {
  const auto& e = WordEmbeddings::bundled();
  const double close = semantic_similarity("opacity", "consolidation", e);
  const double far = semantic_similarity("opacity", "cardiomegaly", e);
  EXPECT_GT(close, far);
  EXPECT_GE(close, kDefaultMatchThreshold);
}

TEST(Similarity, SynonymsClearThresholdAndDistinctClassesDoNot) {
  const auto& e = WordEmbeddings::bundled();
  for (auto [a, b] : std::vector<std::pair<const char*, const char*>>{{"infiltrate", "infiltration"},
                                                                      {"nodule", "nodule/mass"},
                                                                      {"effusion", "pleural effusion"},
                                                                      {"interstitial lung disease", "ild"},
                                                                      {"fibrotic changes", "pulmonary fibrosis"},
                                                                      {"small aortic enlargement", "aortic enlargement"}})
    EXPECT_GE(semantic_similarity(a, b, e), kDefaultMatchThreshold) << a << " / " << b;
  EXPECT_LT(semantic_similarity("pleural effusion", "pleural thickening", e), kDefaultMatchThreshold);
  EXPECT_LT(semantic_similarity("atelectasis", "calcification", e), kDefaultMatchThreshold);
}

TEST(Similarity, OutOfVocabularyIsBoundedAndDeterministic) {
  const auto& e = WordEmbeddings::bundled();
  const double a = semantic_similarity("costophrenic blunting", "pleural effusion", e);
  EXPECT_EQ(a, semantic_similarity("costophrenic blunting", "pleural effusion", e));
  EXPECT_GE(a, -1.0);
  EXPECT_LE(a, 1.0);
  EXPECT_NEAR(semantic_similarity("zzyzx", "zzyzx", e), 1.0, 1e-12);
}

TEST(Match, ExactBeaconPairs) {
  auto m = match_region_text({{0, "pneumonia"}}, {beacon("pneumonia", 0, 0)}, 0.6);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].matched_phrase, "pneumonia");
  EXPECT_NEAR(m.pairs[0].similarity, 1.0, 1e-12);
  EXPECT_FALSE(m.pairs[0].fallback);
  EXPECT_TRUE(m.negative_prompts.empty());
}

TEST(Match, NegatedBeaconFallsBackAndJoinsNegativePool) {
  auto m = match_region_text({{0, "pneumonia"}}, {beacon("pneumonia", 0, 12, true)}, 0.6);
  EXPECT_TRUE(m.pairs[0].fallback);
  EXPECT_EQ(m.pairs[0].matched_phrase, "pneumonia");
  EXPECT_EQ(m.negative_prompts, (std::vector<std::string>{"pneumonia"}));
}

TEST(Match, EmptyBeaconsFallBack) {
  auto m = match_region_text({{3, "cardiomegaly"}, {4, "atelectasis"}}, {}, 0.6);
  ASSERT_EQ(m.pairs.size(), 2u);
  for (const auto& p : m.pairs) {
    EXPECT_TRUE(p.fallback);
    EXPECT_EQ(p.matched_phrase, p.class_label);
  }
}

TEST(Match, UnusedPositiveBeaconsBecomeNegatives) {
  auto m = match_region_text({{0, "cardiomegaly"}},
                             {beacon("cardiomegaly", 0, 0), beacon("pneumothorax", 1, 0), beacon("effusion", 2, 3, true)},
                             0.6);
  EXPECT_EQ(m.pairs[0].matched_phrase, "cardiomegaly");
  EXPECT_EQ(m.negative_prompts, (std::vector<std::string>{"pneumothorax", "effusion"}));
}

TEST(Match, TiesPreferEarliestSentenceThenSpan) {
  std::vector<DiseaseBeacon> beacons = {beacon("atelectasis", 1, 0), beacon("atelectasis", 0, 20),
                                        beacon("atelectasis", 0, 4)};
  WordEmbeddings e({{"atelectasis", {1, 0}}});
  auto m = match_region_text({{0, "atelectasis"}}, beacons, 0.6, e);
  // The winner is consumed, so only the duplicates (deduplicated) remain in the pool.
  EXPECT_EQ(m.negative_prompts, (std::vector<std::string>{"atelectasis"}));
  std::ranges::reverse(beacons);
  auto m2 = match_region_text({{0, "atelectasis"}}, beacons, 0.6, e);
  EXPECT_EQ(m.pairs[0].matched_phrase, m2.pairs[0].matched_phrase);
}

TEST(Match, PermutationInvariant) {
  std::mt19937_64 rng(9);
  std::vector<DiseaseBeacon> beacons = {beacon("mild atelectasis", 0, 0), beacon("opacity", 0, 30),
                                        beacon("consolidation", 1, 2), beacon("effusion", 2, 5, true),
                                        beacon("large nodule", 3, 0), beacon("mass", 3, 20)};
  std::vector<BoxLabel> boxes = {{0, "atelectasis"}, {1, "consolidation"}, {2, "nodule/mass"}, {3, "pleural effusion"}};
  auto reference = match_region_text(boxes, beacons, 0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::ranges::shuffle(beacons, rng);
    auto m = match_region_text(boxes, beacons, 0.6);
    ASSERT_EQ(m.pairs.size(), reference.pairs.size());
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
      EXPECT_EQ(m.pairs[i].matched_phrase, reference.pairs[i].matched_phrase);
      EXPECT_EQ(m.pairs[i].similarity, reference.pairs[i].similarity);
    }
    EXPECT_EQ(m.negative_prompts, reference.negative_prompts);
  }
}

TEST(Match, InvalidThresholdThrows) {
  EXPECT_THROW(match_region_text({}, {}, 0.0), ConfigError);
  EXPECT_THROW(match_region_text({}, {}, 1.5), ConfigError);
  EXPECT_NO_THROW(match_region_text({}, {}, 1.0));
}

TEST(Generate, FullPipelineAndJsonRoundTrip) {
  const std::vector<std::string> classes = {"aortic enlargement", "atelectasis", "calcification", "cardiomegaly"};
  PromptRecord r = generate_prompts("img7", "Mild cardiomegaly is seen. No atelectasis. Calcification persists. The ",
                                    {{0, "cardiomegaly"}, {1, "atelectasis"}}, classes, 0.6);
  ASSERT_EQ(r.positive_pairs.size(), 2u);
  EXPECT_EQ(r.positive_pairs[0].matched_phrase, "mild cardiomegaly");
  EXPECT_TRUE(r.positive_pairs[1].fallback);
  EXPECT_EQ(r.negative_prompts, (std::vector<std::string>{"atelectasis", "calcification"}));
  EXPECT_EQ(r.disease_prompts, (std::vector<std::string>{"mild cardiomegaly", "calcification"}));
  PromptRecord back = prompt_record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.image_id, "img7");
  EXPECT_EQ(back.positive_pairs[0].matched_phrase, "mild cardiomegaly");
  EXPECT_EQ(back.negative_prompts, r.negative_prompts);
  EXPECT_THROW(prompt_record_from_json(nlohmann::json::object()), InputError);
}

}  // namespace
}  // namespace spdet::dtpg
