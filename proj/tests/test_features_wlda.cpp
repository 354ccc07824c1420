#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "argmine/features.hpp"
#include "argmine/synth.hpp"

using namespace argmine;

namespace {

double get(const std::vector<NamedFeature>& fs, const std::string& name) {
  for (const auto& f : fs)
    if (f.name == name) return f.value;
  ADD_FAILURE() << "no feature " << name;
  return std::nan("");
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> words{
      "I",   "think", "he",    "went", "back", "because", "so",    "will",    "can't", "my",      "author", "says",
      "the", "dog",   "was",   "very", "sad",  "!",       "?",     ",",       ".",     "...",     ";",      "\"",
      "42",  "Dr.",   "maybe", "must", "and",  "that",    "which", "lonely",  "(",     "\xE2\x80\x94", "x",  "ran"};
  std::string s;
  const std::size_t n = rng.below(30);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng.below(words.size())];
  }
  return s;
}

bool oracle_punct(const std::string& tok) {
  static const std::string punct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  if (tok.empty()) return false;
  for (char c : tok)
    if (punct.find(c) == std::string::npos) return false;
  return true;
}

Corpus two_transcripts() {
  SynthConfig cfg;
  cfg.n_transcripts = 4;
  cfg.seed = 8;
  return generate_synthetic(cfg);
}

}  // namespace

TEST(Wlda, CatalogShape) {
  const auto& cat = wlda_catalog();
  EXPECT_EQ(cat.size(), 28u);
  std::set<std::string_view> names;
  for (const auto& f : cat) {
    EXPECT_TRUE(is_wlda(f.group));
    EXPECT_TRUE(names.insert(f.name).second) << f.name;
  }
  const auto fs = extract_wlda(process("a b"), nullptr, nullptr, {});
  ASSERT_EQ(fs.size(), cat.size());
  for (std::size_t i = 0; i < fs.size(); ++i) EXPECT_EQ(fs[i].name, cat[i].name);
}

TEST(Wlda, TableOneWarrantMove) {
  const auto prev = process("like how he gets lost. Then he goes like he needs to be around other people.");
  const auto move = process(
      "cause he tried doing it by himself and he can\xE2\x80\x99t. So I think Fezzik went back to his normal ways, "
      "like after he changed.");
  const auto fs = extract_wlda(move, &prev, nullptr, {2, 3});
  EXPECT_EQ(get(fs, "wlda.has_first_person_singular"), 1.0);
  EXPECT_GE(get(fs, "wlda.connective_count"), 2.0);
  EXPECT_GE(get(fs, "wlda.arg_word_count"), 1.0);  // "think"
  EXPECT_EQ(get(fs, "wlda.sentence_count"), 2.0);
  EXPECT_EQ(get(fs, "wlda.tense_past"), 1.0);       // "tried"
  EXPECT_EQ(get(fs, "wlda.arg_subject_verb"), 1.0);  // "he tried", "I think"
  EXPECT_EQ(get(fs, "wlda.is_last_move"), 1.0);
  EXPECT_EQ(get(fs, "wlda.relative_position"), 1.0);
  EXPECT_EQ(get(fs, "wlda.next_token_count"), 0.0);
  EXPECT_EQ(get(fs, "wlda.prev_token_count"), static_cast<double>(prev.tokens.size()));
}

TEST(Wlda, FirstMoveHasZeroPreviousContext) {
  const auto move = process("I think so.");
  const auto next = process("Because he must, he will.");
  const auto fs = extract_wlda(move, nullptr, &next, {0, 5});
  for (const char* n : {"wlda.prev_token_count", "wlda.prev_punctuation_count", "wlda.prev_clause_count",
                        "wlda.prev_has_modal"})
    EXPECT_EQ(get(fs, n), 0.0) << n;
  EXPECT_EQ(get(fs, "wlda.is_first_move"), 1.0);
  EXPECT_EQ(get(fs, "wlda.relative_position"), 0.0);
  EXPECT_EQ(get(fs, "wlda.next_has_modal"), 1.0);
  EXPECT_EQ(get(fs, "wlda.next_punctuation_count"), 2.0);
}

TEST(Wlda, ContextMirrorsNeighbourFeatures) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto a = process(random_text(rng)), b = process(random_text(rng)), c = process(random_text(rng));
    const auto fa = extract_wlda(a, nullptr, &b, {0, 3});
    const auto fb = extract_wlda(b, &a, &c, {1, 3});
    const auto fc = extract_wlda(c, &b, nullptr, {2, 3});
    ASSERT_EQ(get(fb, "wlda.prev_token_count"), get(fa, "wlda.token_count"));
    ASSERT_EQ(get(fb, "wlda.next_punctuation_count"), get(fc, "wlda.punctuation_count"));
    ASSERT_EQ(get(fb, "wlda.prev_clause_count"), get(fa, "wlda.clause_count"));
    ASSERT_EQ(get(fa, "wlda.next_has_modal"), get(fb, "wlda.has_modal"));
    ASSERT_EQ(get(fb, "wlda.relative_position"), 0.5);
  }
}

TEST(Wlda, TokenAndPunctuationCountsMatchRecount) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = random_text(rng);
    const auto tokens = tokenize(text);
    std::size_t punct = 0;
    for (const auto& t : tokens) punct += oracle_punct(t);
    const auto fs = extract_wlda(process(text), nullptr, nullptr, {});
    ASSERT_EQ(get(fs, "wlda.token_count"), static_cast<double>(tokens.size())) << text;
    ASSERT_EQ(get(fs, "wlda.punctuation_count"), static_cast<double>(punct)) << text;
  }
}

TEST(Wlda, ValueDomainsOnArbitraryInput) {
  static const std::set<std::string> indicators{
      "wlda.has_modal",   "wlda.has_first_person_singular", "wlda.arg_subject_verb", "wlda.tense_past",
      "wlda.tense_present", "wlda.tense_modal", "wlda.tense_none", "wlda.is_first_move", "wlda.is_last_move",
      "wlda.prev_has_modal", "wlda.next_has_modal"};
  static const std::set<std::string> ratios{"wlda.type_token_ratio", "wlda.relative_position"};
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    std::string text = random_text(rng);
    if (i % 3 == 0)
      for (std::size_t k = 0; k < 10; ++k) text.push_back(static_cast<char>(rng.below(256)));
    const auto m = process(text);
    const std::size_t count = 1 + rng.below(5);
    const auto fs = extract_wlda(m, &m, &m, {rng.below(count), count});
    double tense_sum = 0.0;
    for (const auto& f : fs) {
      ASSERT_TRUE(std::isfinite(f.value)) << f.name;
      if (indicators.count(f.name)) ASSERT_TRUE(f.value == 0.0 || f.value == 1.0) << f.name;
      else if (ratios.count(f.name)) ASSERT_TRUE(f.value >= 0.0 && f.value <= 1.0) << f.name;
      else ASSERT_TRUE(f.value >= 0.0 && f.value == std::floor(f.value)) << f.name << "=" << f.value;
      if (f.name.starts_with("wlda.tense_")) tense_sum += f.value;
    }
    ASSERT_EQ(tense_sum, 1.0);
  }
}

TEST(Wlda, DepthIsClauseCountPlusOne) {
  const auto fs = extract_wlda(process("I think that he changed because he was lonely. He left."), nullptr, nullptr, {});
  EXPECT_EQ(get(fs, "wlda.clause_count"), 2.0);
  EXPECT_EQ(get(fs, "wlda.parse_depth"), 3.0);
  EXPECT_EQ(get(extract_wlda(process(""), nullptr, nullptr, {}), "wlda.parse_depth"), 0.0);
}

TEST(Schema, DenseNamesAreStaticAcrossFolds) {
  const Corpus c = two_transcripts();
  const auto pc = preprocess(c);
  const std::vector<MoveRef> a{{0, 0}, {0, 1}, {0, 2}}, b{{1, 0}, {1, 1}, {2, 0}};
  const auto cfg = FeatureConfig::for_sets(true, true);
  const auto sa = fit_schema(c, pc, a, cfg, "a");
  const auto sb = fit_schema(c, pc, b, cfg, "b");
  EXPECT_EQ(sa.dense_names, sb.dense_names);
  EXPECT_EQ(sa.dense_size(), dense_catalog().size());
  EXPECT_NE(sa.tfidf->vocabulary, sb.tfidf->vocabulary);
  EXPECT_EQ(sa.fitted_on, "a");
  EXPECT_EQ(sa.fitted_keys, (std::set<std::string>{c.transcripts[0].moves[0].key(), c.transcripts[0].moves[1].key(),
                                                   c.transcripts[0].moves[2].key()}));
}

TEST(Schema, RefitIsIdentical) {
  const Corpus c = two_transcripts();
  const auto pc = preprocess(c);
  std::vector<MoveRef> refs;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t m = 0; m < c.transcripts[t].moves.size(); ++m) refs.push_back({t, m});
  const auto cfg = FeatureConfig::for_sets(true, true);
  const auto s1 = fit_schema(c, pc, refs, cfg), s2 = fit_schema(c, pc, refs, cfg);
  EXPECT_EQ(s1.tfidf->to_json(), s2.tfidf->to_json());
  EXPECT_EQ(s1.pos->vocabulary, s2.pos->vocabulary);
  const MoveRef probe{3, 0};
  const auto f1 = transform(s1, c, pc, probe), f2 = transform(s2, c, pc, probe);
  EXPECT_EQ(f1.dense, f2.dense);
  EXPECT_EQ(f1.sparse, f2.sparse);
}

TEST(Schema, OutOfVocabularyMoveHasEmptyLexicalBlock) {
  Corpus c;
  for (const char* id : {"A", "B"}) {
    Transcript t{id, {}};
    t.moves.push_back({id, 0, "S1", std::string(id) == "A" ? "the dog went home." : "zzq xxv qqz.", ArgComponent::Claim,
                       Specificity::Low});
    c.transcripts.push_back(t);
  }
  const auto pc = preprocess(c);
  FeatureConfig cfg = FeatureConfig::for_sets(true, false);
  cfg.groups.insert(FeatureGroup::DlgLexical);
  const std::vector<MoveRef> train{{0, 0}};
  const auto s = fit_schema(c, pc, train, cfg);
  const auto fv = transform(s, c, pc, {1, 0});
  EXPECT_TRUE(fv.sparse.empty());
  EXPECT_EQ(fv.dense.size(), s.dense_size());
  EXPECT_EQ(get(s.named(fv), "wlda.token_count"), 4.0);
}

TEST(Schema, EmptyTrainingSetThrows) {
  const Corpus c = two_transcripts();
  const auto pc = preprocess(c);
  EXPECT_THROW(fit_schema(c, pc, {}, FeatureConfig::for_sets(true, true)), ValidationError);
}

TEST(Schema, SparseIndicesStrictlyIncreasingAndFinite) {
  const Corpus c = two_transcripts();
  const auto pc = preprocess(c);
  std::vector<MoveRef> all;
  for (std::size_t t = 0; t < c.transcripts.size(); ++t)
    for (std::size_t m = 0; m < c.transcripts[t].moves.size(); ++m) all.push_back({t, m});
  const auto s = fit_schema(c, pc, std::span(all).first(all.size() / 2), FeatureConfig::for_sets(true, true));
  for (const auto& r : all) {
    const auto fv = transform(s, c, pc, r);
    for (std::size_t i = 0; i < fv.sparse.size(); ++i) {
      ASSERT_TRUE(std::isfinite(fv.sparse[i].value));
      ASSERT_LT(fv.sparse[i].index, s.sparse_size());
      if (i) {
        ASSERT_LT(fv.sparse[i - 1].index, fv.sparse[i].index);
      }
    }
    for (double v : fv.dense) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Schema, DisabledGroupsDropTheirColumns) {
  const Corpus c = two_transcripts();
  const auto pc = preprocess(c);
  const std::vector<MoveRef> refs{{0, 0}, {0, 1}};
  FeatureConfig cfg = FeatureConfig::for_sets(true, true);
  cfg.groups.erase(FeatureGroup::WldaContext);
  cfg.groups.erase(FeatureGroup::DlgSyntax);
  const auto s = fit_schema(c, pc, refs, cfg);
  for (auto g : s.dense_groups) EXPECT_NE(g, FeatureGroup::WldaContext);
  EXPECT_EQ(s.pos_size, 0u);
  EXPECT_EQ(s.dense_size(), dense_catalog().size() - 8);
}

TEST(Standardizer, ZeroMeanUnitVariance) {
  std::vector<FeatureVector> rows(5);
  for (std::size_t i = 0; i < 5; ++i) rows[i].dense = {static_cast<double>(i), 3.0};
  std::vector<const FeatureVector*> ptrs;
  for (const auto& r : rows) ptrs.push_back(&r);
  const auto s = Standardizer::fit(ptrs, 2);
  double mean = 0.0, sq = 0.0;
  for (const auto& r : rows) {
    const auto z = s.apply(r.dense);
    mean += z[0] / 5.0;
    sq += z[0] * z[0] / 5.0;
    EXPECT_EQ(z[1], 0.0);  // constant column keeps sd 1
  }
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(sq, 1.0, 1e-12);
}

TEST(FeatureCatalog, ListsEveryFeature) {
  const std::string md = render_feature_catalog();
  for (const auto& f : dense_catalog()) EXPECT_NE(md.find(std::string(f.name)), std::string::npos) << f.name;
  for (auto g : kFeatureGroups) EXPECT_NE(md.find(std::string(to_string(g))), std::string::npos);
}
