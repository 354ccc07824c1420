#pragma once

// Online-dialogue feature set: semantic density (with surface specificity
// features), tf-idf n-grams plus move-level statistics, and POS n-gram counts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/error.hpp"
#include "argmine/feature_types.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

inline const std::vector<FeatureInfo>& dialogue_catalog() {
  static constexpr std::string_view kDialogue = "online-dialogue feature set";
  static constexpr std::string_view kSurface = "surface specificity feature (classifier features, not its score)";
  static constexpr std::string_view kStats = "online-dialogue feature set; descriptive statistics stand-in";
  static const std::vector<FeatureInfo> kCatalog{
      {"dlg.pronoun_count", FeatureGroup::DlgSemanticDensity, "tokens in the pronoun lexicon", kDialogue},
      {"dlg.word_length_mean", FeatureGroup::DlgSemanticDensity, "mean characters per word token (0 if none)",
       kStats},
      {"dlg.word_length_max", FeatureGroup::DlgSemanticDensity, "max characters per word token", kStats},
      {"dlg.word_length_sd", FeatureGroup::DlgSemanticDensity, "population sd of characters per word token",
       kStats},
      {"dlg.words_len_1_3", FeatureGroup::DlgSemanticDensity, "word tokens of 1-3 characters", kDialogue},
      {"dlg.words_len_4_6", FeatureGroup::DlgSemanticDensity, "word tokens of 4-6 characters", kDialogue},
      {"dlg.words_len_7_9", FeatureGroup::DlgSemanticDensity, "word tokens of 7-9 characters", kDialogue},
      {"dlg.words_len_10_plus", FeatureGroup::DlgSemanticDensity, "word tokens of 10 or more characters",
       kDialogue},
      {"dlg.surface_token_count", FeatureGroup::DlgSemanticDensity, "word tokens (punctuation excluded)", kSurface},
      {"dlg.surface_stopword_fraction", FeatureGroup::DlgSemanticDensity, "stopword tokens / word tokens",
       kSurface},
      {"dlg.surface_digit_tokens", FeatureGroup::DlgSemanticDensity, "tokens containing a digit", kSurface},
      {"dlg.surface_polar_count", FeatureGroup::DlgSemanticDensity, "tokens in the polar-word lexicon", kSurface},
      {"dlg.surface_capitalized_count", FeatureGroup::DlgSemanticDensity,
       "tokens starting with an uppercase letter in the raw text", kSurface},
      {"dlg.surface_mean_idf", FeatureGroup::DlgSemanticDensity,
       "mean training-fold idf of word tokens; unseen words count as df = 1", kSurface},
      {"dlg.sentence_count", FeatureGroup::DlgLexical, "number of sentences", kStats},
      {"dlg.sentence_length_mean", FeatureGroup::DlgLexical, "mean tokens per sentence", kStats},
      {"dlg.sentence_length_max", FeatureGroup::DlgLexical, "max tokens per sentence", kStats},
  };
  return kCatalog;
}

/// Word (non-punctuation) tokens of a move.
inline std::vector<std::string> word_tokens(const TokenizedMove& m) {
  std::vector<std::string> out;
  for (const auto& t : m.tokens)
    if (!is_punctuation(t)) out.push_back(t);
  return out;
}

/// Unigram and bigram terms of a word sequence, with repetition.
inline std::vector<std::string> ngram_terms(const std::vector<std::string>& words, std::size_t ngram_max = 2) {
  std::vector<std::string> terms;
  for (std::size_t n = 1; n <= ngram_max; ++n) {
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
      std::string t = words[i];
      for (std::size_t k = 1; k < n; ++k) t += " " + words[i + k];
      terms.push_back(std::move(t));
    }
  }
  return terms;
}

struct TfidfConfig {
  std::size_t min_df = 1;
  std::size_t ngram_max = 2;
};

/// Frozen tf-idf vocabulary. idf(t) = ln((1 + N) / (1 + df(t))) + 1.
struct TfidfModel {
  static constexpr int kVersion = 1;

  TfidfConfig config;
  std::size_t num_docs = 0;
  std::map<std::string, std::size_t> vocabulary;  // term -> dense index, lexicographic
  std::vector<double> idf;                        // aligned with vocabulary indices
  std::map<std::string, std::size_t> unigram_df;  // every training unigram, before min_df

  double idf_of_df(std::size_t df) const {
    return std::log((1.0 + static_cast<double>(num_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
  }

  /// idf of a single word, using the unfiltered unigram table. An unseen word
  /// counts as seen once: every training word has df >= 1, and giving unseen
  /// words df = 0 would shift held-out moves away from the training range.
  double word_idf(const std::string& word) const {
    const auto it = unigram_df.find(word);
    return idf_of_df(it == unigram_df.end() ? 1 : it->second);
  }

  std::size_t size() const noexcept { return vocabulary.size(); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "argmine-tfidf";
    j["version"] = kVersion;
    j["min_df"] = config.min_df;
    j["ngram_max"] = config.ngram_max;
    j["num_docs"] = num_docs;
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [term, idx] : vocabulary) terms.push_back({{"term", term}, {"idf", idf[idx]}});
    j["vocabulary"] = std::move(terms);
    j["unigram_df"] = unigram_df;
    return j;
  }

  static TfidfModel from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "argmine-tfidf") throw ParseError("not an argmine tf-idf model");
    if (j.value("version", 0) != kVersion)
      throw ParseError("unsupported tf-idf model version " + std::to_string(j.value("version", 0)));
    TfidfModel m;
    m.config.min_df = j.at("min_df").get<std::size_t>();
    m.config.ngram_max = j.at("ngram_max").get<std::size_t>();
    m.num_docs = j.at("num_docs").get<std::size_t>();
    for (const auto& e : j.at("vocabulary")) {
      m.vocabulary.emplace(e.at("term").get<std::string>(), m.idf.size());
      m.idf.push_back(e.at("idf").get<double>());
    }
    m.unigram_df = j.at("unigram_df").get<std::map<std::string, std::size_t>>();
    return m;
  }
};

/// Fit on training moves only. Throws on an empty training set.
inline TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& docs, TfidfConfig config = {}) {
  if (docs.empty()) throw ValidationError("fit_tfidf: empty training set");
  if (config.min_df < 1) throw ValidationError("fit_tfidf: min_df must be >= 1");
  TfidfModel m;
  m.config = config;
  m.num_docs = docs.size();
  std::map<std::string, std::size_t> df;
  for (const auto& words : docs) {
    const auto terms = ngram_terms(words, config.ngram_max);
    const std::set<std::string> unique(terms.begin(), terms.end());
    for (const auto& t : unique) ++df[t];
    for (const auto& w : std::set<std::string>(words.begin(), words.end())) ++m.unigram_df[w];
  }
  for (const auto& [term, count] : df) {
    if (count < config.min_df) continue;
    m.vocabulary.emplace(term, m.idf.size());
    m.idf.push_back(m.idf_of_df(count));
  }
  return m;
}

/// tf * idf over known terms, L2-normalised; OOV terms are ignored.
inline SparseVector transform_tfidf(const TfidfModel& model, const std::vector<std::string>& words) {
  std::map<std::size_t, double> tf;
  for (const auto& t : ngram_terms(words, model.config.ngram_max)) {
    const auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) tf[it->second] += 1.0;
  }
  SparseVector out;
  double norm = 0.0;
  for (const auto& [idx, count] : tf) {
    const double v = count * model.idf[idx];
    out.push_back({idx, v});
    norm += v * v;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& e : out) e.value /= norm;
  }
  return out;
}

/// POS 1/2/3-gram counts within sentences, keyed by space-joined tags.
inline std::map<std::string, std::size_t> pos_ngram_counts(const TokenizedMove& m, std::size_t n_max = 3) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : m.sentences) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (std::size_t i = s.begin; i + n <= s.end; ++i) {
        std::string g = m.pos_tags[i];
        for (std::size_t k = 1; k < n; ++k) g += " " + m.pos_tags[i + k];
        ++counts[g];
      }
    }
  }
  return counts;
}

struct PosNgramModel {
  std::size_t min_df = 1;
  std::map<std::string, std::size_t> vocabulary;

  std::size_t size() const noexcept { return vocabulary.size(); }
};

inline PosNgramModel fit_pos_ngrams(const std::vector<const TokenizedMove*>& moves, std::size_t min_df = 1) {
  if (moves.empty()) throw ValidationError("fit_pos_ngrams: empty training set");
  std::map<std::string, std::size_t> df;
  for (const auto* m : moves)
    for (const auto& [gram, count] : pos_ngram_counts(*m)) ++df[gram];
  PosNgramModel model;
  model.min_df = min_df;
  for (const auto& [gram, count] : df)
    if (count >= min_df) model.vocabulary.emplace(gram, model.vocabulary.size());
  return model;
}

/// Raw POS n-gram counts over the fitted vocabulary.
inline SparseVector extract_pos_ngrams(const TokenizedMove& move, const PosNgramModel& model) {
  SparseVector out;
  for (const auto& [gram, count] : pos_ngram_counts(move)) {
    const auto it = model.vocabulary.find(gram);
    if (it != model.vocabulary.end()) out.push_back({it->second, static_cast<double>(count)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

/// Semantic-density block plus surface specificity features. `idf` supplies the
/// training-fold idf table; without it the mean-idf feature is 0.
inline std::vector<NamedFeature> extract_semantic_density(const TokenizedMove& move,
                                                          const Lexicons& lex = Lexicons::defaults(),
                                                          const TfidfModel* idf = nullptr) {
  std::vector<double> v;
  std::size_t pronouns = 0, stop = 0, digits = 0, polar = 0, capitalized = 0;
  std::array<std::size_t, 4> buckets{};
  double len_sum = 0.0, len_max = 0.0, idf_sum = 0.0;
  std::vector<double> lengths;
  for (std::size_t i = 0; i < move.tokens.size(); ++i) {
    const auto& t = move.tokens[i];
    if (!move.surface.empty() && !move.surface[i].empty() && move.surface[i][0] >= 'A' && move.surface[i][0] <= 'Z')
      ++capitalized;
    if (std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) ++digits;
    if (is_punctuation(t)) continue;
    if (lex.pronouns.count(t) > 0) ++pronouns;
    if (lex.stopwords.count(t) > 0) ++stop;
    if (lex.polar_words.count(t) > 0) ++polar;
    const auto len = static_cast<double>(t.size());
    lengths.push_back(len);
    len_sum += len;
    len_max = std::max(len_max, len);
    if (t.size() <= 3) ++buckets[0];
    else if (t.size() <= 6) ++buckets[1];
    else if (t.size() <= 9) ++buckets[2];
    else ++buckets[3];
    if (idf != nullptr) idf_sum += idf->word_idf(t);
  }
  const auto n = static_cast<double>(lengths.size());
  const double mean = lengths.empty() ? 0.0 : len_sum / n;
  double ss = 0.0;
  for (double l : lengths) ss += (l - mean) * (l - mean);
  v.push_back(static_cast<double>(pronouns));
  v.push_back(mean);
  v.push_back(len_max);
  v.push_back(lengths.empty() ? 0.0 : std::sqrt(ss / n));
  for (auto b : buckets) v.push_back(static_cast<double>(b));
  v.push_back(n);
  v.push_back(lengths.empty() ? 0.0 : static_cast<double>(stop) / n);
  v.push_back(static_cast<double>(digits));
  v.push_back(static_cast<double>(polar));
  v.push_back(static_cast<double>(capitalized));
  v.push_back(lengths.empty() || idf == nullptr ? 0.0 : idf_sum / n);

  std::vector<NamedFeature> out;
  const auto& cat = dialogue_catalog();
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({std::string(cat[i].name), v[i]});
  return out;
}

/// Move-level statistics that accompany the tf-idf block.
inline std::vector<NamedFeature> extract_move_statistics(const TokenizedMove& move) {
  double mean = 0.0, mx = 0.0;
  for (const auto& s : move.sentences) {
    mean += static_cast<double>(s.size());
    mx = std::max(mx, static_cast<double>(s.size()));
  }
  if (!move.sentences.empty()) mean /= static_cast<double>(move.sentences.size());
  const auto& cat = dialogue_catalog();
  const std::size_t base = 14;
  return {{std::string(cat[base].name), static_cast<double>(move.sentences.size())},
          {std::string(cat[base + 1].name), mean},
          {std::string(cat[base + 2].name), mx}};
}

inline void save_tfidf(const std::string& path, const TfidfModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << model.to_json().dump(1) << '\n';
}

inline TfidfModel load_tfidf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return TfidfModel::from_json(j);
}

}  // namespace argmine
