#pragma once

// Feature schema: which groups are active, the vocabularies fitted on one
// training fold, and the transform from a move (in transcript context) to a
// FeatureVector.

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/feature_types.hpp"
#include "argmine/features_dialogue.hpp"
#include "argmine/features_wlda.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

/// Tokenized and tagged moves, parallel to a Corpus.
struct ProcessedCorpus {
  std::vector<std::vector<TokenizedMove>> moves;  // [transcript][move]
};

inline ProcessedCorpus preprocess(const Corpus& corpus, const Tagger& tagger = Tagger::defaults()) {
  ProcessedCorpus pc;
  pc.moves.reserve(corpus.transcripts.size());
  for (const auto& t : corpus.transcripts) {
    std::vector<TokenizedMove> ms;
    ms.reserve(t.moves.size());
    for (const auto& m : t.moves) ms.push_back(process(m.text, tagger));
    pc.moves.push_back(std::move(ms));
  }
  return pc;
}

/// Address of one move inside a corpus.
struct MoveRef {
  std::size_t transcript = 0;
  std::size_t move = 0;

  auto operator<=>(const MoveRef&) const = default;
};

/// Every dense feature, essay set first.
inline const std::vector<FeatureInfo>& dense_catalog() {
  static const std::vector<FeatureInfo> kAll = [] {
    std::vector<FeatureInfo> all = wlda_catalog();
    const auto& dlg = dialogue_catalog();
    all.insert(all.end(), dlg.begin(), dlg.end());
    return all;
  }();
  return kAll;
}

struct FeatureConfig {
  std::set<FeatureGroup> groups;
  TfidfConfig tfidf;
  std::size_t pos_min_df = 1;

  static FeatureConfig for_sets(bool wlda, bool dialogue) {
    FeatureConfig c;
    for (auto g : kFeatureGroups)
      if (is_wlda(g) ? wlda : dialogue) c.groups.insert(g);
    return c;
  }

  bool has(FeatureGroup g) const { return groups.count(g) > 0; }
};

struct FeatureVector {
  std::vector<double> dense;  // aligned with FeatureSchema::dense_names
  SparseVector sparse;        // tf-idf block, then POS n-gram block
};

struct FeatureSchema {
  FeatureConfig config;
  std::vector<std::size_t> dense_index;  // positions in dense_catalog()
  std::vector<std::string> dense_names;
  std::vector<FeatureGroup> dense_groups;
  std::optional<TfidfModel> tfidf;       // also feeds the mean-idf surface feature
  std::optional<PosNgramModel> pos;
  std::size_t tfidf_size = 0;            // sparse indices [0, tfidf_size)
  std::size_t pos_size = 0;              // sparse indices [tfidf_size, tfidf_size + pos_size)
  std::string fitted_on;                 // fold identifier
  std::set<std::string> fitted_keys;     // move keys seen during fitting

  std::size_t dense_size() const noexcept { return dense_names.size(); }
  std::size_t sparse_size() const noexcept { return tfidf_size + pos_size; }

  FeatureGroup sparse_group(std::size_t index) const noexcept {
    return index < tfidf_size ? FeatureGroup::DlgLexical : FeatureGroup::DlgSyntax;
  }

  std::string sparse_name(std::size_t index) const {
    const auto& vocab = index < tfidf_size ? tfidf->vocabulary : pos->vocabulary;
    const std::size_t local = index < tfidf_size ? index : index - tfidf_size;
    for (const auto& [term, idx] : vocab)
      if (idx == local) return (index < tfidf_size ? "tfidf:" : "pos:") + term;
    return "?";
  }

  /// Dense block as (name, value) pairs.
  std::vector<NamedFeature> named(const FeatureVector& fv) const {
    std::vector<NamedFeature> out;
    for (std::size_t i = 0; i < dense_names.size(); ++i) out.push_back({dense_names[i], fv.dense[i]});
    return out;
  }
};

/// Fit the schema on the training moves of one fold. Dense names follow
/// catalog order; sparse vocabularies come from `training` only.
inline FeatureSchema fit_schema(const Corpus& corpus, const ProcessedCorpus& pc, std::span<const MoveRef> training,
                                const FeatureConfig& config, std::string fold_id = {}) {
  if (training.empty()) throw ValidationError("fit_schema: empty training set");
  FeatureSchema s;
  s.config = config;
  s.fitted_on = std::move(fold_id);
  const auto& cat = dense_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    if (!config.has(cat[i].group)) continue;
    s.dense_index.push_back(i);
    s.dense_names.emplace_back(cat[i].name);
    s.dense_groups.push_back(cat[i].group);
  }
  std::vector<std::vector<std::string>> docs;
  std::vector<const TokenizedMove*> tagged;
  for (const auto& r : training) {
    s.fitted_keys.insert(corpus.transcripts[r.transcript].moves[r.move].key());
    const auto& tm = pc.moves[r.transcript][r.move];
    docs.push_back(word_tokens(tm));
    tagged.push_back(&tm);
  }
  if (config.has(FeatureGroup::DlgLexical) || config.has(FeatureGroup::DlgSemanticDensity)) {
    s.tfidf = fit_tfidf(docs, config.tfidf);
    if (config.has(FeatureGroup::DlgLexical)) s.tfidf_size = s.tfidf->size();
  }
  if (config.has(FeatureGroup::DlgSyntax)) {
    s.pos = fit_pos_ngrams(tagged, config.pos_min_df);
    s.pos_size = s.pos->size();
  }
  return s;
}

/// Every dense catalog value for one move, in catalog order.
inline std::vector<double> extract_all_dense(const Corpus& corpus, const ProcessedCorpus& pc, MoveRef r,
                                             const Lexicons& lex = Lexicons::defaults(),
                                             const TfidfModel* idf = nullptr) {
  const auto& ms = pc.moves[r.transcript];
  const TokenizedMove* prev = r.move > 0 ? &ms[r.move - 1] : nullptr;
  const TokenizedMove* next = r.move + 1 < ms.size() ? &ms[r.move + 1] : nullptr;
  (void)corpus;
  std::vector<double> v;
  for (auto& f : extract_wlda(ms[r.move], prev, next, {r.move, ms.size()}, lex)) v.push_back(f.value);
  for (auto& f : extract_semantic_density(ms[r.move], lex, idf)) v.push_back(f.value);
  for (auto& f : extract_move_statistics(ms[r.move])) v.push_back(f.value);
  return v;
}

inline FeatureVector transform(const FeatureSchema& schema, const Corpus& corpus, const ProcessedCorpus& pc,
                               MoveRef r, const Lexicons& lex = Lexicons::defaults()) {
  FeatureVector fv;
  if (!schema.dense_index.empty()) {
    const auto all = extract_all_dense(corpus, pc, r, lex, schema.tfidf ? &*schema.tfidf : nullptr);
    fv.dense.reserve(schema.dense_index.size());
    for (auto i : schema.dense_index) fv.dense.push_back(all[i]);
  }
  const auto& tm = pc.moves[r.transcript][r.move];
  if (schema.tfidf_size > 0) fv.sparse = transform_tfidf(*schema.tfidf, word_tokens(tm));
  if (schema.pos_size > 0) {
    for (auto e : extract_pos_ngrams(tm, *schema.pos)) fv.sparse.push_back({e.index + schema.tfidf_size, e.value});
  }
  return fv;
}

/// Zero-mean, unit-variance scaling of the dense block, fitted on training rows.
/// Constant columns keep sd = 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;
  std::set<std::string> fitted_keys;

  static Standardizer fit(std::span<const FeatureVector* const> rows, std::size_t width) {
    Standardizer s;
    s.mean.assign(width, 0.0);
    s.sd.assign(width, 1.0);
    if (rows.empty()) return s;
    const auto n = static_cast<double>(rows.size());
    for (const auto* r : rows)
      for (std::size_t j = 0; j < width; ++j) s.mean[j] += r->dense[j];
    for (auto& m : s.mean) m /= n;
    std::vector<double> ss(width, 0.0);
    for (const auto* r : rows)
      for (std::size_t j = 0; j < width; ++j) ss[j] += (r->dense[j] - s.mean[j]) * (r->dense[j] - s.mean[j]);
    for (std::size_t j = 0; j < width; ++j) {
      const double sd = std::sqrt(ss[j] / n);
      s.sd[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  std::vector<double> apply(const std::vector<double>& dense) const {
    std::vector<double> out(dense.size());
    for (std::size_t j = 0; j < dense.size(); ++j) out[j] = (dense[j] - mean[j]) / sd[j];
    return out;
  }
};

/// Markdown feature catalog (the content of docs/FEATURES.md).
inline std::string render_feature_catalog() {
  std::ostringstream out;
  out << "# Feature catalog\n\n"
      << "Generated by `argmine features`. Every feature belongs to exactly one ablation group.\n\n"
      << "## Dense features\n\n"
      << "| Name | Group | Definition | Origin |\n|---|---|---|---|\n";
  for (const auto& f : dense_catalog())
    out << "| `" << f.name << "` | " << to_string(f.group) << " | " << f.definition << " | " << f.origin << " |\n";
  out << "\n## Sparse blocks\n\n"
      << "| Prefix | Group | Definition | Origin |\n|---|---|---|---|\n"
      << "| `tfidf:` | dlg_lexical | unigram and bigram tf-idf over word tokens; "
         "idf = ln((1+N)/(1+df))+1, L2-normalised per move; vocabulary fitted on the training fold (min_df) "
         "| online-dialogue feature set |\n"
      << "| `pos:` | dlg_syntax | counts of POS-tag 1/2/3-grams inside sentences; vocabulary fitted on the "
         "training fold | online-dialogue feature set |\n"
      << "\nIn hybrid networks the dense block is standardised with training-fold mean/sd and the sparse blocks "
         "pass through a learned linear projection.\n";
  return out.str();
}

}  // namespace argmine
