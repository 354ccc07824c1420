#pragma once

// Cross-validation harness: transcript-level folds, oversampling, per-fold
// feature fitting, training, scoring and the leakage audit.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/eval.hpp"
#include "argmine/features.hpp"
#include "argmine/models.hpp"
#include "argmine/rng.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

// ---------------------------------------------------------------------------
// folds

/// Transcript indices of one fold.
struct Fold {
  std::string id;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  bool operator==(const Fold&) const = default;
};

/// One fold per transcript, in corpus order; the fold id is the transcript id.
inline std::vector<Fold> split_loo(const Corpus& corpus) {
  const std::size_t n = corpus.transcripts.size();
  if (n < 2) throw ValidationError("leave-one-transcript-out needs at least 2 transcripts");
  std::vector<Fold> folds;
  folds.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Fold f{corpus.transcripts[t].id, {}, {t}};
    for (std::size_t u = 0; u < n; ++u)
      if (u != t) f.train.push_back(u);
    folds.push_back(std::move(f));
  }
  return folds;
}

/// k folds over shuffled transcripts (sizes differ by at most one).
inline std::vector<Fold> split_kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  const std::size_t n = corpus.transcripts.size();
  if (k < 2 || k > n) throw ValidationError("k-fold needs 2 <= k <= number of transcripts");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].test.push_back(order[i]);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(folds[f].test.begin(), folds[f].test.end());
    folds[f].id = "fold" + std::to_string(f + 1);
    for (std::size_t t = 0; t < n; ++t)
      if (!std::binary_search(folds[f].test.begin(), folds[f].test.end(), t)) folds[f].train.push_back(t);
  }
  return folds;
}

// ---------------------------------------------------------------------------
// oversampling

/// Random oversampling to the majority-class count. Returns indices into
/// `items`: every original once (in order), then for each minority class the
/// draws (uniform, with replacement) that top it up. `label(item)` gives the
/// class index in [0, classes).
template <class T, class LabelFn>
std::vector<std::size_t> oversample(std::span<const T> items, std::size_t classes, std::uint64_t seed,
                                    LabelFn label) {
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(label(items[i]));
    if (c >= classes) throw ValidationError("oversample: label out of range");
    members[c].push_back(i);
  }
  std::size_t target = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (members[c].empty()) throw ValidationError("oversample: class " + std::to_string(c) + " is absent");
    target = std::max(target, members[c].size());
  }
  std::vector<std::size_t> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) out[i] = i;
  Rng rng(seed);
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = members[c].size(); k < target; ++k) out.push_back(members[c][rng.below(members[c].size())]);
  return out;
}

inline std::vector<std::size_t> oversample(std::span<const std::size_t> labels, std::size_t classes,
                                           std::uint64_t seed) {
  return oversample(labels, classes, seed, [](std::size_t y) { return y; });
}

/// Oversampling by argument label only (specificity labels ride along).
inline std::vector<std::size_t> oversample(std::span<const ArgumentMove> moves, std::uint64_t seed) {
  return oversample(moves, kNumArgClasses, seed, [](const ArgumentMove& m) { return index_of(m.arg_label); });
}

// ---------------------------------------------------------------------------
// experiment config

enum class CvScheme { LeaveOneOut, KFold };

struct ValidationConfig {
  double fraction = 0.1;
  bool before_oversampling = false;
};

struct Experiment {
  std::string name = "experiment";
  ModelSpec model;
  std::uint64_t seed = 1;
  bool oversample = true;
  std::optional<std::array<double, 3>> class_weights;  // alternative to oversampling
  std::size_t min_df = 1;
  std::size_t ngram_max = 2;
  std::size_t pos_min_df = 1;
  std::set<FeatureGroup> disabled_groups;
  std::optional<std::string> embeddings;  // path; hashed vectors of training tokens when absent
  ValidationConfig validation;
  CvScheme cv = CvScheme::LeaveOneOut;
  std::size_t k = 10;

  void validate() const {
    model.validate();
    if (oversample && class_weights) throw ConfigError("class_weights", "cannot be combined with oversample=true");
    if (class_weights)
      for (double w : *class_weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class_weights", "weights must be positive");
    if (!(validation.fraction >= 0.0 && validation.fraction < 1.0))
      throw ConfigError("validation.fraction", "must lie in [0, 1)");
    if (min_df == 0) throw ConfigError("features.min_df", "must be >= 1");
    if (ngram_max == 0) throw ConfigError("features.ngram_max", "must be >= 1");
    if (pos_min_df == 0) throw ConfigError("features.pos_min_df", "must be >= 1");
    if (model.has_features() && !feature_config().groups.size())
      throw ConfigError("features.disabled_groups", "every feature group of the model is disabled");
  }

  FeatureConfig feature_config() const {
    FeatureConfig c = FeatureConfig::for_sets(model.wlda, model.dialogue);
    for (auto g : disabled_groups) c.groups.erase(g);
    c.tfidf.min_df = min_df;
    c.tfidf.ngram_max = ngram_max;
    c.pos_min_df = pos_min_df;
    return c;
  }
};

inline nlohmann::ordered_json to_json(const Experiment& e) {
  nlohmann::ordered_json j;
  j["name"] = e.name;
  j["model"] = nlohmann::ordered_json::parse(to_json(e.model).dump());
  j["seed"] = e.seed;
  j["oversample"] = e.oversample;
  j["class_weights"] = e.class_weights ? nlohmann::ordered_json(*e.class_weights) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json disabled = nlohmann::ordered_json::array();
  for (auto g : e.disabled_groups) disabled.push_back(to_string(g));
  j["features"] = {{"min_df", e.min_df}, {"ngram_max", e.ngram_max}, {"pos_min_df", e.pos_min_df},
                   {"disabled_groups", disabled}};
  j["embeddings"] = e.embeddings ? nlohmann::ordered_json(*e.embeddings) : nlohmann::ordered_json(nullptr);
  j["validation"] = {{"fraction", e.validation.fraction}, {"before_oversampling", e.validation.before_oversampling}};
  if (e.cv == CvScheme::LeaveOneOut) j["cv"] = {{"scheme", "loo"}};
  else j["cv"] = {{"scheme", "kfold"}, {"k", e.k}};
  return j;
}

/// Parse an experiment config; every error names the offending field.
inline Experiment experiment_from_json(const nlohmann::json& j) {
  using json_detail::get_as;
  json_detail::reject_unknown(
      j, "", {"name", "model", "seed", "oversample", "class_weights", "features", "embeddings", "validation", "cv"});
  Experiment e;
  if (j.contains("name")) e.name = get_as<std::string>(j.at("name"), "name");
  if (!j.contains("model")) throw ConfigError("model", "missing");
  e.model = model_spec_from_json(j.at("model"), "model");
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ConfigError("seed", "expected a non-negative integer");
    e.seed = s.get<std::uint64_t>();
  }
  bool oversample_given = false;
  if (j.contains("oversample")) {
    e.oversample = get_as<bool>(j.at("oversample"), "oversample");
    oversample_given = true;
  }
  if (j.contains("class_weights") && !j.at("class_weights").is_null()) {
    const auto& w = j.at("class_weights");
    std::array<double, 3> cw{};
    if (w.is_array()) {
      if (w.size() != 3) throw ConfigError("class_weights", "expected 3 weights (claim, evidence, warrant)");
      for (std::size_t i = 0; i < 3; ++i) cw[i] = get_as<double>(w[i], "class_weights[" + std::to_string(i) + "]");
    } else if (w.is_object()) {
      json_detail::reject_unknown(w, "class_weights", {"claim", "evidence", "warrant"});
      for (auto a : kArgComponents) {
        const std::string key(to_string(a));
        if (!w.contains(key)) throw ConfigError("class_weights." + key, "missing");
        cw[index_of(a)] = get_as<double>(w.at(key), "class_weights." + key);
      }
    } else {
      throw ConfigError("class_weights", "expected an array or an object");
    }
    e.class_weights = cw;
    if (!oversample_given) e.oversample = false;
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    json_detail::reject_unknown(f, "features", {"min_df", "ngram_max", "pos_min_df", "disabled_groups"});
    if (f.contains("min_df")) e.min_df = get_as<std::size_t>(f.at("min_df"), "features.min_df");
    if (f.contains("ngram_max")) e.ngram_max = get_as<std::size_t>(f.at("ngram_max"), "features.ngram_max");
    if (f.contains("pos_min_df")) e.pos_min_df = get_as<std::size_t>(f.at("pos_min_df"), "features.pos_min_df");
    if (f.contains("disabled_groups")) {
      const auto& dg = f.at("disabled_groups");
      if (!dg.is_array()) throw ConfigError("features.disabled_groups", "expected an array");
      for (std::size_t i = 0; i < dg.size(); ++i) {
        const auto p = "features.disabled_groups[" + std::to_string(i) + "]";
        const auto name = get_as<std::string>(dg[i], p);
        const auto g = parse_feature_group(name);
        if (!g) throw ConfigError(p, "unknown feature group '" + name + "'");
        e.disabled_groups.insert(*g);
      }
    }
  }
  if (j.contains("embeddings") && !j.at("embeddings").is_null())
    e.embeddings = get_as<std::string>(j.at("embeddings"), "embeddings");
  if (j.contains("validation")) {
    const auto& v = j.at("validation");
    json_detail::reject_unknown(v, "validation", {"fraction", "before_oversampling"});
    if (v.contains("fraction")) e.validation.fraction = get_as<double>(v.at("fraction"), "validation.fraction");
    if (v.contains("before_oversampling"))
      e.validation.before_oversampling = get_as<bool>(v.at("before_oversampling"), "validation.before_oversampling");
  }
  if (j.contains("cv")) {
    const auto& c = j.at("cv");
    json_detail::reject_unknown(c, "cv", {"scheme", "k"});
    const auto scheme = c.contains("scheme") ? get_as<std::string>(c.at("scheme"), "cv.scheme") : "loo";
    if (scheme == "loo") e.cv = CvScheme::LeaveOneOut;
    else if (scheme == "kfold") e.cv = CvScheme::KFold;
    else throw ConfigError("cv.scheme", "expected 'loo' or 'kfold'");
    if (c.contains("k")) e.k = get_as<std::size_t>(c.at("k"), "cv.k");
  }
  e.validate();
  return e;
}

inline Experiment load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  return experiment_from_json(j);
}

// ---------------------------------------------------------------------------
// reports

struct PredictionRecord {
  std::string key;
  std::string fold;
  ArgComponent gold = ArgComponent::Claim;
  ArgComponent predicted = ArgComponent::Claim;
  std::array<double, 3> probs{};
  Specificity gold_spec = Specificity::Low;
  std::optional<Specificity> predicted_spec;

  bool correct() const noexcept { return gold == predicted; }
  bool operator==(const PredictionRecord&) const = default;
};

/// Counts of test-fold moves found in any training-derived artifact.
struct LeakageAudit {
  std::size_t checks = 0;
  std::size_t violations = 0;
  std::vector<std::string> offending;  // "<artifact>:<move key>"

  bool operator==(const LeakageAudit&) const = default;
};

struct FoldReport {
  std::string id;
  std::vector<std::string> test_transcripts;
  EvaluationReport metrics;
  ConfusionMatrix confusion{3};
  std::size_t train_moves = 0;        // original training moves
  std::size_t effective_train = 0;    // rows fed to the optimiser
  std::size_t validation_moves = 0;
  std::size_t test_moves = 0;
  std::size_t truncated_sequences = 0;
  History history;
  LeakageAudit leakage;

  bool operator==(const FoldReport&) const = default;
};

struct RuntimeStats {
  double seconds = 0.0;
  std::size_t threads = 1;
};

struct CvReport {
  std::string name;
  nlohmann::ordered_json config;
  std::vector<FoldReport> folds;
  EvaluationReport aggregate;  // fold mean
  EvaluationReport pooled;     // from the summed confusion matrix
  ConfusionMatrix pooled_confusion{3};
  std::vector<PredictionRecord> predictions;  // corpus order
  std::size_t leakage_violations = 0;
  RuntimeStats runtime;  // not serialised into report.json

  /// Per-move correctness in corpus order, for paired tests.
  std::vector<int> correctness() const {
    std::vector<int> c;
    c.reserve(predictions.size());
    for (const auto& p : predictions) c.push_back(p.correct() ? 1 : 0);
    return c;
  }

  std::vector<EvaluationReport> fold_metrics() const {
    std::vector<EvaluationReport> m;
    for (const auto& f : folds) m.push_back(f.metrics);
    return m;
  }
};

inline nlohmann::ordered_json to_json(const FoldReport& f) {
  nlohmann::ordered_json j;
  j["id"] = f.id;
  j["test_transcripts"] = f.test_transcripts;
  j["metrics"] = to_json(f.metrics);
  j["confusion"] = to_json(f.confusion);
  j["train_moves"] = f.train_moves;
  j["effective_train"] = f.effective_train;
  j["validation_moves"] = f.validation_moves;
  j["test_moves"] = f.test_moves;
  j["truncated_sequences"] = f.truncated_sequences;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& e : f.history.epochs) epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  j["history"] = {{"best_epoch", f.history.best_epoch}, {"early_stopped", f.history.early_stopped},
                  {"epochs", epochs}};
  j["leakage"] = {{"checks", f.leakage.checks}, {"violations", f.leakage.violations}};
  return j;
}

/// report.json content. Deterministic: no timings, no thread counts.
inline nlohmann::ordered_json to_json(const CvReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["config"] = r.config;
  j["aggregate"] = to_json(r.aggregate);
  j["pooled"] = to_json(r.pooled);
  j["pooled_confusion"] = to_json(r.pooled_confusion);
  j["class_order"] = {"claim", "evidence", "warrant"};
  j["leakage_violations"] = r.leakage_violations;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  j["folds"] = folds;
  nlohmann::ordered_json preds = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    nlohmann::ordered_json jp;
    jp["move"] = p.key;
    jp["fold"] = p.fold;
    jp["gold"] = to_string(p.gold);
    jp["predicted"] = to_string(p.predicted);
    jp["probs"] = p.probs;
    if (p.predicted_spec) {
      jp["gold_spec"] = to_string(p.gold_spec);
      jp["predicted_spec"] = to_string(*p.predicted_spec);
    }
    preds.push_back(jp);
  }
  j["predictions"] = preds;
  return j;
}

// ---------------------------------------------------------------------------
// running

/// Worker count after applying the ARGMINE_THREADS cap (0 means hardware concurrency).
inline std::size_t effective_threads(std::size_t requested) {
  std::size_t n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* env = std::getenv("ARGMINE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

struct RunOptions {
  std::size_t threads = 1;
  const Embeddings* embeddings = nullptr;  // overrides Experiment::embeddings
  const Lexicons* lexicons = nullptr;      // default lexicons when null
  std::function<void(const std::string&)> on_fold_done;  // called from worker threads, serialised
};

namespace harness_detail {

struct FoldOutput {
  FoldReport report;
  ConfusionMatrix spec_confusion{3};
  std::vector<std::pair<MoveRef, PredictionRecord>> predictions;
};

inline void audit(LeakageAudit& a, const std::string& artifact, const std::set<std::string>& fitted,
                  const std::vector<std::string>& test_keys) {
  for (const auto& k : test_keys) {
    ++a.checks;
    if (fitted.count(k)) {
      ++a.violations;
      a.offending.push_back(artifact + ":" + k);
    }
  }
}

inline FoldOutput run_fold(const Corpus& corpus, const ProcessedCorpus& pc, const Experiment& exp, const Fold& fold,
                           const Embeddings* fixed_embeddings, const Lexicons& lex) {
  const ModelSpec& spec = exp.model;
  const std::uint64_t fold_seed = derive_seed(exp.seed, fold.id);
  FoldOutput out;
  FoldReport& rep = out.report;
  rep.id = fold.id;
  for (auto t : fold.test) rep.test_transcripts.push_back(corpus.transcripts[t].id);

  std::vector<MoveRef> train_refs, test_refs;
  for (auto t : fold.train)
    for (std::size_t m = 0; m < corpus.transcripts[t].moves.size(); ++m) train_refs.push_back({t, m});
  for (auto t : fold.test)
    for (std::size_t m = 0; m < corpus.transcripts[t].moves.size(); ++m) test_refs.push_back({t, m});
  auto move_of = [&](MoveRef r) -> const ArgumentMove& { return corpus.transcripts[r.transcript].moves[r.move]; };
  std::vector<std::string> test_keys;
  for (auto r : test_refs) test_keys.push_back(move_of(r).key());
  std::set<std::string> train_keys;
  for (auto r : train_refs) train_keys.insert(move_of(r).key());
  rep.train_moves = train_refs.size();
  rep.test_moves = test_refs.size();

  // handcrafted features: schema and standardiser see training moves only
  std::optional<FeatureSchema> schema;
  Standardizer standardizer;
  std::vector<FeatureVector> train_fv, test_fv;
  if (spec.has_features()) {
    schema = fit_schema(corpus, pc, train_refs, exp.feature_config(), fold.id);
    for (auto r : train_refs) train_fv.push_back(transform(*schema, corpus, pc, r, lex));
    for (auto r : test_refs) test_fv.push_back(transform(*schema, corpus, pc, r, lex));
    std::vector<const FeatureVector*> rows;
    for (const auto& fv : train_fv) rows.push_back(&fv);
    standardizer = Standardizer::fit(rows, schema->dense_size());
    standardizer.fitted_keys = train_keys;
    audit(rep.leakage, "schema", schema->fitted_keys, test_keys);
    audit(rep.leakage, "standardizer", standardizer.fitted_keys, test_keys);
  }

  // word vectors: a supplied table, or hashed vectors for training-fold tokens only
  std::optional<Embeddings> fold_embeddings;
  const Embeddings* emb = fixed_embeddings;
  if (spec.is_neural() && spec.modality == Modality::Word && emb == nullptr) {
    std::set<std::string> vocab;
    for (auto r : train_refs)
      for (const auto& tok : pc.moves[r.transcript][r.move].tokens) vocab.insert(tok);
    const std::vector<std::string> v(vocab.begin(), vocab.end());
    fold_embeddings = Embeddings::hashed(v, derive_seed(exp.seed, "embeddings"), spec.hp.word_dim);
    emb = &*fold_embeddings;
    audit(rep.leakage, "embedding_vocabulary", train_keys, test_keys);
  }

  auto make_input = [&](MoveRef r, const FeatureVector* fv) {
    ModelInput in;
    if (spec.is_neural()) {
      const auto enc = spec.modality == Modality::Char
                           ? encode_char(move_of(r).text, spec.hp.max_len_char)
                           : encode_word(pc.moves[r.transcript][r.move], *emb, spec.hp.max_len_word);
      if (enc.truncated) ++rep.truncated_sequences;
      in.sequence = valid_prefix(enc);
    }
    if (fv) {
      in.dense = standardizer.apply(fv->dense);
      in.sparse = fv->sparse;
    }
    return in;
  };
  std::vector<ModelInput> train_in, test_in;
  train_in.reserve(train_refs.size());
  for (std::size_t i = 0; i < train_refs.size(); ++i)
    train_in.push_back(make_input(train_refs[i], spec.has_features() ? &train_fv[i] : nullptr));
  for (std::size_t i = 0; i < test_refs.size(); ++i)
    test_in.push_back(make_input(test_refs[i], spec.has_features() ? &test_fv[i] : nullptr));

  std::vector<Example> originals;
  for (std::size_t i = 0; i < train_refs.size(); ++i) {
    const auto& m = move_of(train_refs[i]);
    originals.push_back({&train_in[i], index_of(m.arg_label), index_of(m.spec_label), i});
  }

  const bool balance = exp.oversample && spec.family != Family::Majority;
  auto balanced = [&](std::span<const Example> rows) {
    if (!balance) return std::vector<Example>(rows.begin(), rows.end());
    const auto idx =
        oversample(rows, kNumArgClasses, derive_seed(fold_seed, "oversample"), [](const Example& e) { return e.arg; });
    std::vector<Example> o;
    o.reserve(idx.size());
    for (auto i : idx) o.push_back(rows[i]);
    return o;
  };
  std::vector<Example> fit_rows, val_rows;
  const auto val_seed = derive_seed(fold_seed, "validation");
  if (spec.family == Family::Majority) {
    fit_rows = originals;
  } else if (exp.validation.before_oversampling) {
    auto [tr, va] = carve_validation(originals, exp.validation.fraction, val_seed);
    fit_rows = balanced(tr);
    val_rows = std::move(va);
  } else {
    auto [tr, va] = carve_validation(balanced(originals), exp.validation.fraction, val_seed);
    fit_rows = std::move(tr);
    val_rows = std::move(va);
  }
  std::set<std::string> used_keys;
  for (const auto& e : fit_rows) used_keys.insert(move_of(train_refs[e.group]).key());
  for (const auto& e : val_rows) used_keys.insert(move_of(train_refs[e.group]).key());
  audit(rep.leakage, "training_rows", used_keys, test_keys);
  rep.effective_train = fit_rows.size();
  rep.validation_moves = val_rows.size();

  const std::size_t dense_w = schema ? schema->dense_size() : 0;
  const std::size_t sparse_w = schema ? schema->sparse_size() : 0;
  Model model = build_model(spec, dense_w, sparse_w, derive_seed(fold_seed, "init"));
  rep.history = train(model, fit_rows, val_rows, TrainOptions{derive_seed(fold_seed, "train"), exp.class_weights});

  for (std::size_t i = 0; i < test_refs.size(); ++i) {
    const auto& m = move_of(test_refs[i]);
    const Prediction p = model.predict(test_in[i]);
    PredictionRecord pr;
    pr.key = m.key();
    pr.fold = fold.id;
    pr.gold = m.arg_label;
    pr.predicted = p.arg_label();
    pr.probs = p.arg_probs;
    pr.gold_spec = m.spec_label;
    pr.predicted_spec = p.spec_label();
    rep.confusion.add(index_of(pr.gold), index_of(pr.predicted));
    if (pr.predicted_spec) out.spec_confusion.add(index_of(pr.gold_spec), index_of(*pr.predicted_spec));
    out.predictions.emplace_back(test_refs[i], std::move(pr));
  }
  rep.metrics = evaluate(rep.confusion, spec.multitask ? &out.spec_confusion : nullptr);
  return out;
}

}  // namespace harness_detail

inline std::vector<Fold> make_folds(const Corpus& corpus, const Experiment& exp) {
  return exp.cv == CvScheme::LeaveOneOut ? split_loo(corpus) : split_kfold(corpus, exp.k, exp.seed);
}

/// Full cross-validation run. Folds may run on several threads; results do not
/// depend on the thread count.
inline CvReport run_experiment(const Corpus& corpus, const ProcessedCorpus& pc, const Experiment& exp,
                               const RunOptions& opt = {}) {
  const auto started = std::chrono::steady_clock::now();
  validate(corpus);
  exp.validate();
  if (pc.moves.size() != corpus.transcripts.size()) throw ValidationError("processed corpus does not match corpus");
  const auto folds = make_folds(corpus, exp);

  std::optional<Embeddings> loaded;
  const Embeddings* emb = opt.embeddings;
  if (!emb && exp.embeddings && exp.model.modality == Modality::Word && exp.model.is_neural()) {
    loaded = Embeddings::load(*exp.embeddings, exp.model.hp.word_dim);
    emb = &*loaded;
  }
  if (emb && exp.model.modality == Modality::Word && emb->dim() != exp.model.hp.word_dim)
    throw ConfigError("model.hyperparams.word_dim", "does not match the embedding dimension");
  const Lexicons& lex = opt.lexicons ? *opt.lexicons : Lexicons::defaults();

  std::vector<std::optional<harness_detail::FoldOutput>> outputs(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t f = next.fetch_add(1);
      if (f >= folds.size()) return;
      try {
        outputs[f] = harness_detail::run_fold(corpus, pc, exp, folds[f], emb, lex);
      } catch (...) {
        errors[f] = std::current_exception();
      }
      if (opt.on_fold_done) {
        std::lock_guard lock(progress_mutex);
        opt.on_fold_done(folds[f].id);
      }
    }
  };
  const std::size_t threads = std::min(effective_threads(opt.threads), folds.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const std::exception& e) {
      throw FoldError(folds[f].id, e.what());
    }
  }

  CvReport r;
  r.name = exp.name;
  r.config = to_json(exp);
  ConfusionMatrix spec_pooled(3);
  std::vector<std::pair<MoveRef, PredictionRecord>> preds;
  for (auto& o : outputs) {
    r.pooled_confusion += o->report.confusion;
    spec_pooled += o->spec_confusion;
    r.leakage_violations += o->report.leakage.violations;
    for (auto& p : o->predictions) preds.push_back(std::move(p));
    r.folds.push_back(std::move(o->report));
  }
  std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& p : preds) r.predictions.push_back(std::move(p.second));
  const auto fm = r.fold_metrics();
  r.aggregate = fold_mean(fm);
  r.pooled = evaluate(r.pooled_confusion, exp.model.multitask ? &spec_pooled : nullptr);
  r.runtime.threads = threads;
  r.runtime.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

inline CvReport run_experiment(const Corpus& corpus, const Experiment& exp, const RunOptions& opt = {}) {
  return run_experiment(corpus, preprocess(corpus), exp, opt);
}

/// Reference run plus one run per removed feature group, keyed "reference" and
/// "-<group>".
inline std::map<std::string, CvReport> run_ablation(const Corpus& corpus, const ProcessedCorpus& pc,
                                                    const Experiment& exp, std::span<const std::string> groups,
                                                    const RunOptions& opt = {}) {
  if (!exp.model.has_features()) throw ConfigError("model.features", "ablation needs at least one feature set");
  std::vector<FeatureGroup> parsed;
  for (const auto& g : groups) {
    const auto fg = parse_feature_group(g);
    if (!fg) throw ConfigError("groups", "unknown feature group '" + g + "'");
    parsed.push_back(*fg);
  }
  std::map<std::string, CvReport> out;
  out.emplace("reference", run_experiment(corpus, pc, exp, opt));
  for (auto g : parsed) {
    Experiment e = exp;
    e.disabled_groups.insert(g);
    e.name = exp.name + " -" + std::string(to_string(g));
    out.emplace("-" + std::string(to_string(g)), run_experiment(corpus, pc, e, opt));
  }
  return out;
}

inline std::vector<std::string> all_feature_group_names() {
  std::vector<std::string> v;
  for (auto g : kFeatureGroups) v.emplace_back(to_string(g));
  return v;
}

}  // namespace argmine
