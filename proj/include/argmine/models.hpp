#pragma once

// Model zoo: majority baseline, multinomial logistic regression, and char/word
// CNN and LSTM encoders with optional handcrafted-feature concatenation and an
// optional second (specificity) softmax head.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/feature_types.hpp"
#include "argmine/rng.hpp"
#include "argmine/tensor.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

enum class Family { Majority, LogReg, CNN, LSTM };
enum class Modality { None, Char, Word };

constexpr std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::Majority: return "majority";
    case Family::LogReg: return "logreg";
    case Family::CNN: return "cnn";
    case Family::LSTM: return "lstm";
  }
  return "?";
}

constexpr std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::None: return "none";
    case Modality::Char: return "char";
    case Modality::Word: return "word";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view s) noexcept {
  for (auto f : {Family::Majority, Family::LogReg, Family::CNN, Family::LSTM})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline std::optional<Modality> parse_modality(std::string_view s) noexcept {
  for (auto m : {Modality::None, Modality::Char, Modality::Word})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline constexpr std::size_t kWordDim = 50;

struct Hyperparams {
  std::size_t hidden = 75;
  std::size_t char_dim = kCharAlphabetSize;
  std::size_t word_dim = kWordDim;
  std::size_t conv_layers = 3;
  std::size_t filters = 64;
  std::vector<std::size_t> kernel_widths;  // empty: 5 per layer for char, 3 for word
  std::size_t fc_width = 128;
  double dropout = 0.5;
  std::size_t max_len_char = 500;
  std::size_t max_len_word = 100;
  std::optional<double> lr;  // default 1e-3 for networks, 1e-2 for logistic regression
  std::size_t batch = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double l2 = 1e-4;              // logistic regression only
  std::size_t projection_width = 64;
  double clip_norm = 5.0;        // LSTM only; <= 0 disables
};

struct ModelSpec {
  Family family = Family::Majority;
  Modality modality = Modality::None;
  bool wlda = false;
  bool dialogue = false;
  bool multitask = false;
  Hyperparams hp;

  bool has_features() const noexcept { return wlda || dialogue; }
  bool is_neural() const noexcept { return family == Family::CNN || family == Family::LSTM; }

  std::vector<std::size_t> kernel_widths() const {
    if (!hp.kernel_widths.empty()) return hp.kernel_widths;
    return std::vector<std::size_t>(hp.conv_layers, modality == Modality::Char ? 5 : 3);
  }

  std::size_t input_dim() const noexcept { return modality == Modality::Char ? hp.char_dim : hp.word_dim; }
  std::size_t max_len() const noexcept { return modality == Modality::Char ? hp.max_len_char : hp.max_len_word; }

  double learning_rate() const noexcept {
    if (hp.lr) return *hp.lr;
    return family == Family::LogReg ? 1e-2 : 1e-3;
  }

  /// Short human label, e.g. "cnn-word+wlda+dialogue [mt]".
  std::string label() const {
    std::string s(to_string(family));
    if (modality != Modality::None) s += "-" + std::string(to_string(modality));
    if (wlda) s += "+wlda";
    if (dialogue) s += "+dialogue";
    if (multitask) s += " [mt]";
    return s;
  }

  void validate() const {
    switch (family) {
      case Family::Majority:
        if (has_features() || modality != Modality::None)
          throw ConfigError("model", "majority baseline takes no features and no modality");
        break;
      case Family::LogReg:
        if (modality != Modality::None) throw ConfigError("model.modality", "logistic regression has no modality");
        if (!has_features()) throw ConfigError("model.features", "logistic regression needs at least one feature set");
        break;
      case Family::CNN:
      case Family::LSTM:
        if (modality == Modality::None) throw ConfigError("model.modality", "networks need char or word input");
        break;
    }
    if (multitask && !is_neural()) throw ConfigError("model.multitask", "multi-task needs a CNN or LSTM");
    if (hp.char_dim != kCharAlphabetSize) throw ConfigError("model.hyperparams.char_dim", "must be 37");
    if (hp.word_dim == 0) throw ConfigError("model.hyperparams.word_dim", "must be positive");
    if (hp.hidden == 0) throw ConfigError("model.hyperparams.hidden", "must be positive");
    if (hp.filters == 0) throw ConfigError("model.hyperparams.filters", "must be positive");
    if (hp.conv_layers == 0) throw ConfigError("model.hyperparams.conv_layers", "must be positive");
    if (!hp.kernel_widths.empty() && hp.kernel_widths.size() != hp.conv_layers)
      throw ConfigError("model.hyperparams.kernel_widths", "needs one width per conv layer");
    for (auto w : hp.kernel_widths)
      if (w == 0) throw ConfigError("model.hyperparams.kernel_widths", "widths must be positive");
    if (hp.fc_width == 0) throw ConfigError("model.hyperparams.fc_width", "must be positive");
    if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) throw ConfigError("model.hyperparams.dropout", "must lie in [0, 1)");
    if (hp.max_len_char == 0 || hp.max_len_word == 0) throw ConfigError("model.hyperparams.max_len", "must be positive");
    if (hp.lr && !(*hp.lr > 0.0)) throw ConfigError("model.hyperparams.lr", "must be positive");
    if (hp.batch == 0) throw ConfigError("model.hyperparams.batch", "must be positive");
    if (hp.max_epochs == 0) throw ConfigError("model.hyperparams.max_epochs", "must be positive");
    if (!(hp.l2 >= 0.0)) throw ConfigError("model.hyperparams.l2", "must be non-negative");
    if (hp.projection_width == 0) throw ConfigError("model.hyperparams.projection_width", "must be positive");
  }
};

// ---------------------------------------------------------------------------
// spec JSON

inline nlohmann::json to_json(const Hyperparams& hp) {
  nlohmann::json j{{"hidden", hp.hidden},
                   {"char_dim", hp.char_dim},
                   {"word_dim", hp.word_dim},
                   {"conv_layers", hp.conv_layers},
                   {"filters", hp.filters},
                   {"kernel_widths", hp.kernel_widths},
                   {"fc_width", hp.fc_width},
                   {"dropout", hp.dropout},
                   {"max_len_char", hp.max_len_char},
                   {"max_len_word", hp.max_len_word},
                   {"batch", hp.batch},
                   {"max_epochs", hp.max_epochs},
                   {"patience", hp.patience},
                   {"l2", hp.l2},
                   {"projection_width", hp.projection_width},
                   {"clip_norm", hp.clip_norm}};
  j["lr"] = hp.lr ? nlohmann::json(*hp.lr) : nlohmann::json(nullptr);
  return j;
}

namespace json_detail {

template <class T>
T get_as(const nlohmann::json& j, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ConfigError(path, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError(path, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(path, "expected a string");
    }
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError(path.empty() ? k : path + "." + k, "unknown field");
  }
}

}  // namespace json_detail

/// Overlay hyperparameters from JSON onto `hp`; unknown keys are errors.
inline void apply_hyperparams(Hyperparams& hp, const nlohmann::json& j, const std::string& path) {
  using json_detail::get_as;
  json_detail::reject_unknown(j, path,
                              {"hidden", "char_dim", "word_dim", "conv_layers", "filters", "kernel_widths", "fc_width",
                               "dropout", "max_len_char", "max_len_word", "lr", "batch", "max_epochs", "patience", "l2",
                               "projection_width", "clip_norm"});
  auto sz = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = get_as<std::size_t>(j.at(key), path + "." + key);
  };
  auto real = [&](const char* key, double& out) {
    if (j.contains(key)) out = get_as<double>(j.at(key), path + "." + key);
  };
  sz("hidden", hp.hidden);
  sz("char_dim", hp.char_dim);
  sz("word_dim", hp.word_dim);
  sz("conv_layers", hp.conv_layers);
  sz("filters", hp.filters);
  sz("fc_width", hp.fc_width);
  sz("max_len_char", hp.max_len_char);
  sz("max_len_word", hp.max_len_word);
  sz("batch", hp.batch);
  sz("max_epochs", hp.max_epochs);
  sz("patience", hp.patience);
  sz("projection_width", hp.projection_width);
  real("dropout", hp.dropout);
  real("l2", hp.l2);
  real("clip_norm", hp.clip_norm);
  if (j.contains("lr")) {
    if (j.at("lr").is_null()) hp.lr.reset();
    else hp.lr = get_as<double>(j.at("lr"), path + ".lr");
  }
  if (j.contains("kernel_widths")) {
    const auto& kw = j.at("kernel_widths");
    if (!kw.is_array()) throw ConfigError(path + ".kernel_widths", "expected an array");
    hp.kernel_widths.clear();
    for (std::size_t i = 0; i < kw.size(); ++i)
      hp.kernel_widths.push_back(get_as<std::size_t>(kw[i], path + ".kernel_widths[" + std::to_string(i) + "]"));
  }
}

inline nlohmann::json to_json(const ModelSpec& s) {
  nlohmann::json features = nlohmann::json::array();
  if (s.wlda) features.push_back("wlda");
  if (s.dialogue) features.push_back("dialogue");
  return {{"family", to_string(s.family)},
          {"modality", to_string(s.modality)},
          {"features", features},
          {"multitask", s.multitask},
          {"hyperparams", to_json(s.hp)}};
}

/// Parse and validate a model spec; errors carry the JSON field path.
inline ModelSpec model_spec_from_json(const nlohmann::json& j, const std::string& path = "model") {
  using json_detail::get_as;
  json_detail::reject_unknown(j, path, {"family", "modality", "features", "multitask", "hyperparams"});
  ModelSpec s;
  if (!j.contains("family")) throw ConfigError(path + ".family", "missing");
  const auto fam = get_as<std::string>(j.at("family"), path + ".family");
  const auto f = parse_family(fam);
  if (!f) throw ConfigError(path + ".family", "unknown family '" + fam + "'");
  s.family = *f;
  if (j.contains("modality")) {
    const auto mod = get_as<std::string>(j.at("modality"), path + ".modality");
    const auto m = parse_modality(mod);
    if (!m) throw ConfigError(path + ".modality", "unknown modality '" + mod + "'");
    s.modality = *m;
  }
  if (j.contains("features")) {
    const auto& fs = j.at("features");
    if (!fs.is_array()) throw ConfigError(path + ".features", "expected an array");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto p = path + ".features[" + std::to_string(i) + "]";
      const auto name = get_as<std::string>(fs[i], p);
      if (name == "wlda") s.wlda = true;
      else if (name == "dialogue") s.dialogue = true;
      else throw ConfigError(p, "unknown feature set '" + name + "'");
    }
  }
  if (j.contains("multitask")) s.multitask = get_as<bool>(j.at("multitask"), path + ".multitask");
  if (j.contains("hyperparams")) apply_hyperparams(s.hp, j.at("hyperparams"), path + ".hyperparams");
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path == "model" ? e.path() : path + e.path().substr(5), e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// encoders

/// Padded sequence tensor plus the number of valid (unpadded) rows.
struct EncodedSequence {
  Tensor matrix;           // [max_len x width]
  std::size_t length = 0;  // valid rows; rows >= length are zero padding
  bool truncated = false;
};

/// One-hot rows over the 37-symbol alphabet; characters outside it are dropped.
inline EncodedSequence encode_char(std::string_view text, std::size_t max_len) {
  const auto idx = normalize_chars(text);
  EncodedSequence e{Tensor({max_len, kCharAlphabetSize}), std::min(idx.size(), max_len), idx.size() > max_len};
  for (std::size_t t = 0; t < e.length; ++t) e.matrix(t, idx[t]) = 1.0;
  return e;
}

/// Frozen word vectors, "token v1 ... vD" per line.
class Embeddings {
 public:
  explicit Embeddings(std::size_t dim = kWordDim) : dim_(dim) {
    if (dim == 0) throw ValidationError("embeddings: dimension must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return table_.size(); }

  void set(std::string token, std::vector<double> vec) {
    if (vec.size() != dim_) throw ShapeError("embeddings: vector for '" + token + "' has wrong dimension");
    table_[std::move(token)] = std::move(vec);
  }

  /// Row for a token, or nullptr when out of vocabulary.
  const std::vector<double>* find(std::string_view token) const {
    auto it = table_.find(std::string(token));
    return it == table_.end() ? nullptr : &it->second;
  }

  static Embeddings read(std::istream& in, const std::string& source = "<stream>", std::size_t dim = kWordDim) {
    Embeddings e(dim);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<double> v;
      std::string field;
      while (ss >> field) {
        char* end = nullptr;
        const double x = std::strtod(field.c_str(), &end);
        if (end != field.c_str() + field.size() || !std::isfinite(x))
          throw ParseError(source, lineno, "bad number '" + field + "'");
        v.push_back(x);
      }
      if (v.size() != dim)
        throw ParseError(source, lineno,
                         "expected " + std::to_string(dim) + " values, found " + std::to_string(v.size()));
      e.table_[token] = std::move(v);
    }
    return e;
  }

  static Embeddings load(const std::string& path, std::size_t dim = kWordDim) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read(in, path, dim);
  }

  /// Tokens in lexicographic order, values with 17 significant digits.
  void write(std::ostream& out) const {
    std::vector<const std::string*> keys;
    for (const auto& [k, v] : table_) keys.push_back(&k);
    std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
    char buf[32];
    for (const auto* k : keys) {
      out << *k;
      for (double x : table_.at(*k)) {
        std::snprintf(buf, sizeof buf, " %.17g", x);
        out << buf;
      }
      out << '\n';
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    write(out);
  }

  /// Deterministic pseudo-embeddings: each token gets N(0, 0.4^2) entries seeded by
  /// its own hash, so a token's vector does not depend on which other tokens exist.
  static Embeddings hashed(std::span<const std::string> vocabulary, std::uint64_t seed = 0,
                           std::size_t dim = kWordDim) {
    Embeddings e(dim);
    for (const auto& tok : vocabulary) e.table_[tok] = hashed_vector(tok, seed, dim);
    return e;
  }

  static std::vector<double> hashed_vector(std::string_view token, std::uint64_t seed, std::size_t dim) {
    Rng rng(derive_seed(seed, token));
    std::vector<double> v(dim);
    for (auto& x : v) x = 0.4 * rng.normal();
    return v;
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Embedding rows for the move's tokens; OOV tokens give zero rows.
inline EncodedSequence encode_word(std::span<const std::string> tokens, const Embeddings& emb, std::size_t max_len) {
  EncodedSequence e{Tensor({max_len, emb.dim()}), std::min(tokens.size(), max_len), tokens.size() > max_len};
  for (std::size_t t = 0; t < e.length; ++t) {
    if (const auto* v = emb.find(tokens[t])) std::copy(v->begin(), v->end(), &e.matrix(t, 0));
  }
  return e;
}

inline EncodedSequence encode_word(const TokenizedMove& move, const Embeddings& emb, std::size_t max_len) {
  return encode_word(std::span<const std::string>(move.tokens), emb, max_len);
}

/// The valid prefix of an encoding, at least one row (an empty move becomes one zero row).
inline Tensor valid_prefix(const EncodedSequence& e) {
  const std::size_t width = e.matrix.dim(1);
  const std::size_t n = std::max<std::size_t>(1, e.length);
  std::vector<double> data(e.matrix.values().begin(),
                           e.matrix.values().begin() + static_cast<std::ptrdiff_t>(n * width));
  return Tensor({n, width}, std::move(data));
}

// ---------------------------------------------------------------------------
// model

/// Everything a model may consume for one move.
struct ModelInput {
  Tensor sequence;             // [len x input_dim], networks only
  std::vector<double> dense;   // standardised handcrafted features
  SparseVector sparse;         // tf-idf and POS n-gram blocks
};

struct Prediction {
  std::array<double, 3> arg_probs{};
  std::optional<std::array<double, 3>> spec_probs;

  static std::size_t argmax(const std::array<double, 3>& p) noexcept {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (p[k] > p[best]) best = k;
    return best;
  }

  ArgComponent arg_label() const noexcept { return kArgComponents[argmax(arg_probs)]; }
  std::optional<Specificity> spec_label() const noexcept {
    if (!spec_probs) return std::nullopt;
    return kSpecificities[argmax(*spec_probs)];
  }
};

struct Logits {
  Tensor arg;   // [1 x 3]
  Tensor spec;  // [1 x 3], empty unless multitask
};

struct LossBreakdown {
  double arg = 0.0;
  double spec = 0.0;
  double total = 0.0;
};

/// Multi-task objective: the plain sum of both cross-entropies.
constexpr double multitask_loss(double ce_arg, double ce_spec) noexcept { return ce_arg + ce_spec; }

struct HeadMask {
  bool arg = true;
  bool spec = true;
};

class Model {
 public:
  /// Per-sample activations kept for the backward pass.
  struct Cache {
    std::vector<Conv1dMaxPool::Cache> conv;
    GlobalMaxPool::Cache pool;
    Dense::Cache fc;
    Tensor fc_out;                // after ReLU, before dropout
    Lstm::Cache lstm;
    std::vector<double> drop_mask;
    std::size_t rep_width = 0;
    Dense::Cache arg_head, spec_head;
    const ModelInput* input = nullptr;
  };

  Model() = default;

  /// `dense_width` / `sparse_width` are the handcrafted-feature widths (0 when unused).
  Model(ModelSpec spec, std::size_t dense_width, std::size_t sparse_width)
      : spec_(std::move(spec)), dense_width_(dense_width), sparse_width_(sparse_width) {
    spec_.validate();
    if (!spec_.has_features()) dense_width_ = sparse_width_ = 0;
    const auto& hp = spec_.hp;
    switch (spec_.family) {
      case Family::Majority: break;
      case Family::LogReg:
        if (dense_width_ + sparse_width_ == 0) throw ShapeError("logreg: zero-width feature vector");
        arg_head_ = Dense(dense_width_ + sparse_width_, 3, "logreg");
        break;
      case Family::CNN: {
        const auto widths = spec_.kernel_widths();
        std::size_t channels = spec_.input_dim();
        for (std::size_t l = 0; l < widths.size(); ++l) {
          convs_.emplace_back(channels, hp.filters, widths[l], "conv" + std::to_string(l + 1));
          channels = hp.filters;
        }
        fc_ = Dense(hp.filters, hp.fc_width, "fc");
        break;
      }
      case Family::LSTM: lstm_ = Lstm(spec_.input_dim(), hp.hidden, "lstm"); break;
    }
    if (spec_.is_neural()) {
      if (sparse_width_ > 0) projection_ = Dense(sparse_width_, hp.projection_width, "projection", false);
      arg_head_ = Dense(head_width(), 3, "arg_head");
      if (spec_.multitask) spec_head_ = Dense(head_width(), 3, "spec_head");
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t dense_width() const noexcept { return dense_width_; }
  std::size_t sparse_width() const noexcept { return sparse_width_; }
  bool has_spec_head() const noexcept { return spec_.multitask; }

  /// Width of the network representation (before feature concatenation).
  std::size_t representation_width() const noexcept {
    if (spec_.family == Family::CNN) return spec_.hp.fc_width;
    if (spec_.family == Family::LSTM) return spec_.hp.hidden;
    return 0;
  }

  /// Width of the vector the softmax heads see.
  std::size_t head_width() const noexcept {
    if (spec_.family == Family::LogReg) return dense_width_ + sparse_width_;
    return representation_width() + dense_width_ + (sparse_width_ > 0 ? spec_.hp.projection_width : 0);
  }

  std::vector<Conv1dMaxPool>& convs() noexcept { return convs_; }
  Dense& fc() noexcept { return fc_; }
  Lstm& lstm() noexcept { return lstm_; }
  Dense& projection() noexcept { return projection_; }
  Dense& arg_head() noexcept { return arg_head_; }
  Dense& spec_head() noexcept { return spec_head_; }

  ParameterList parameters() {
    ParameterList ps;
    auto add = [&](ParameterList more) { ps.insert(ps.end(), more.begin(), more.end()); };
    switch (spec_.family) {
      case Family::Majority: return ps;
      case Family::LogReg: return arg_head_.parameters();
      case Family::CNN:
        for (auto& c : convs_) add(c.parameters());
        add(fc_.parameters());
        break;
      case Family::LSTM: add(lstm_.parameters()); break;
    }
    if (sparse_width_ > 0) add(projection_.parameters());
    add(arg_head_.parameters());
    if (spec_.multitask) add(spec_head_.parameters());
    return ps;
  }

  /// Parameters shared by both heads (everything below the softmax layers).
  ParameterList shared_parameters() {
    ParameterList ps = parameters();
    std::erase_if(ps, [&](Parameter* p) { return p->name.starts_with("arg_head") || p->name.starts_with("spec_head"); });
    return ps;
  }

  std::size_t parameter_count() {
    const auto ps = parameters();
    return argmine::parameter_count(ps);
  }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& c : convs_) c.init(rng);
    if (spec_.family == Family::CNN) fc_.init(rng);
    if (spec_.family == Family::LSTM) lstm_.init(rng);
    if (sparse_width_ > 0 && spec_.is_neural()) projection_.init(rng);
    if (spec_.family == Family::LogReg) {
      arg_head_.W.value.fill(0.0);
      arg_head_.b.value.fill(0.0);
    } else if (spec_.family != Family::Majority) {
      arg_head_.init(rng);
      if (spec_.multitask) spec_head_.init(rng);
    }
  }

  /// Majority baseline: remember the most frequent label (ties go to enum order).
  void fit_majority(std::span<const std::size_t> arg_labels) {
    std::array<std::size_t, 3> counts{};
    for (auto y : arg_labels) ++counts.at(y);
    majority_ = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  std::size_t majority_class() const noexcept { return majority_; }

  /// Forward pass. With a cache the activations are kept for backward(); with a
  /// dropout RNG, dropout is applied (training mode).
  Logits forward(const ModelInput& in, Cache* cache = nullptr, Rng* dropout_rng = nullptr) const {
    Logits out;
    if (spec_.family == Family::Majority) {
      out.arg = Tensor({1, 3});
      out.arg[majority_] = 1.0;
      return out;
    }
    if (spec_.family == Family::LogReg) {
      check_features(in);
      out.arg = sparse_linear(arg_head_, in.dense, in.sparse);
      if (cache) cache->input = &in;
      return out;
    }
    // network representation
    Tensor rep;
    if (in.sequence.rank() != 2 || in.sequence.dim(1) != spec_.input_dim() || in.sequence.dim(0) == 0)
      throw ShapeError("model: sequence input must be [len x " + std::to_string(spec_.input_dim()) + "]");
    if (spec_.family == Family::CNN) {
      const Tensor* x = &in.sequence;
      Tensor h;
      if (cache) cache->conv.assign(convs_.size(), {});
      for (std::size_t l = 0; l < convs_.size(); ++l) {
        h = convs_[l].forward(*x, cache ? &cache->conv[l] : nullptr);
        x = &h;
      }
      Tensor pooled = GlobalMaxPool::forward(h, cache ? &cache->pool : nullptr);
      rep = relu(fc_.forward(pooled, cache ? &cache->fc : nullptr));
      if (cache) cache->fc_out = rep;
    } else {
      rep = lstm_.forward(in.sequence, cache ? &cache->lstm : nullptr);
    }
    if (dropout_rng && spec_.hp.dropout > 0.0) {
      std::vector<double> mask;
      rep = dropout(rep, spec_.hp.dropout, *dropout_rng, mask);
      if (cache) cache->drop_mask = std::move(mask);
    } else if (cache) {
      cache->drop_mask.assign(rep.size(), 1.0);
    }
    // concatenate handcrafted features
    Tensor head_in({1, head_width()});
    std::copy(rep.values().begin(), rep.values().end(), head_in.data());
    std::size_t off = rep.size();
    if (dense_width_ > 0 || sparse_width_ > 0) {
      check_features(in);
      std::copy(in.dense.begin(), in.dense.end(), head_in.data() + off);
      off += dense_width_;
      if (sparse_width_ > 0) {
        const Tensor proj = sparse_linear(projection_, {}, in.sparse);
        std::copy(proj.values().begin(), proj.values().end(), head_in.data() + off);
      }
    }
    if (cache) {
      cache->rep_width = rep.size();
      cache->input = &in;
    }
    out.arg = arg_head_.forward(head_in, cache ? &cache->arg_head : nullptr);
    if (spec_.multitask) out.spec = spec_head_.forward(head_in, cache ? &cache->spec_head : nullptr);
    return out;
  }

  /// Backward from logit gradients (empty `d_spec` when there is no spec head).
  void backward(const Cache& cache, const Tensor& d_arg, const Tensor* d_spec = nullptr) {
    if (spec_.family == Family::Majority) return;
    if (spec_.family == Family::LogReg) {
      sparse_linear_backward(arg_head_, cache.input->dense, cache.input->sparse, d_arg);
      return;
    }
    Tensor d_head = arg_head_.backward(cache.arg_head, d_arg);
    if (d_spec && spec_.multitask) {
      const Tensor ds = spec_head_.backward(cache.spec_head, *d_spec);
      for (std::size_t i = 0; i < d_head.size(); ++i) d_head[i] += ds[i];
    }
    if (sparse_width_ > 0) {
      const std::size_t off = cache.rep_width + dense_width_;
      Tensor d_proj({1, spec_.hp.projection_width});
      std::copy_n(d_head.data() + off, d_proj.size(), d_proj.data());
      sparse_linear_backward(projection_, {}, cache.input->sparse, d_proj);
    }
    Tensor d_rep({1, cache.rep_width});
    for (std::size_t i = 0; i < cache.rep_width; ++i) d_rep[i] = d_head[i] * cache.drop_mask[i];
    if (spec_.family == Family::CNN) {
      const Tensor d_fc = relu_backward(cache.fc_out, d_rep);
      Tensor d = GlobalMaxPool::backward(cache.pool, fc_.backward(cache.fc, d_fc));
      for (std::size_t l = convs_.size(); l-- > 0;) d = convs_[l].backward(cache.conv[l], d, l > 0);
    } else {
      lstm_.backward(cache.lstm, d_rep, false);
    }
  }

  /// Loss of one example in inference mode (no dropout, no gradients).
  LossBreakdown loss(const ModelInput& in, std::size_t arg, std::size_t spec) const {
    const Logits lg = forward(in);
    LossBreakdown l;
    l.arg = softmax_ce(lg.arg, one_hot(std::array{arg}, 3)).loss;
    if (spec_.multitask) l.spec = softmax_ce(lg.spec, one_hot(std::array{spec}, 3)).loss;
    l.total = multitask_loss(l.arg, l.spec);
    return l;
  }

  /// Forward + backward for one example, gradients scaled by `scale` (1/B in a batch).
  LossBreakdown accumulate(const ModelInput& in, std::size_t arg, std::size_t spec, double scale,
                           Rng* dropout_rng = nullptr, HeadMask heads = {},
                           std::span<const double> class_weights = {}) {
    Cache cache;
    const Logits lg = forward(in, &cache, dropout_rng);
    LossBreakdown l;
    const auto ce_arg = softmax_ce(lg.arg, one_hot(std::array{arg}, 3), class_weights);
    l.arg = ce_arg.loss;
    Tensor d_arg = ce_arg.grad;
    for (auto& g : d_arg.values()) g *= heads.arg ? scale : 0.0;
    Tensor d_spec;
    if (spec_.multitask) {
      const auto ce_spec = softmax_ce(lg.spec, one_hot(std::array{spec}, 3));
      l.spec = ce_spec.loss;
      d_spec = ce_spec.grad;
      for (auto& g : d_spec.values()) g *= heads.spec ? scale : 0.0;
    }
    l.total = multitask_loss(l.arg, l.spec);
    backward(cache, d_arg, spec_.multitask ? &d_spec : nullptr);
    return l;
  }

  Prediction predict(const ModelInput& in) const {
    const Logits lg = forward(in);
    Prediction p;
    const auto a = softmax(lg.arg.row(0));
    std::copy(a.begin(), a.end(), p.arg_probs.begin());
    if (spec_.multitask) {
      const auto s = softmax(lg.spec.row(0));
      p.spec_probs.emplace();
      std::copy(s.begin(), s.end(), p.spec_probs->begin());
    }
    return p;
  }

  /// Checkpoint with the spec and widths as config.
  Checkpoint to_checkpoint() {
    Checkpoint ck;
    ck.config = {{"format", "argmine-model"},
                 {"spec", to_json(spec_)},
                 {"dense_width", dense_width_},
                 {"sparse_width", sparse_width_},
                 {"majority", majority_}};
    for (auto* p : parameters()) ck.tensors.emplace_back(p->name, p->value);
    return ck;
  }

  static Model from_checkpoint(const Checkpoint& ck) {
    try {
      if (ck.config.value("format", "") != "argmine-model") throw ParseError("checkpoint: not a model checkpoint");
      Model m(model_spec_from_json(ck.config.at("spec")), ck.config.at("dense_width").get<std::size_t>(),
              ck.config.at("sparse_width").get<std::size_t>());
      m.majority_ = ck.config.at("majority").get<std::size_t>();
      if (m.majority_ >= 3) throw ParseError("checkpoint: bad majority class");
      for (auto* p : m.parameters()) {
        const Tensor* t = ck.find(p->name);
        if (!t) throw ParseError("checkpoint: missing tensor '" + p->name + "'");
        if (t->shape() != p->value.shape()) throw ParseError("checkpoint: tensor '" + p->name + "' has wrong shape");
        p->value = *t;
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("checkpoint: ") + e.what());
    }
  }

  std::vector<Tensor> snapshot() {
    std::vector<Tensor> s;
    for (auto* p : parameters()) s.push_back(p->value);
    return s;
  }

  void restore(const std::vector<Tensor>& s) {
    auto ps = parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.at(i);
  }

 private:
  void check_features(const ModelInput& in) const {
    if (in.dense.size() != dense_width_)
      throw ShapeError("model: dense features have width " + std::to_string(in.dense.size()) + ", expected " +
                       std::to_string(dense_width_));
    for (const auto& e : in.sparse)
      if (e.index >= sparse_width_) throw ShapeError("model: sparse index out of range");
  }

  /// [dense | sparse] x W + b for a layer whose first rows see `dense`.
  static Tensor sparse_linear(const Dense& layer, std::span<const double> dense, const SparseVector& sparse) {
    const std::size_t O = layer.out();
    Tensor y({1, O});
    if (layer.has_bias()) std::copy_n(layer.b.value.data(), O, y.data());
    const double* W = layer.W.value.data();
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] == 0.0) continue;
      for (std::size_t o = 0; o < O; ++o) y[o] += dense[i] * W[i * O + o];
    }
    const std::size_t base = dense.size();
    for (const auto& e : sparse)
      for (std::size_t o = 0; o < O; ++o) y[o] += e.value * W[(base + e.index) * O + o];
    y.check_finite("sparse linear");
    return y;
  }

  static void sparse_linear_backward(Dense& layer, std::span<const double> dense, const SparseVector& sparse,
                                     const Tensor& dy) {
    const std::size_t O = layer.out();
    if (layer.has_bias())
      for (std::size_t o = 0; o < O; ++o) layer.b.grad[o] += dy[o];
    double* G = layer.W.grad.data();
    for (std::size_t i = 0; i < dense.size(); ++i)
      for (std::size_t o = 0; o < O; ++o) G[i * O + o] += dense[i] * dy[o];
    const std::size_t base = dense.size();
    for (const auto& e : sparse)
      for (std::size_t o = 0; o < O; ++o) G[(base + e.index) * O + o] += e.value * dy[o];
  }

  ModelSpec spec_;
  std::size_t dense_width_ = 0;
  std::size_t sparse_width_ = 0;
  std::vector<Conv1dMaxPool> convs_;
  Dense fc_;
  Lstm lstm_;
  Dense projection_;
  Dense arg_head_;
  Dense spec_head_;
  std::size_t majority_ = 0;
};

inline Model build_model(const ModelSpec& spec, std::size_t dense_width = 0, std::size_t sparse_width = 0,
                         std::uint64_t seed = 0) {
  Model m(spec, dense_width, sparse_width);
  m.init(seed);
  return m;
}

// ---------------------------------------------------------------------------
// training

/// One training row. `group` identifies the original move, so oversampled
/// copies share a group and never straddle the train/validation boundary.
struct Example {
  const ModelInput* input = nullptr;
  std::size_t arg = 0;
  std::size_t spec = 0;
  std::size_t group = 0;
};

struct TrainOptions {
  std::uint64_t seed = 0;
  std::optional<std::array<double, 3>> class_weights;
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when nothing was trained
  bool early_stopped = false;

  bool operator==(const History&) const = default;
};

/// Stratified hold-out by argument label over groups: about `fraction` of each
/// class's groups (never all of them) go to validation.
inline std::pair<std::vector<Example>, std::vector<Example>> carve_validation(std::span<const Example> examples,
                                                                               double fraction,
                                                                               std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> groups_by_class;
  std::unordered_map<std::size_t, std::size_t> group_class;
  for (const auto& e : examples) {
    if (group_class.emplace(e.group, e.arg).second) groups_by_class[e.arg].push_back(e.group);
  }
  Rng rng(seed);
  std::unordered_map<std::size_t, bool> in_val;
  for (auto& gs : groups_by_class) {
    std::sort(gs.begin(), gs.end());
    rng.shuffle(std::span<std::size_t>(gs));
    auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(gs.size()) + 0.5));
    if (gs.size() <= 1) n = 0;
    n = std::min(n, gs.size() - (gs.empty() ? 0 : 1));
    for (std::size_t i = 0; i < n; ++i) in_val[gs[i]] = true;
  }
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (const auto& e : examples) (in_val.count(e.group) ? out.second : out.first).push_back(e);
  return out;
}

inline double mean_loss(const Model& model, std::span<const Example> rows) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += model.loss(*r.input, r.arg, r.spec).total;
  return s / static_cast<double>(rows.size());
}

/// Mini-batch Adam with early stopping on validation loss. The best-epoch
/// weights are restored at the end. Without a validation set the training loss
/// is monitored instead.
inline History train(Model& model, std::span<const Example> train_rows, std::span<const Example> val_rows,
                     const TrainOptions& opt = {}) {
  if (train_rows.empty()) throw ValidationError("train: empty training set");
  History hist;
  const auto& spec = model.spec();
  if (spec.family == Family::Majority) {
    std::vector<std::size_t> labels;
    for (const auto& r : train_rows) labels.push_back(r.arg);
    for (const auto& r : val_rows) labels.push_back(r.arg);
    model.fit_majority(labels);
    return hist;
  }
  const auto& hp = spec.hp;
  ParameterList params = model.parameters();
  Adam adam(AdamConfig{spec.learning_rate()});
  Rng rng(derive_seed(opt.seed, "train"));
  std::vector<double> weights;
  if (opt.class_weights) weights.assign(opt.class_weights->begin(), opt.class_weights->end());
  const bool logreg = spec.family == Family::LogReg;
  Dense* l2_layer = logreg ? &model.arg_head() : nullptr;

  std::vector<std::size_t> order(train_rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights = model.snapshot();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch) {
      const std::size_t end = std::min(order.size(), start + hp.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        const auto& r = train_rows[order[k]];
        const auto l = model.accumulate(*r.input, r.arg, r.spec, scale, &rng, {}, weights);
        if (!std::isfinite(l.total)) throw TrainingDiverged(epoch, "non-finite training loss");
        epoch_loss += l.total;
      }
      if (l2_layer && hp.l2 > 0.0) {
        auto& W = l2_layer->W;
        for (std::size_t i = 0; i < W.size(); ++i) W.grad[i] += hp.l2 * W.value[i];
      }
      if (spec.family == Family::LSTM && hp.clip_norm > 0.0) clip_grad_norm(params, hp.clip_norm);
      try {
        adam.step(params);
      } catch (const NumericError& e) {
        throw TrainingDiverged(epoch, e.what());
      }
    }
    EpochRecord rec;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.val_loss = val_rows.empty() ? rec.train_loss : mean_loss(model, val_rows);
    if (!std::isfinite(rec.val_loss)) throw TrainingDiverged(epoch, "non-finite validation loss");
    hist.epochs.push_back(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_weights = model.snapshot();
      hist.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= hp.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  model.restore(best_weights);
  return hist;
}

/// Multinomial logistic regression on pre-built feature rows.
inline Model train_logreg(std::span<const ModelInput> rows, std::span<const std::size_t> labels, double l2,
                          std::uint64_t seed, std::optional<std::array<double, 3>> class_weights = std::nullopt,
                          Hyperparams hp = {}) {
  if (rows.size() != labels.size()) throw ShapeError("train_logreg: rows and labels differ in length");
  if (rows.empty()) throw ValidationError("train_logreg: no rows");
  std::size_t sparse_width = 0;
  for (const auto& r : rows)
    for (const auto& e : r.sparse) sparse_width = std::max(sparse_width, e.index + 1);
  ModelSpec spec{Family::LogReg, Modality::None, true, false, false, hp};
  spec.hp.l2 = l2;
  Model m = build_model(spec, rows.front().dense.size(), sparse_width, seed);
  std::vector<Example> ex;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dense.size() != rows.front().dense.size()) throw ShapeError("train_logreg: ragged feature rows");
    ex.push_back({&rows[i], labels[i], 0, i});
  }
  train(m, ex, {}, TrainOptions{seed, class_weights});
  return m;
}

}  // namespace argmine
