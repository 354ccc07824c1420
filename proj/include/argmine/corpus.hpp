#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/error.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

/// Argument component. Enum order is the confusion-matrix index order.
enum class ArgComponent : std::uint8_t { Claim = 0, Evidence = 1, Warrant = 2 };
/// Ordinal specificity, rank 0/1/2.
enum class Specificity : std::uint8_t { Low = 0, Med = 1, High = 2 };

inline constexpr std::size_t kNumArgClasses = 3;
inline constexpr std::size_t kNumSpecClasses = 3;
inline constexpr std::array<ArgComponent, 3> kArgComponents{ArgComponent::Claim, ArgComponent::Evidence,
                                                            ArgComponent::Warrant};
inline constexpr std::array<Specificity, 3> kSpecificities{Specificity::Low, Specificity::Med, Specificity::High};

constexpr std::size_t index_of(ArgComponent a) noexcept { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(Specificity s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view to_string(ArgComponent a) noexcept {
  switch (a) {
    case ArgComponent::Claim: return "claim";
    case ArgComponent::Evidence: return "evidence";
    case ArgComponent::Warrant: return "warrant";
  }
  return "?";
}

constexpr std::string_view to_string(Specificity s) noexcept {
  switch (s) {
    case Specificity::Low: return "low";
    case Specificity::Med: return "med";
    case Specificity::High: return "high";
  }
  return "?";
}

inline std::optional<ArgComponent> parse_arg(std::string_view s) noexcept {
  for (auto a : kArgComponents)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

inline std::optional<Specificity> parse_spec(std::string_view s) noexcept {
  for (auto v : kSpecificities)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct ArgumentMove {
  std::string transcript_id;
  std::size_t move_index = 0;
  std::string speaker;
  std::string text;
  ArgComponent arg_label = ArgComponent::Claim;
  Specificity spec_label = Specificity::Low;

  /// Stable identifier "<transcript>:<index>".
  std::string key() const { return transcript_id + ":" + std::to_string(move_index); }

  bool operator==(const ArgumentMove&) const = default;
};

struct Transcript {
  std::string id;
  std::vector<ArgumentMove> moves;

  bool operator==(const Transcript&) const = default;
};

struct Corpus {
  std::vector<Transcript> transcripts;

  std::size_t num_moves() const noexcept {
    std::size_t n = 0;
    for (const auto& t : transcripts) n += t.moves.size();
    return n;
  }

  bool operator==(const Corpus&) const = default;
};

struct CorpusStats {
  std::array<std::size_t, kNumArgClasses> arg_counts{};
  std::array<std::size_t, kNumSpecClasses> spec_counts{};
  std::size_t num_transcripts = 0;
  std::size_t num_moves = 0;
  double moves_per_transcript_mean = 0.0;
  double moves_per_transcript_sd = 0.0;
  double words_per_move_mean = 0.0;
  double words_per_move_sd = 0.0;
};

namespace detail {

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace detail

/// Check every corpus invariant; throws ValidationError naming the offending item.
inline void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& t : corpus.transcripts) {
    if (t.id.empty()) throw ValidationError("transcript with empty id");
    if (!ids.insert(t.id).second) throw ValidationError("duplicate transcript id '" + t.id + "'");
    if (t.moves.empty()) throw ValidationError("transcript '" + t.id + "' has no moves");
    for (std::size_t i = 0; i < t.moves.size(); ++i) {
      const auto& m = t.moves[i];
      if (m.transcript_id != t.id)
        throw ValidationError("move " + std::to_string(i) + " of '" + t.id + "' carries transcript id '" +
                              m.transcript_id + "'");
      if (m.move_index != i)
        throw ValidationError("transcript '" + t.id + "': move indices must be contiguous from 0");
      if (detail::blank(m.text))
        throw ValidationError("transcript '" + t.id + "' move " + std::to_string(i) + ": empty text");
    }
  }
}

/// Parse one JSON-lines transcript record. Moves with a `speaker_role` other than
/// "student" are dropped before indices are assigned.
inline Transcript parse_transcript(const nlohmann::json& j, const std::string& source, std::size_t line) {
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError(source + ":" + std::to_string(line) + ": " + what);
  };
  if (!j.is_object()) throw ParseError(source, line, "expected a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw ParseError(source, line, "missing string field 'id'");
  if (!j.contains("moves") || !j["moves"].is_array()) throw ParseError(source, line, "missing array field 'moves'");
  Transcript t;
  t.id = j["id"].get<std::string>();
  for (const auto& jm : j["moves"]) {
    if (!jm.is_object()) throw ParseError(source, line, "move is not an object");
    for (const char* field : {"speaker", "text", "arg", "spec"}) {
      if (!jm.contains(field) || !jm[field].is_string())
        throw ParseError(source, line, std::string("move missing string field '") + field + "'");
    }
    if (jm.contains("speaker_role")) {
      if (!jm["speaker_role"].is_string()) throw ParseError(source, line, "'speaker_role' must be a string");
      if (jm["speaker_role"].get<std::string>() != "student") continue;
    }
    ArgumentMove m;
    m.transcript_id = t.id;
    m.move_index = t.moves.size();
    m.speaker = jm["speaker"].get<std::string>();
    m.text = jm["text"].get<std::string>();
    const auto arg = jm["arg"].get<std::string>();
    const auto spec = jm["spec"].get<std::string>();
    const auto a = parse_arg(arg);
    if (!a) throw fail("unknown argument label '" + arg + "' (expected claim|evidence|warrant)");
    const auto s = parse_spec(spec);
    if (!s) throw fail("unknown specificity label '" + spec + "' (expected low|med|high)");
    if (detail::blank(m.text)) throw fail("transcript '" + t.id + "': empty move text");
    m.arg_label = *a;
    m.spec_label = *s;
    t.moves.push_back(std::move(m));
  }
  return t;
}

inline Corpus read_corpus(std::istream& in, const std::string& source = "<stream>") {
  Corpus c;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, lineno, std::string("malformed JSON: ") + e.what());
    }
    auto t = parse_transcript(j, source, lineno);
    if (!ids.insert(t.id).second)
      throw ValidationError(source + ":" + std::to_string(lineno) + ": duplicate transcript id '" + t.id + "'");
    if (t.moves.empty())
      throw ValidationError(source + ":" + std::to_string(lineno) + ": transcript '" + t.id + "' has no moves");
    c.transcripts.push_back(std::move(t));
  }
  validate(c);
  return c;
}

/// Load a JSON-lines corpus file (one transcript per line).
inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file '" + path + "'");
  return read_corpus(in, path);
}

/// One JSON-lines record; keys keep the documented order (id, moves; speaker, text, arg, spec).
inline nlohmann::ordered_json to_json(const Transcript& t) {
  nlohmann::ordered_json moves = nlohmann::ordered_json::array();
  for (const auto& m : t.moves) {
    nlohmann::ordered_json jm;
    jm["speaker"] = m.speaker;
    jm["text"] = m.text;
    jm["arg"] = std::string(to_string(m.arg_label));
    jm["spec"] = std::string(to_string(m.spec_label));
    moves.push_back(std::move(jm));
  }
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["moves"] = std::move(moves);
  return j;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& t : corpus.transcripts) out << to_json(t).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

/// Number of non-punctuation tokens in a move text.
inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  for (const auto& t : tokenize(text))
    if (!is_punctuation(t)) ++n;
  return n;
}

/// Label counts plus mean and population sd of moves per transcript and words per move.
inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.num_transcripts = corpus.transcripts.size();
  std::vector<double> per_transcript;
  std::vector<double> per_move;
  for (const auto& t : corpus.transcripts) {
    per_transcript.push_back(static_cast<double>(t.moves.size()));
    for (const auto& m : t.moves) {
      ++s.arg_counts[index_of(m.arg_label)];
      ++s.spec_counts[index_of(m.spec_label)];
      per_move.push_back(static_cast<double>(word_count(m.text)));
    }
  }
  s.num_moves = per_move.size();
  auto mean_sd = [](const std::vector<double>& xs, double& mean, double& sd) {
    if (xs.empty()) return;
    double sum = 0.0;
    for (double x : xs) sum += x;
    mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(xs.size()));
  };
  mean_sd(per_transcript, s.moves_per_transcript_mean, s.moves_per_transcript_sd);
  mean_sd(per_move, s.words_per_move_mean, s.words_per_move_sd);
  return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  nlohmann::json j;
  j["transcripts"] = s.num_transcripts;
  j["moves"] = s.num_moves;
  for (auto a : kArgComponents) j["arg_counts"][std::string(to_string(a))] = s.arg_counts[index_of(a)];
  for (auto v : kSpecificities) j["spec_counts"][std::string(to_string(v))] = s.spec_counts[index_of(v)];
  j["moves_per_transcript"] = {{"mean", s.moves_per_transcript_mean}, {"sd", s.moves_per_transcript_sd}};
  j["words_per_move"] = {{"mean", s.words_per_move_mean}, {"sd", s.words_per_move_sd}};
  return j;
}

/// Plain-text stats table, as printed by `argmine validate`.
inline std::string render_stats(const CorpusStats& s) {
  std::ostringstream out;
  char buf[128];
  out << "transcripts          " << s.num_transcripts << '\n';
  out << "moves                " << s.num_moves << '\n';
  for (auto a : kArgComponents) {
    std::snprintf(buf, sizeof buf, "arg %-16s %zu\n", std::string(to_string(a)).c_str(), s.arg_counts[index_of(a)]);
    out << buf;
  }
  for (auto v : kSpecificities) {
    std::snprintf(buf, sizeof buf, "spec %-15s %zu\n", std::string(to_string(v)).c_str(), s.spec_counts[index_of(v)]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "moves/transcript     mean %.4f sd %.4f\n", s.moves_per_transcript_mean,
                s.moves_per_transcript_sd);
  out << buf;
  std::snprintf(buf, sizeof buf, "words/move           mean %.4f sd %.4f\n", s.words_per_move_mean,
                s.words_per_move_sd);
  out << buf;
  return out.str();
}

}  // namespace argmine
