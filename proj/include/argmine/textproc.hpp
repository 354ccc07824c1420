#pragma once

// Tokenizer, sentence splitter, rule+lexicon POS tagger and the shallow
// clause/tense heuristics shared by both feature extractors.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "argmine/embedded_data.hpp"
#include "argmine/error.hpp"

namespace argmine {

/// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct TokenizedMove {
  std::vector<std::string> tokens;   // lowercased
  std::vector<std::string> surface;  // original casing, aligned with tokens
  std::vector<Span> sentences;
  std::vector<std::string> pos_tags;
};

enum class Tense { Past, Present, Modal, None };

namespace detail {

inline bool is_word_byte(unsigned char c) noexcept { return std::isalnum(c) || c >= 0x80; }

inline char ascii_lower(char c) noexcept {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

/// Replace the UTF-8 right single quotation mark with an ASCII apostrophe.
inline std::string fold_apostrophes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x99 ||
         static_cast<unsigned char>(text[i + 2]) == 0x98)) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

struct RawToken {
  std::string text;     // original casing
  std::size_t end = 0;  // byte offset one past the token in the folded text
};

inline std::vector<RawToken> raw_tokens(const std::string& s) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < n && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({s.substr(i, j - i), j});
      i = j;
    } else if (c == '\'' && i + 1 < n && is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
      // Clitic or contraction tail: "'s", "'t", "'cause".
      std::size_t j = i + 1;
      while (j < n && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({s.substr(i, j - i), j});
      i = j;
    } else {
      out.push_back({std::string(1, s[i]), i + 1});
      ++i;
    }
  }
  return out;
}

inline bool is_terminator(std::string_view tok) noexcept {
  return tok == "." || tok == "!" || tok == "?";
}

inline const std::set<std::string, std::less<>>& abbreviations() {
  static const std::set<std::string, std::less<>> kAbbrev{
      "mr", "mrs", "ms", "dr", "st", "vs", "etc", "jr", "sr", "prof", "e", "i", "g", "eg", "ie", "p", "pp", "ch"};
  return kAbbrev;
}

}  // namespace detail

/// True for tokens made only of ASCII punctuation.
inline bool is_punctuation(std::string_view token) noexcept {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

/// Lowercased word tokens; punctuation split off; contractions split at the apostrophe.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : detail::raw_tokens(detail::fold_apostrophes(text))) out.push_back(detail::to_lower(t.text));
  return out;
}

/// Sentence ranges over the tokens of `text`. A `.`, `!` or `?` ends a sentence
/// when followed by whitespace or the end of text and not preceded by a known
/// abbreviation. Ranges partition [0, |tokens|).
inline std::vector<Span> split_sentences(std::string_view text) {
  const std::string folded = detail::fold_apostrophes(text);
  const auto raw = detail::raw_tokens(folded);
  std::vector<Span> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!detail::is_terminator(raw[i].text)) continue;
    const std::size_t after = raw[i].end;
    const bool at_boundary = after >= folded.size() ||
                             std::isspace(static_cast<unsigned char>(folded[after])) != 0;
    if (!at_boundary) continue;
    if (raw[i].text == "." && i > 0) {
      const auto prev = detail::to_lower(raw[i - 1].text);
      const bool glued = raw[i - 1].end == after - 1;
      if (glued && detail::abbreviations().count(prev) > 0) continue;
    }
    out.push_back({begin, i + 1});
    begin = i + 1;
  }
  if (begin < raw.size()) out.push_back({begin, raw.size()});
  return out;
}

/// Lexicon sets used by the feature extractors.
struct Lexicons {
  std::set<std::string, std::less<>> argument_words;
  std::set<std::string, std::less<>> discourse_connectives;  // may contain multi-word entries
  std::set<std::string, std::less<>> modal_verbs;
  std::set<std::string, std::less<>> pronouns;
  std::set<std::string, std::less<>> first_person_singular;
  std::set<std::string, std::less<>> polar_words;
  std::set<std::string, std::less<>> stopwords;

  /// Parse one lexicon file body: one entry per line, '#' comments, blank lines ignored.
  static std::set<std::string, std::less<>> parse_list(std::string_view body, const std::string& name) {
    std::set<std::string, std::less<>> out;
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      std::string entry = line.substr(first, last - first + 1);
      if (entry != detail::to_lower(entry)) throw ValidationError("lexicon " + name + ": entry '" + entry + "' is not lowercase");
      out.insert(std::move(entry));
    }
    if (out.empty()) throw ValidationError("lexicon " + name + " is empty");
    return out;
  }

  static const Lexicons& defaults() {
    static const Lexicons kDefaults = [] {
      Lexicons lex;
      lex.argument_words = parse_list(embedded::kArgumentWords, "argument_words");
      lex.discourse_connectives = parse_list(embedded::kDiscourseConnectives, "discourse_connectives");
      lex.modal_verbs = parse_list(embedded::kModalVerbs, "modal_verbs");
      lex.pronouns = parse_list(embedded::kPronouns, "pronouns");
      lex.first_person_singular = parse_list(embedded::kFirstPersonSingular, "first_person_singular");
      lex.polar_words = parse_list(embedded::kPolarWords, "polar_words");
      lex.stopwords = parse_list(embedded::kStopwords, "stopwords");
      return lex;
    }();
    return kDefaults;
  }

  /// Load overrides from `<dir>/<name>.txt`; files that do not exist keep the default list.
  static Lexicons load(const std::string& dir) {
    Lexicons lex = defaults();
    auto maybe = [&](std::set<std::string, std::less<>>& target, const std::string& name) {
      std::ifstream in(dir + "/" + name + ".txt");
      if (!in) return;
      std::stringstream buf;
      buf << in.rdbuf();
      target = parse_list(buf.str(), name);
    };
    maybe(lex.argument_words, "argument_words");
    maybe(lex.discourse_connectives, "discourse_connectives");
    maybe(lex.modal_verbs, "modal_verbs");
    maybe(lex.pronouns, "pronouns");
    maybe(lex.first_person_singular, "first_person_singular");
    maybe(lex.polar_words, "polar_words");
    maybe(lex.stopwords, "stopwords");
    return lex;
  }
};

/// Occurrences of lexicon entries (single or multi-word) in a token sequence.
inline std::size_t count_lexicon_matches(const std::vector<std::string>& tokens,
                                         const std::set<std::string, std::less<>>& entries) {
  std::size_t count = 0;
  std::size_t max_words = 1;
  for (const auto& e : entries) max_words = std::max<std::size_t>(max_words, std::count(e.begin(), e.end(), ' ') + 1);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (std::size_t n = 1; n <= max_words && i + n <= tokens.size(); ++n) {
      if (n > 1) gram.push_back(' ');
      gram += tokens[i + n - 1];
      if (entries.count(gram) > 0) ++count;
    }
  }
  return count;
}

/// Deterministic rule+lexicon tagger over the Penn Treebank tag set.
///
/// Known words take the first candidate tag unless a left-context rule selects
/// another candidate; unknown words fall back to number, punctuation and suffix rules.
class Tagger {
 public:
  static constexpr std::string_view kMagic = "#ARGMINE-TAGGER 1";

  static Tagger parse(std::string_view body) {
    Tagger t;
    std::istringstream in{std::string(body)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (lineno == 1) {
        if (line != kMagic) throw ParseError("tagger", lineno, "missing magic header '" + std::string(kMagic) + "'");
        continue;
      }
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      std::string col;
      while (std::getline(ls, col, '\t')) cols.push_back(col);
      if (cols.size() != 3) throw ParseError("tagger", lineno, "expected 3 tab-separated columns");
      if (cols[0] == "lex") {
        std::vector<std::string> tags;
        std::stringstream ts(cols[2]);
        std::string tag;
        while (std::getline(ts, tag, ',')) tags.push_back(tag);
        if (tags.empty()) throw ParseError("tagger", lineno, "empty tag list");
        t.lexicon_[cols[1]] = std::move(tags);
      } else if (cols[0] == "suf") {
        t.suffixes_.emplace_back(cols[1], cols[2]);
      } else {
        throw ParseError("tagger", lineno, "unknown record kind '" + cols[0] + "'");
      }
    }
    std::stable_sort(t.suffixes_.begin(), t.suffixes_.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    return t;
  }

  static const Tagger& defaults() {
    static const Tagger kDefault = parse(embedded::kTaggerTable);
    return kDefault;
  }

  std::vector<std::string> tag(const std::vector<std::string>& tokens) const {
    std::vector<std::string> tags;
    tags.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string* prev_tag = i > 0 ? &tags[i - 1] : nullptr;
      const std::string* prev_word = i > 0 ? &tokens[i - 1] : nullptr;
      tags.push_back(tag_one(tokens[i], prev_word, prev_tag));
    }
    return tags;
  }

  std::size_t lexicon_size() const noexcept { return lexicon_.size(); }
  bool knows(const std::string& word) const { return lexicon_.count(word) > 0; }

 private:
  static bool has(const std::vector<std::string>& cands, std::string_view tag) {
    return std::find(cands.begin(), cands.end(), tag) != cands.end();
  }

  static std::string punctuation_tag(std::string_view tok) {
    if (detail::is_terminator(tok)) return ".";
    if (tok == ",") return ",";
    if (tok == ";" || tok == ":" || tok == "-" || tok == "--") return ":";
    if (tok == "\"" || tok == "'") return "''";
    if (tok == "(" || tok == "[" || tok == "{") return "(";
    if (tok == ")" || tok == "]" || tok == "}") return ")";
    if (tok == "$") return "$";
    if (tok == "#") return "#";
    return "SYM";
  }

  std::string fallback(const std::string& tok) const {
    if (is_punctuation(tok)) return punctuation_tag(tok);
    if (std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c) || c == '.' || c == ','; }))
      return "CD";
    if (std::any_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) return "CD";
    for (const auto& [suffix, tag] : suffixes_) {
      if (tok.size() > suffix.size() + 1 && tok.compare(tok.size() - suffix.size(), suffix.size(), suffix) == 0)
        return tag;
    }
    return "NN";
  }

  std::string tag_one(const std::string& tok, const std::string* prev_word, const std::string* prev_tag) const {
    const auto it = lexicon_.find(tok);
    if (it == lexicon_.end()) {
      std::string t = fallback(tok);
      if (prev_tag && (*prev_tag == "MD" || *prev_tag == "TO") && (t == "NN" || t == "VB")) return "VB";
      return t;
    }
    const auto& cands = it->second;
    if (cands.size() == 1 || !prev_tag) return cands.front();
    const std::string& p = *prev_tag;
    if ((p == "MD" || p == "TO") && has(cands, "VB")) return "VB";
    if ((p == "DT" || p == "PRP$" || p == "JJ" || p == "POS") && has(cands, "NN")) return "NN";
    if (p == "PRP" || p == "NNP" || p == "EX") {
      const bool third = p == "NNP" || (prev_word && (*prev_word == "he" || *prev_word == "she" || *prev_word == "it"));
      if (tok == "'s") return "VBZ";
      if (third && has(cands, "VBZ")) return "VBZ";
      if (has(cands, "VBD")) return "VBD";
      if (!third && has(cands, "VBP")) return "VBP";
    }
    return cands.front();
  }

  std::unordered_map<std::string, std::vector<std::string>> lexicon_;
  std::vector<std::pair<std::string, std::string>> suffixes_;
};

/// Load a tagger table from a file (same format as data/tagger/tagger.tsv).
inline Tagger load_tagger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tagger table '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return Tagger::parse(buf.str());
}

inline std::vector<std::string> pos_tag(const std::vector<std::string>& tokens,
                                        const Tagger& tagger = Tagger::defaults()) {
  return tagger.tag(tokens);
}

inline bool is_verb_tag(std::string_view tag) noexcept { return tag.starts_with("VB") || tag == "MD"; }
inline bool is_adverb_tag(std::string_view tag) noexcept {
  return tag == "RB" || tag == "RBR" || tag == "RBS" || tag == "WRB";
}

/// Tokenize, split and tag in one pass.
inline TokenizedMove process(std::string_view text, const Tagger& tagger = Tagger::defaults()) {
  TokenizedMove m;
  for (auto& t : detail::raw_tokens(detail::fold_apostrophes(text))) {
    m.tokens.push_back(detail::to_lower(t.text));
    m.surface.push_back(std::move(t.text));
  }
  m.sentences = split_sentences(text);
  m.pos_tags = tagger.tag(m.tokens);
  return m;
}

inline const std::set<std::string, std::less<>>& subordinators() {
  static const std::set<std::string, std::less<>> kSub{"because", "although", "if", "since", "while",
                                                       "that", "which", "who", "when"};
  return kSub;
}

/// Sub-clause openers in one sentence: a subordinator followed within 6 tokens by
/// a verb tag. The window stops early at `,` `;` `:` so trailing clauses never
/// change the count of earlier ones.
inline std::size_t clause_count_in(const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
                                   Span sentence) {
  std::size_t count = 0;
  for (std::size_t i = sentence.begin; i < sentence.end; ++i) {
    if (subordinators().count(tokens[i]) == 0) continue;
    for (std::size_t j = i + 1; j < sentence.end && j <= i + 6; ++j) {
      if (tags[j] == "," || tags[j] == ":") break;
      if (is_verb_tag(tags[j])) {
        ++count;
        break;
      }
    }
  }
  return count;
}

/// Sub-clause count per sentence.
inline std::vector<std::size_t> clause_count(const TokenizedMove& move, const Lexicons& = Lexicons::defaults()) {
  std::vector<std::size_t> out;
  out.reserve(move.sentences.size());
  for (const auto& s : move.sentences) out.push_back(clause_count_in(move.tokens, move.pos_tags, s));
  return out;
}

/// Tense of the first verb-group tag.
inline Tense main_verb_tense(const std::vector<std::string>& tags) noexcept {
  for (const auto& t : tags) {
    if (t == "VBD" || t == "VBN") return Tense::Past;
    if (t == "VBP" || t == "VBZ" || t == "VBG" || t == "VB") return Tense::Present;
    if (t == "MD") return Tense::Modal;
  }
  return Tense::None;
}

inline constexpr std::size_t kCharAlphabetSize = 37;
inline constexpr std::size_t kSpaceIndex = 36;

/// Map text onto the 37-symbol alphabet {a..z, 0..9, space}. Other characters are
/// dropped, whitespace runs collapse to one space, leading/trailing spaces are trimmed.
inline std::vector<std::uint8_t> normalize_chars(std::string_view text) {
  std::vector<std::uint8_t> out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const char c = detail::ascii_lower(raw);
    int idx = -1;
    if (c >= 'a' && c <= 'z') idx = c - 'a';
    else if (c >= '0' && c <= '9') idx = 26 + (c - '0');
    else if (std::isspace(static_cast<unsigned char>(c))) pending_space = true;
    if (idx < 0) continue;
    if (pending_space && !out.empty()) out.push_back(static_cast<std::uint8_t>(kSpaceIndex));
    pending_space = false;
    out.push_back(static_cast<std::uint8_t>(idx));
  }
  return out;
}

inline char alphabet_char(std::uint8_t index) noexcept {
  if (index < 26) return static_cast<char>('a' + index);
  if (index < 36) return static_cast<char>('0' + (index - 26));
  return ' ';
}

}  // namespace argmine
