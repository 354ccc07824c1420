#pragma once

// Essay-derived feature set (lexical, parse, structural and context subsets)
// remapped from essay sentences/paragraphs to discussion moves.

#include <algorithm>
#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "argmine/feature_types.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

/// Position of a move inside its transcript.
struct MovePosition {
  std::size_t index = 0;
  std::size_t count = 1;
};

inline const std::vector<FeatureInfo>& wlda_catalog() {
  static constexpr std::string_view kEssay = "essay feature set";
  static constexpr std::string_view kHeuristic = "essay feature set; shallow heuristic in place of a full parse";
  static constexpr std::string_view kRemap = "essay feature set; paragraph position remapped to transcript position";
  static constexpr std::string_view kContext = "essay feature set; context unit is the adjacent move";
  static const std::vector<FeatureInfo> kCatalog{
      {"wlda.arg_word_count", FeatureGroup::WldaLexical, "occurrences of argument-word lexicon entries", kEssay},
      {"wlda.verb_count", FeatureGroup::WldaLexical, "tokens tagged VB, VBD, VBG, VBN, VBP or VBZ", kEssay},
      {"wlda.adverb_count", FeatureGroup::WldaLexical, "tokens tagged RB, RBR, RBS or WRB", kEssay},
      {"wlda.has_modal", FeatureGroup::WldaLexical, "1 if any token is in the modal-verb lexicon", kEssay},
      {"wlda.connective_count", FeatureGroup::WldaLexical, "occurrences of discourse-connective lexicon entries",
       kEssay},
      {"wlda.has_first_person_singular", FeatureGroup::WldaLexical, "1 if the move contains i/me/my/mine/myself",
       kEssay},
      {"wlda.arg_subject_verb", FeatureGroup::WldaParse,
       "1 if a pronoun or author/writer/narrator token occurs within 3 tokens before a verb", kHeuristic},
      {"wlda.tense_past", FeatureGroup::WldaParse, "first verb-group tag is VBD or VBN", kEssay},
      {"wlda.tense_present", FeatureGroup::WldaParse, "first verb-group tag is VB, VBG, VBP or VBZ", kEssay},
      {"wlda.tense_modal", FeatureGroup::WldaParse, "first verb-group tag is MD", kEssay},
      {"wlda.tense_none", FeatureGroup::WldaParse, "the move has no verb-group tag", kEssay},
      {"wlda.clause_count", FeatureGroup::WldaParse, "sum over sentences of the sub-clause opener count",
       kHeuristic},
      {"wlda.parse_depth", FeatureGroup::WldaParse, "max over sentences of clause count + 1 (0 for no sentences)",
       kHeuristic},
      {"wlda.token_count", FeatureGroup::WldaStructural, "number of tokens including punctuation", kEssay},
      {"wlda.type_token_ratio", FeatureGroup::WldaStructural, "distinct tokens / tokens (0 for an empty move)",
       kEssay},
      {"wlda.punctuation_count", FeatureGroup::WldaStructural, "tokens made only of punctuation", kEssay},
      {"wlda.relative_position", FeatureGroup::WldaStructural, "move index / (moves in transcript - 1), 0 if alone",
       kRemap},
      {"wlda.is_first_move", FeatureGroup::WldaStructural, "1 for the first move of the transcript", kRemap},
      {"wlda.is_last_move", FeatureGroup::WldaStructural, "1 for the last move of the transcript", kRemap},
      {"wlda.sentence_count", FeatureGroup::WldaStructural, "number of sentences", kEssay},
      {"wlda.prev_token_count", FeatureGroup::WldaContext, "token count of the previous move (0 if none)", kContext},
      {"wlda.prev_punctuation_count", FeatureGroup::WldaContext, "punctuation count of the previous move",
       kContext},
      {"wlda.prev_clause_count", FeatureGroup::WldaContext, "clause count of the previous move", kContext},
      {"wlda.prev_has_modal", FeatureGroup::WldaContext, "modal indicator of the previous move", kContext},
      {"wlda.next_token_count", FeatureGroup::WldaContext, "token count of the next move (0 if none)", kContext},
      {"wlda.next_punctuation_count", FeatureGroup::WldaContext, "punctuation count of the next move", kContext},
      {"wlda.next_clause_count", FeatureGroup::WldaContext, "clause count of the next move", kContext},
      {"wlda.next_has_modal", FeatureGroup::WldaContext, "modal indicator of the next move", kContext},
  };
  return kCatalog;
}

namespace wlda_detail {

inline std::size_t punctuation_count(const TokenizedMove& m) {
  return static_cast<std::size_t>(
      std::count_if(m.tokens.begin(), m.tokens.end(), [](const std::string& t) { return is_punctuation(t); }));
}

inline std::size_t clause_total(const TokenizedMove& m, const Lexicons& lex) {
  std::size_t total = 0;
  for (auto c : clause_count(m, lex)) total += c;
  return total;
}

inline bool has_any(const TokenizedMove& m, const std::set<std::string, std::less<>>& entries) {
  return std::any_of(m.tokens.begin(), m.tokens.end(), [&](const std::string& t) { return entries.count(t) > 0; });
}

inline bool arg_subject_verb(const TokenizedMove& m, const Lexicons& lex) {
  static const std::set<std::string, std::less<>> kAuthor{"author", "writer", "narrator"};
  for (std::size_t j = 0; j < m.tokens.size(); ++j) {
    if (!is_verb_tag(m.pos_tags[j])) continue;
    for (std::size_t i = j >= 3 ? j - 3 : 0; i < j; ++i) {
      if (lex.pronouns.count(m.tokens[i]) > 0 || kAuthor.count(m.tokens[i]) > 0) return true;
    }
  }
  return false;
}

}  // namespace wlda_detail

/// Essay-style dense features for one move, in catalog order. Missing neighbours
/// (transcript boundaries) give zero context features.
inline std::vector<NamedFeature> extract_wlda(const TokenizedMove& move, const TokenizedMove* prev,
                                              const TokenizedMove* next, MovePosition pos,
                                              const Lexicons& lex = Lexicons::defaults()) {
  using namespace wlda_detail;
  std::vector<double> v;
  v.reserve(28);
  auto flag = [](bool b) { return b ? 1.0 : 0.0; };
  auto num = [](std::size_t n) { return static_cast<double>(n); };

  // lexical
  std::size_t verbs = 0, adverbs = 0;
  for (const auto& tag : move.pos_tags) {
    if (tag.starts_with("VB")) ++verbs;
    if (is_adverb_tag(tag)) ++adverbs;
  }
  v.push_back(num(count_lexicon_matches(move.tokens, lex.argument_words)));
  v.push_back(num(verbs));
  v.push_back(num(adverbs));
  v.push_back(flag(has_any(move, lex.modal_verbs)));
  v.push_back(num(count_lexicon_matches(move.tokens, lex.discourse_connectives)));
  v.push_back(flag(has_any(move, lex.first_person_singular)));

  // parse
  v.push_back(flag(arg_subject_verb(move, lex)));
  const Tense tense = main_verb_tense(move.pos_tags);
  v.push_back(flag(tense == Tense::Past));
  v.push_back(flag(tense == Tense::Present));
  v.push_back(flag(tense == Tense::Modal));
  v.push_back(flag(tense == Tense::None));
  const auto clauses = clause_count(move, lex);
  std::size_t clause_sum = 0, depth = 0;
  for (auto c : clauses) {
    clause_sum += c;
    depth = std::max(depth, c + 1);
  }
  v.push_back(num(clause_sum));
  v.push_back(num(depth));

  // structural
  const std::size_t n_tokens = move.tokens.size();
  const std::set<std::string> types(move.tokens.begin(), move.tokens.end());
  v.push_back(num(n_tokens));
  v.push_back(n_tokens == 0 ? 0.0 : num(types.size()) / num(n_tokens));
  v.push_back(num(punctuation_count(move)));
  v.push_back(pos.count > 1 ? num(pos.index) / num(pos.count - 1) : 0.0);
  v.push_back(flag(pos.index == 0));
  v.push_back(flag(pos.index + 1 == pos.count));
  v.push_back(num(move.sentences.size()));

  // context
  for (const TokenizedMove* nb : {prev, next}) {
    if (nb == nullptr) {
      v.insert(v.end(), 4, 0.0);
      continue;
    }
    v.push_back(num(nb->tokens.size()));
    v.push_back(num(punctuation_count(*nb)));
    v.push_back(num(clause_total(*nb, lex)));
    v.push_back(flag(has_any(*nb, lex.modal_verbs)));
  }

  const auto& cat = wlda_catalog();
  std::vector<NamedFeature> out;
  out.reserve(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) out.push_back({std::string(cat[i].name), v[i]});
  return out;
}

}  // namespace argmine
