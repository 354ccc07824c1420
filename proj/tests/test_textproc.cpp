#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "argmine/rng.hpp"
#include "argmine/textproc.hpp"

using namespace argmine;

namespace {

using Tokens = std::vector<std::string>;

const std::string kTable1Row3 =
    "cause he tried doing it by himself and he can\xE2\x80\x99t. So I think Fezzik went back to his normal ways, like "
    "after he changed.";

std::string random_text(Rng& rng) {
  static const std::vector<std::string> words{"he",  "she's", "went",  "home", "because", "Dr.", "e.g.", "can't",
                                              "I",   "think", "it",    "was",  "lonely",  "42",  "3.5",  "x-ray",
                                              ".",   ",",     "?",     "!",    ";",       ":",   "\"",   "(",
                                              "...", "'",     "would", "been", "changed", "A",   "the",  "dog"};
  std::string s;
  const std::size_t n = rng.below(25);
  for (std::size_t i = 0; i < n; ++i) {
    if (i && rng.below(4)) s += ' ';
    s += words[rng.below(words.size())];
  }
  return s;
}

std::string join(const Tokens& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? " " : "") + t[i];
  return s;
}

}  // namespace

TEST(Tokenize, Basic) {
  EXPECT_EQ(tokenize("He went home."), (Tokens{"he", "went", "home", "."}));
  EXPECT_EQ(tokenize("he's at; he makes"), (Tokens{"he", "'s", "at", ";", "he", "makes"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   ").empty());
}

// Split at the apostrophe itself, not the Penn "n't" convention.
TEST(Tokenize, CurlyApostropheContraction) {
  EXPECT_EQ(tokenize("he doesn\xE2\x80\x99t know where he\xE2\x80\x99s at"),
            (Tokens{"he", "doesn", "'t", "know", "where", "he", "'s", "at"}));
}

TEST(Tokenize, IdempotentOnRejoin) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto t = tokenize(random_text(rng));
    ASSERT_EQ(tokenize(join(t)), t) << join(t);
  }
}

TEST(SplitSentences, Basic) {
  EXPECT_EQ(split_sentences("I agree. He left.").size(), 2u);
  const auto one = split_sentences("no terminator here at all");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], (Span{0, 5}));
  EXPECT_TRUE(split_sentences("").empty());
}

TEST(SplitSentences, AbbreviationsAndDecimals) {
  EXPECT_EQ(split_sentences("Dr. Smith said it. Then he left.").size(), 2u);
  EXPECT_EQ(split_sentences("It costs 3.5 dollars, e.g. for this.").size(), 1u);
  EXPECT_EQ(split_sentences("Really?! Yes.").size(), 2u);
}

TEST(SplitSentences, TableOneExcerpt) { EXPECT_EQ(split_sentences(kTable1Row3).size(), 2u); }

TEST(SplitSentences, PartitionTokens) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const std::string text = random_text(rng);
    const auto spans = split_sentences(text);
    const auto n = tokenize(text).size();
    std::size_t cursor = 0;
    for (const auto& s : spans) {
      ASSERT_EQ(s.begin, cursor) << text;
      ASSERT_GT(s.end, s.begin) << text;
      cursor = s.end;
    }
    ASSERT_EQ(cursor, n) << text;
  }
}

TEST(PosTag, Fixtures) {
  EXPECT_EQ(pos_tag({"he", "runs"}), (Tokens{"PRP", "VBZ"}));
  EXPECT_EQ(pos_tag({"the", "dog"}), (Tokens{"DT", "NN"}));
  EXPECT_EQ(pos_tag({"he", "went", "back"}), (Tokens{"PRP", "VBD", "RB"}));
  EXPECT_EQ(pos_tag({"he", "will", "change"}), (Tokens{"PRP", "MD", "VB"}));
  EXPECT_EQ(pos_tag({",", ".", "42"}), (Tokens{",", ".", "CD"}));
}

TEST(PosTag, UnknownWordsUseSuffixRules) {
  const auto tags = pos_tag({"the", "zorbly", "blorked", "snargling", "frobnications"});
  EXPECT_EQ(tags[1], "RB");
  EXPECT_EQ(tags[2], "VBD");
  EXPECT_EQ(tags[3], "VBG");
  EXPECT_EQ(tags[4], "NNS");
}

TEST(PosTag, AlignedAndClosedTagSet) {
  static const std::set<std::string> penn{"CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS", "LS",
                                          "MD",  "NN",  "NNS",  "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",
                                          "RBR", "RBS", "RP",   "SYM", "TO",  "UH",  "VB",  "VBD", "VBG", "VBN",
                                          "VBP", "VBZ", "WDT",  "WP",  "WP$", "WRB", ".",   ",",   ":",   "``",
                                          "''",  "(",   ")",    "#",   "$"};
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto tokens = tokenize(random_text(rng));
    const auto tags = pos_tag(tokens);
    ASSERT_EQ(tags.size(), tokens.size());
    for (const auto& t : tags) ASSERT_TRUE(penn.count(t)) << t;
  }
}

TEST(PosTag, TaggerTableNeedsMagic) {
  EXPECT_THROW(Tagger::parse("lex\tword\tNN\n"), ParseError);
  EXPECT_THROW(Tagger::parse(std::string(Tagger::kMagic) + "\nword\tNN\n"), ParseError);
  const Tagger t = Tagger::parse(std::string(Tagger::kMagic) + "\nlex\tword\tNN\n");
  EXPECT_EQ(t.tag({"word"}), (Tokens{"NN"}));
}

TEST(ClauseCount, HandRule) {
  const auto m = process("I think that he changed because he was lonely");
  EXPECT_EQ(clause_count(m), (std::vector<std::size_t>{2}));
  EXPECT_EQ(clause_count(process("The dog and the cat.")), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(clause_count(process("")).empty());
}

TEST(ClauseCount, AppendingASubClauseAddsOne) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    std::string text = random_text(rng);
    // keep a single sentence so the appended clause lands in it
    for (char& c : text)
      if (c == '.' || c == '?' || c == '!') c = ' ';
    const auto before = clause_count(process(text));
    const auto after = clause_count(process(text + ", because he left"));
    const std::size_t b = before.empty() ? 0 : before.back();
    ASSERT_EQ(after.back(), b + 1) << text;
  }
}

TEST(MainVerbTense, Fixtures) {
  EXPECT_EQ(main_verb_tense(process("he went back").pos_tags), Tense::Past);
  EXPECT_EQ(main_verb_tense(process("he will change").pos_tags), Tense::Modal);
  EXPECT_EQ(main_verb_tense(process("he runs home").pos_tags), Tense::Present);
  EXPECT_EQ(main_verb_tense(process("").pos_tags), Tense::None);
  EXPECT_EQ(main_verb_tense(process("the dog").pos_tags), Tense::None);
}

TEST(NormalizeChars, Fixtures) {
  EXPECT_EQ(normalize_chars("Ab1"), (std::vector<std::uint8_t>{0, 1, 27}));
  EXPECT_EQ(normalize_chars("a?!b"), normalize_chars("ab"));
  EXPECT_EQ(normalize_chars("a  \t b"), (std::vector<std::uint8_t>{0, 36, 1}));
  EXPECT_EQ(normalize_chars(" a "), (std::vector<std::uint8_t>{0}));
  EXPECT_EQ(normalize_chars("z9 "), (std::vector<std::uint8_t>{25, 35}));
}

TEST(NormalizeChars, AlphabetAndRoundTrip) {
  Rng rng(5);
  std::set<std::uint8_t> seen;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const std::size_t n = rng.below(40);
    for (std::size_t k = 0; k < n; ++k) s.push_back(static_cast<char>(rng.below(256)));
    const auto idx = normalize_chars(s);
    std::string back;
    for (auto v : idx) {
      ASSERT_LT(v, kCharAlphabetSize);
      seen.insert(v);
      back.push_back(alphabet_char(v));
    }
    ASSERT_EQ(normalize_chars(back), idx);
  }
  EXPECT_EQ(seen.size(), kCharAlphabetSize);
}

TEST(Lexicons, DefaultsAreLowercaseAndNonEmpty) {
  const auto& lex = Lexicons::defaults();
  for (const auto* set : {&lex.argument_words, &lex.discourse_connectives, &lex.modal_verbs, &lex.pronouns,
                          &lex.first_person_singular, &lex.polar_words, &lex.stopwords}) {
    ASSERT_FALSE(set->empty());
    for (const auto& e : *set) EXPECT_EQ(e, detail::to_lower(e));
  }
  for (const char* w : {"think", "believe", "shows", "says", "because"}) EXPECT_TRUE(lex.argument_words.count(w)) << w;
}

TEST(Lexicons, ParseRejectsUppercaseAndEmpty) {
  EXPECT_THROW(Lexicons::parse_list("# comment only\n", "x"), ValidationError);
  EXPECT_THROW(Lexicons::parse_list("Word\n", "x"), ValidationError);
  EXPECT_EQ(Lexicons::parse_list("a # trailing\n\n b \n", "x").size(), 2u);
}

TEST(Process, Deterministic) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto text = random_text(rng);
    const auto a = process(text), b = process(text);
    ASSERT_EQ(a.tokens, b.tokens);
    ASSERT_EQ(a.pos_tags, b.pos_tags);
    ASSERT_EQ(a.sentences, b.sentences);
    ASSERT_EQ(a.surface.size(), a.tokens.size());
  }
}
