#pragma once

// Seeded synthetic corpora with a controllable amount of label signal. The real
// classroom transcripts are private, so tests and demos run on these.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/rng.hpp"
#include "argmine/textproc.hpp"

namespace argmine {

/// Where the class signal lives in generated text.
enum class SignalMode {
  Keywords,    // class-conditional vocabulary
  WordLength,  // class-conditional word lengths over random non-words; vocabulary carries no signal
};

struct SynthConfig {
  std::size_t n_transcripts = 30;
  double moves_per_transcript_mean = 10.0;
  double class_signal_strength = 1.0;  // in [0, 1]; 0 makes text independent of the labels
  std::uint64_t seed = 1;
  SignalMode mode = SignalMode::Keywords;
  /// Prior over {claim, evidence, warrant}; defaults to the 1034/655/358 class shape.
  std::array<double, 3> arg_prior{1034.0, 655.0, 358.0};
  /// Exact label counts; overrides the prior and fixes the total number of moves.
  std::optional<std::array<std::size_t, 3>> arg_counts;
  /// P(specificity | argument label), rows claim/evidence/warrant, columns low/med/high.
  std::array<std::array<double, 3>, 3> spec_given_arg{{
      {0.50, 0.42, 0.08},
      {0.18, 0.55, 0.27},
      {0.20, 0.56, 0.24},
  }};
  std::size_t words_min = 6;
  std::size_t words_max = 18;
};

namespace synth_detail {

inline const std::array<std::vector<std::string>, 3>& arg_pools() {
  static const std::array<std::vector<std::string>, 3> kPools{{
      {"think", "believe", "feel", "guess", "opinion", "agree", "disagree", "suppose", "probably", "maybe",
       "honestly", "seems", "selfish", "brave", "stubborn", "loyal", "wrong", "true", "different", "important",
       "really", "personally", "kind", "sure"},
      {"says", "page", "chapter", "quote", "text", "scene", "line", "paragraph", "wrote", "states", "book",
       "movie", "example", "beginning", "described", "happened", "remember", "read", "passage", "poem", "author",
       "told", "saw", "gave"},
      {"because", "means", "reason", "explains", "therefore", "proves", "connects", "why", "since", "supports",
       "suggests", "implies", "logic", "cause", "result", "thus", "meaning", "shows", "so", "whereas", "relied",
       "wants", "needs", "realized"},
  }};
  return kPools;
}

inline const std::array<std::vector<std::string>, 3>& spec_pools() {
  static const std::array<std::vector<std::string>, 3> kPools{{
      {"stuff", "things", "something", "whatever", "yeah", "okay", "everything", "anything"},
      {"part", "moment", "friend", "place", "giant", "castle", "sword", "battle"},
      {"fezzik", "vizzini", "humperdinck", "westley", "buttercup", "inigo", "exactly", "specifically"},
  }};
  return kPools;
}

inline const std::vector<std::string>& neutral_pool() {
  static const std::vector<std::string> kPool{
      "he", "she", "they", "it", "the", "a", "was", "is", "to", "and", "of", "in", "at", "like", "um", "just",
      "went", "goes", "back", "around", "people", "man", "time", "story", "did", "had", "about", "with", "there",
      "this", "then", "we", "go", "get", "got", "his", "her", "them", "all", "other", "way", "day", "when", "out",
      "up", "be", "have", "make", "made", "one", "also", "what", "could", "would", "not", "can", "i", "you"};
  return kPool;
}

inline std::string random_nonword(Rng& rng, std::size_t length, const Tagger& tagger) {
  static constexpr std::string_view kConsonants = "bcdfghjklmnpqrtvwxz";
  for (;;) {
    std::string w;
    for (std::size_t i = 0; i < length; ++i) w.push_back(kConsonants[rng.below(kConsonants.size())]);
    if (!tagger.knows(w)) return w;
  }
}

// At least 4 letters, so 19^4 possible strings make token repeats (and with them
// any tf-idf signal) rare.
inline std::size_t nonword_length(Rng& rng, ArgComponent label, double strength) {
  if (rng.bernoulli(strength)) {
    switch (label) {
      case ArgComponent::Claim: return static_cast<std::size_t>(rng.between(4, 5));
      case ArgComponent::Evidence: return static_cast<std::size_t>(rng.between(7, 8));
      case ArgComponent::Warrant: return static_cast<std::size_t>(rng.between(10, 11));
    }
  }
  return static_cast<std::size_t>(rng.between(4, 11));
}

inline std::string render(const std::vector<std::string>& words, Rng& rng) {
  std::string text;
  std::size_t until_break = static_cast<std::size_t>(rng.between(4, 9));
  bool sentence_start = true;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string w = words[i];
    if (w == "i") w = "I";
    if (sentence_start && !w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (!text.empty()) text.push_back(' ');
    text += w;
    sentence_start = false;
    const bool last = i + 1 == words.size();
    if (--until_break == 0 || last) {
      text.push_back(rng.bernoulli(0.15) ? '?' : '.');
      sentence_start = true;
      until_break = static_cast<std::size_t>(rng.between(4, 9));
    } else if (rng.bernoulli(0.08)) {
      text.push_back(',');
    }
  }
  return text;
}

inline std::string move_text(Rng& rng, const SynthConfig& cfg, ArgComponent arg, Specificity spec) {
  const auto len = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(cfg.words_min), static_cast<std::int64_t>(cfg.words_max)));
  std::vector<std::string> words;
  words.reserve(len);
  const double s = cfg.class_signal_strength;
  for (std::size_t k = 0; k < len; ++k) {
    if (cfg.mode == SignalMode::WordLength) {
      words.push_back(random_nonword(rng, nonword_length(rng, arg, s), Tagger::defaults()));
      continue;
    }
    if (rng.bernoulli(s)) {
      const auto& pool = rng.bernoulli(0.8) ? arg_pools()[index_of(arg)] : spec_pools()[index_of(spec)];
      words.push_back(pool[rng.below(pool.size())]);
    } else {
      const auto& pool = neutral_pool();
      words.push_back(pool[rng.below(pool.size())]);
    }
  }
  return render(words, rng);
}

}  // namespace synth_detail

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_transcripts < 2) throw ValidationError("synthetic corpus needs at least 2 transcripts");
  if (!(cfg.class_signal_strength >= 0.0 && cfg.class_signal_strength <= 1.0))
    throw ValidationError("class_signal_strength must lie in [0, 1]");
  if (!(cfg.moves_per_transcript_mean >= 1.0)) throw ValidationError("moves_per_transcript_mean must be >= 1");
  if (cfg.words_min < 1 || cfg.words_max < cfg.words_min) throw ValidationError("invalid words_min/words_max");
  double prior = 0.0;
  for (double p : cfg.arg_prior) {
    if (!(p >= 0.0)) throw ValidationError("arg_prior entries must be non-negative");
    prior += p;
  }
  if (!(prior > 0.0)) throw ValidationError("arg_prior must have positive mass");
  for (const auto& row : cfg.spec_given_arg) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ValidationError("spec_given_arg entries must be non-negative");
      sum += p;
    }
    if (!(sum > 0.0)) throw ValidationError("spec_given_arg rows must have positive mass");
  }
  if (cfg.arg_counts) {
    std::size_t total = 0;
    for (auto c : *cfg.arg_counts) total += c;
    if (total < cfg.n_transcripts) throw ValidationError("arg_counts total must be >= n_transcripts");
  }
}

/// Deterministic synthetic corpus. Transcript sizes are uniform on
/// [ceil(m/2), floor(3m/2)] for mean m, or a random split of the exact total
/// when `arg_counts` is set.
inline Corpus generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  std::vector<std::size_t> sizes(cfg.n_transcripts, 1);
  std::vector<ArgComponent> fixed_labels;
  if (cfg.arg_counts) {
    for (auto a : kArgComponents)
      for (std::size_t i = 0; i < (*cfg.arg_counts)[index_of(a)]; ++i) fixed_labels.push_back(a);
    rng.shuffle(std::span<ArgComponent>(fixed_labels));
    for (std::size_t k = cfg.n_transcripts; k < fixed_labels.size(); ++k) ++sizes[rng.below(cfg.n_transcripts)];
  } else {
    const double m = cfg.moves_per_transcript_mean;
    const auto lo = static_cast<std::int64_t>(std::max(1.0, std::ceil(m / 2.0)));
    const auto hi = std::max(lo, static_cast<std::int64_t>(std::floor(1.5 * m)));
    for (auto& s : sizes) s = static_cast<std::size_t>(rng.between(lo, hi));
  }

  Corpus corpus;
  std::size_t next_label = 0;
  for (std::size_t t = 0; t < cfg.n_transcripts; ++t) {
    Transcript tr;
    char id[32];
    std::snprintf(id, sizeof id, "T%03zu", t + 1);
    tr.id = id;
    const auto n_speakers = static_cast<std::size_t>(rng.between(2, 5));
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      ArgumentMove m;
      m.transcript_id = tr.id;
      m.move_index = i;
      m.speaker = "S" + std::to_string(1 + rng.below(n_speakers));
      m.arg_label = cfg.arg_counts ? fixed_labels[next_label++]
                                   : kArgComponents[rng.categorical(std::span<const double>(cfg.arg_prior))];
      m.spec_label = kSpecificities[rng.categorical(std::span<const double>(cfg.spec_given_arg[index_of(m.arg_label)]))];
      m.text = synth_detail::move_text(rng, cfg, m.arg_label, m.spec_label);
      tr.moves.push_back(std::move(m));
    }
    corpus.transcripts.push_back(std::move(tr));
  }
  return corpus;
}

/// Every word the keyword-mode generator can emit.
inline std::vector<std::string> synthetic_vocabulary() {
  std::set<std::string> vocab;
  for (const auto& pool : synth_detail::arg_pools()) vocab.insert(pool.begin(), pool.end());
  for (const auto& pool : synth_detail::spec_pools()) vocab.insert(pool.begin(), pool.end());
  vocab.insert(synth_detail::neutral_pool().begin(), synth_detail::neutral_pool().end());
  return {vocab.begin(), vocab.end()};
}

}  // namespace argmine
