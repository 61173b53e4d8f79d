#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gismo/corpus.hpp"

namespace gismo::miner {

struct Comment {
  std::string recipe_id;
  std::string text;
};

// Half-open token-index range.
struct TokenSpan {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
};

struct IngredientHit {
  IngredientId id = 0;
  TokenSpan span;
};

// A sentence that contains at least one substitution keyword.
struct CandidatePhrase {
  std::vector<std::string> tokens;
  std::vector<TokenSpan> keyword_spans;
  std::vector<IngredientHit> ingredient_hits;
};

// Sentences split on . ! ? ; and newline; tokens split on whitespace and
// punctuation, lowercased.
std::vector<std::vector<std::string>> split_sentences(std::string_view text);

// Matches "instead", "substitute(d|s)", "substituting", "replace(d|s)",
// "replacing", and the trigram "in place of".
std::vector<TokenSpan> find_keyword_spans(const std::vector<std::string>& tokens);

// Greedy longest-match left to right over windows of up to four tokens,
// joined with underscores and resolved against the vocabulary. Matched
// windows never overlap.
std::vector<IngredientHit> match_ingredients(const std::vector<std::string>& tokens,
                                             const Vocabulary& vocab);

// Minimum absolute token-index distance between any token of `a` and any
// token of `b`; 0 when the spans overlap.
std::uint32_t span_distance(TokenSpan a, TokenSpan b);

// Default cutoff: an ingredient at token distance >= 7 from every keyword is
// considered unrelated to the substitution.
inline constexpr std::uint32_t kFarAway = 7;

// Applies the three filter rules and orients the tuple: the ingredient that
// belongs to the recipe is the source, the other one the target.
//   (a) the phrase must contain exactly two ingredients
//   (b) each ingredient must be nearer than `max_distance` to some keyword
//   (c) exactly one of the two ingredients must be in the recipe
std::optional<std::pair<IngredientId, IngredientId>> extract_tuple(
    const CandidatePhrase& phrase, const Recipe& recipe,
    std::uint32_t max_distance = kFarAway);

struct ExtractionReport {
  std::size_t comments_read = 0;
  std::size_t unknown_recipe_comments = 0;
  std::size_t sentences_scanned = 0;
  std::size_t keyword_sentences = 0;
  std::size_t rejected_ingredient_count = 0;  // rule (a)
  std::size_t rejected_distance = 0;          // rule (b)
  std::size_t rejected_membership = 0;        // rule (c)
  std::size_t tuples_emitted = 0;

  std::string to_json() const;
};

// Streams the comments file, applies the full pipeline, and writes emitted
// tuples in the substitution JSON-lines format. Output is a pure function of
// the inputs: byte-identical across runs.
ExtractionReport run_extraction(const std::string& comments_path,
                                const RecipeStore& recipes, const Vocabulary& vocab,
                                const std::string& out_path,
                                std::uint32_t max_distance = kFarAway);

}  // namespace gismo::miner
