#include "gismo/miner.hpp"

#include <array>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "gismo/errors.hpp"

namespace gismo::miner {

namespace {

bool is_terminator(char c) {
  return c == '.' || c == '!' || c == '?' || c == ';' || c == '\n';
}

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;  // keep non-ASCII bytes inside tokens
}

char lower(char c) {
  return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c;
}

const std::array<std::string_view, 9> kSingleKeywords = {
    "instead",     "substitute", "substituted", "substitutes", "substituting",
    "replace",     "replaced",   "replaces",    "replacing"};

}  // namespace

std::vector<std::vector<std::string>> split_sentences(std::string_view text) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> tokens;
  std::string current;
  auto flush_token = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  auto flush_sentence = [&] {
    flush_token();
    if (!tokens.empty()) {
      sentences.push_back(std::move(tokens));
      tokens.clear();
    }
  };
  for (char c : text) {
    if (is_terminator(c)) {
      flush_sentence();
    } else if (is_token_char(static_cast<unsigned char>(c))) {
      current.push_back(lower(c));
    } else {
      flush_token();
    }
  }
  flush_sentence();
  return sentences;
}

std::vector<TokenSpan> find_keyword_spans(const std::vector<std::string>& tokens) {
  std::vector<TokenSpan> spans;
  const std::uint32_t n = static_cast<std::uint32_t>(tokens.size());
  for (std::uint32_t i = 0; i < n; ++i) {
    if (i + 3 <= n && tokens[i] == "in" && tokens[i + 1] == "place" &&
        tokens[i + 2] == "of") {
      spans.push_back({i, i + 3});
      continue;
    }
    for (std::string_view kw : kSingleKeywords) {
      if (tokens[i] == kw) {
        spans.push_back({i, i + 1});
        break;
      }
    }
  }
  return spans;
}

std::vector<IngredientHit> match_ingredients(const std::vector<std::string>& tokens,
                                             const Vocabulary& vocab) {
  constexpr std::uint32_t kMaxWindow = 4;
  std::vector<IngredientHit> hits;
  const std::uint32_t n = static_cast<std::uint32_t>(tokens.size());
  std::uint32_t i = 0;
  while (i < n) {
    bool matched = false;
    const std::uint32_t longest = std::min(kMaxWindow, n - i);
    for (std::uint32_t w = longest; w >= 1; --w) {
      std::string joined = tokens[i];
      for (std::uint32_t k = 1; k < w; ++k) {
        joined += '_';
        joined += tokens[i + k];
      }
      if (auto id = resolve_ingredient(joined, vocab)) {
        hits.push_back({*id, {i, i + w}});
        i += w;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return hits;
}

std::uint32_t span_distance(TokenSpan a, TokenSpan b) {
  check_invariant(a.begin < a.end && b.begin < b.end, "span_distance: empty span");
  if (a.begin >= b.end) return a.begin - (b.end - 1);
  if (b.begin >= a.end) return b.begin - (a.end - 1);
  return 0;  // overlap
}

std::optional<std::pair<IngredientId, IngredientId>> extract_tuple(
    const CandidatePhrase& phrase, const Recipe& recipe, std::uint32_t max_distance) {
  check_invariant(!phrase.keyword_spans.empty(), "extract_tuple: phrase has no keyword");
  if (phrase.ingredient_hits.size() != 2) return std::nullopt;  // rule (a)
  for (const IngredientHit& hit : phrase.ingredient_hits) {     // rule (b)
    std::uint32_t nearest = std::numeric_limits<std::uint32_t>::max();
    for (const TokenSpan& kw : phrase.keyword_spans) {
      nearest = std::min(nearest, span_distance(hit.span, kw));
    }
    if (nearest >= max_distance) return std::nullopt;
  }
  const IngredientHit& first = phrase.ingredient_hits[0];  // rule (c)
  const IngredientHit& second = phrase.ingredient_hits[1];
  const bool first_in = recipe.contains(first.id);
  const bool second_in = recipe.contains(second.id);
  if (first_in == second_in) return std::nullopt;
  return first_in ? std::make_pair(first.id, second.id)
                  : std::make_pair(second.id, first.id);
}

std::string ExtractionReport::to_json() const {
  nlohmann::json j{
      {"comments_read", comments_read},
      {"unknown_recipe_comments", unknown_recipe_comments},
      {"sentences_scanned", sentences_scanned},
      {"keyword_sentences", keyword_sentences},
      {"rejected_ingredient_count", rejected_ingredient_count},
      {"rejected_distance", rejected_distance},
      {"rejected_membership", rejected_membership},
      {"tuples_emitted", tuples_emitted},
  };
  return j.dump();
}

ExtractionReport run_extraction(const std::string& comments_path,
                                const RecipeStore& recipes, const Vocabulary& vocab,
                                const std::string& out_path,
                                std::uint32_t max_distance) {
  std::ifstream in(comments_path);
  require(in.good(), "cannot open comments file: " + comments_path);
  std::ofstream out(out_path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + out_path);

  ExtractionReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(comments_path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string recipe_id, text;
    try {
      recipe_id = j.at("recipe_id").get<std::string>();
      text = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(comments_path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    ++report.comments_read;
    const Recipe* recipe = recipes.find(recipe_id);
    if (recipe == nullptr) {
      ++report.unknown_recipe_comments;
      continue;
    }
    for (auto& tokens : split_sentences(text)) {
      ++report.sentences_scanned;
      CandidatePhrase phrase;
      phrase.keyword_spans = find_keyword_spans(tokens);
      if (phrase.keyword_spans.empty()) continue;
      ++report.keyword_sentences;
      phrase.ingredient_hits = match_ingredients(tokens, vocab);
      phrase.tokens = std::move(tokens);
      if (phrase.ingredient_hits.size() != 2) {
        ++report.rejected_ingredient_count;
        continue;
      }
      const auto tuple = extract_tuple(phrase, *recipe, max_distance);
      if (!tuple) {
        // rule (a) was already handled, so the remaining rejections are
        // distance (b) or membership (c)
        bool too_far = false;
        for (const IngredientHit& hit : phrase.ingredient_hits) {
          std::uint32_t nearest = std::numeric_limits<std::uint32_t>::max();
          for (const TokenSpan& kw : phrase.keyword_spans) {
            nearest = std::min(nearest, span_distance(hit.span, kw));
          }
          if (nearest >= max_distance) too_far = true;
        }
        if (too_far) {
          ++report.rejected_distance;
        } else {
          ++report.rejected_membership;
        }
        continue;
      }
      nlohmann::json row{
          {"recipe_id", recipe_id},
          {"source", vocab.name(tuple->first)},
          {"target", vocab.name(tuple->second)},
      };
      out << row.dump() << '\n';
      ++report.tuples_emitted;
    }
  }
  require(out.good(), "write failed: " + out_path);
  return report;
}

}  // namespace gismo::miner
