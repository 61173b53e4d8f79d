#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gismo/matrix.hpp"

namespace gismo {

// Index into the ingredient vocabulary. IDs are assigned in first-appearance
// order of the canonical names and are stable across save/load of the same
// vocabulary file.
using IngredientId = std::uint32_t;

enum class Split : std::uint8_t { Train, Val, Test };

Split parse_split(std::string_view s);
std::string to_string(Split s);

// lowercase, trim, collapse whitespace runs to single underscores
std::string normalize_surface(std::string_view raw);

// Canonical ingredient names plus an alias map of surface forms. Canonical
// names are unique, lowercase, underscore-separated; every canonical name
// maps to its own id in the alias map.
class Vocabulary {
 public:
  std::size_t size() const { return names_.size(); }
  std::size_t alias_count() const { return aliases_.size(); }
  const std::string& name(IngredientId id) const;
  std::optional<IngredientId> find_alias(const std::string& surface) const;

  // Registers the canonical name (first appearance assigns the next id) and
  // returns its id. Used by the loader and by test fixtures.
  IngredientId add_canonical(const std::string& raw_name);
  // Maps an extra surface form onto an existing canonical id. A surface form
  // already bound to a different id is a format error unless `generated` is
  // set, in which case the collision is skipped.
  void add_alias(const std::string& raw_surface, IngredientId id, bool generated = false);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, IngredientId> aliases_;
};

// TSV with columns canonical_name<TAB>alias, one row per alias. Plural-folded
// forms of every canonical name are added as aliases automatically.
Vocabulary load_vocabulary(const std::string& path);

// Normalizes, looks the surface form up in the alias map, and falls back to
// plural folding (strip a trailing "s", then "es"; longest folded form
// first). Absence is a value, not an error.
std::optional<IngredientId> resolve_ingredient(std::string_view raw, const Vocabulary& vocab);

struct Recipe {
  std::string recipe_id;
  std::string title;
  std::vector<IngredientId> ingredients;  // sorted, duplicate-free, nonempty
  Split split = Split::Train;
  std::string instructions;  // raw text, kept but unused
  std::optional<std::uint32_t> title_row;  // row into the title-embedding matrix

  bool contains(IngredientId id) const;
};

struct RecipeLoadStats {
  std::size_t recipes_loaded = 0;
  std::size_t ingredients_dropped = 0;  // unresolvable raw names
  std::size_t recipes_dropped = 0;      // resolved ingredient set became empty
};

class RecipeStore {
 public:
  std::size_t size() const { return recipes_.size(); }
  const Recipe& at(std::size_t index) const { return recipes_[index]; }
  const Recipe* find(const std::string& recipe_id) const;
  std::optional<std::uint32_t> find_index(const std::string& recipe_id) const;
  const RecipeLoadStats& stats() const { return stats_; }
  RecipeLoadStats& stats() { return stats_; }

  // Fails on a duplicate recipe_id.
  std::uint32_t add(Recipe recipe);

  // Title embeddings are supplied externally as a matrix plus a row index
  // keyed by recipe_id; recipes absent from the index simply have none.
  void attach_title_embeddings(Matrix vectors,
                               const std::unordered_map<std::string, std::uint32_t>& index);
  std::size_t title_dim() const { return title_vectors_.cols(); }
  std::optional<std::span<const double>> title_embedding(const Recipe& r) const;

 private:
  std::vector<Recipe> recipes_;
  std::unordered_map<std::string, std::uint32_t> by_id_;
  RecipeLoadStats stats_;
  Matrix title_vectors_;
};

// JSON lines {"recipe_id", "title", "ingredients": [raw names], "split"}.
// Unresolvable ingredients are dropped and counted; recipes whose resolved
// set becomes empty are dropped and counted.
RecipeStore load_recipes(const std::string& path, const Vocabulary& vocab);

// Directional substitution tuple bound to the recipe that gives it context.
struct SubstitutionSample {
  IngredientId source = 0;
  IngredientId target = 0;
  std::uint32_t recipe_index = 0;
  Split split = Split::Train;
};

struct SubstitutionDropStats {
  std::size_t unknown_recipe = 0;
  std::size_t unresolved_source = 0;
  std::size_t unresolved_target = 0;
  std::size_t source_equals_target = 0;
  std::size_t source_not_in_recipe = 0;

  std::size_t total() const {
    return unknown_recipe + unresolved_source + unresolved_target +
           source_equals_target + source_not_in_recipe;
  }
};

class SubstitutionDataset {
 public:
  const std::vector<SubstitutionSample>& samples() const { return samples_; }
  std::span<const std::uint32_t> split_indices(Split s) const;
  std::size_t split_size(Split s) const { return split_indices(s).size(); }
  const SubstitutionDropStats& drop_stats() const { return drops_; }
  SubstitutionDropStats& drop_stats() { return drops_; }

  void add(SubstitutionSample sample);

 private:
  std::vector<SubstitutionSample> samples_;
  std::vector<std::uint32_t> by_split_[3];
  SubstitutionDropStats drops_;
};

// JSON lines {"recipe_id", "source", "target"}; the sample's split is
// inherited from its recipe. Samples violating the tuple invariants are
// dropped and counted, never fatal.
SubstitutionDataset load_substitutions(const std::string& path, const RecipeStore& recipes,
                                       const Vocabulary& vocab);

enum class Stratum : std::uint8_t { ID, OOD };

std::string to_string(Stratum s);

// Labels every val/test sample: ID iff its directional (source, target) pair
// occurs in at least one training sample, under any recipe. Training samples
// stay unlabeled.
std::vector<std::optional<Stratum>> stratify(const SubstitutionDataset& dataset);

// An evaluation-time request: rank substitutes for `source` within `recipe`.
struct SubstitutionQuery {
  IngredientId source = 0;
  const Recipe* recipe = nullptr;
};

}  // namespace gismo
