#include "gismo/corpus.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gismo/errors.hpp"

namespace gismo {

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split value: \"" + std::string(s) + "\"");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  throw InternalError("bad Split value");
}

std::string to_string(Stratum s) {
  return s == Stratum::ID ? "ID" : "OOD";
}

std::string normalize_surface(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_sep = false;
  for (char ch : raw) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!out.empty()) pending_sep = true;
      continue;
    }
    if (pending_sep) {
      out.push_back('_');
      pending_sep = false;
    }
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                       : ch);
  }
  return out;
}

const std::string& Vocabulary::name(IngredientId id) const {
  check_invariant(id < names_.size(), "ingredient id out of range");
  return names_[id];
}

std::optional<IngredientId> Vocabulary::find_alias(const std::string& surface) const {
  auto it = aliases_.find(surface);
  if (it == aliases_.end()) return std::nullopt;
  return it->second;
}

IngredientId Vocabulary::add_canonical(const std::string& raw_name) {
  const std::string name = normalize_surface(raw_name);
  require(!name.empty(), "empty canonical ingredient name");
  auto it = aliases_.find(name);
  if (it != aliases_.end()) {
    require(it->second < names_.size() && names_[it->second] == name,
            "canonical name \"" + name + "\" collides with an alias of \"" +
                names_[it->second] + "\"");
    return it->second;
  }
  const IngredientId id = static_cast<IngredientId>(names_.size());
  names_.push_back(name);
  aliases_.emplace(name, id);
  return id;
}

void Vocabulary::add_alias(const std::string& raw_surface, IngredientId id, bool generated) {
  check_invariant(id < names_.size(), "alias refers to unknown canonical id");
  const std::string surface = normalize_surface(raw_surface);
  if (surface.empty()) {
    require(generated, "empty alias for \"" + names_[id] + "\"");
    return;
  }
  auto [it, inserted] = aliases_.emplace(surface, id);
  if (!inserted && it->second != id) {
    if (generated) return;  // explicit rows win over folded forms
    throw FormatError("alias \"" + surface + "\" maps to both \"" +
                      names_[it->second] + "\" and \"" + names_[id] + "\"");
  }
}

namespace {

// Candidate plural folds of a surface form, longest first.
std::vector<std::string> plural_folds(const std::string& s) {
  std::vector<std::string> out;
  if (s.size() > 1 && s.back() == 's') out.push_back(s.substr(0, s.size() - 1));
  if (s.size() > 2 && s.compare(s.size() - 2, 2, "es") == 0) {
    out.push_back(s.substr(0, s.size() - 2));
  }
  return out;
}

}  // namespace

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos,
            path + " line " + std::to_string(lineno) + ": expected canonical<TAB>alias");
    const IngredientId id = vocab.add_canonical(line.substr(0, tab));
    vocab.add_alias(line.substr(tab + 1), id);
    ++rows;
  }
  require(rows > 0, "vocabulary file is empty: " + path);
  // plural-folded forms of every canonical name
  for (IngredientId id = 0; id < vocab.size(); ++id) {
    for (const std::string& fold : plural_folds(vocab.name(id))) {
      vocab.add_alias(fold, id, /*generated=*/true);
    }
  }
  return vocab;
}

std::optional<IngredientId> resolve_ingredient(std::string_view raw, const Vocabulary& vocab) {
  const std::string surface = normalize_surface(raw);
  if (surface.empty()) return std::nullopt;
  if (auto id = vocab.find_alias(surface)) return id;
  for (const std::string& fold : plural_folds(surface)) {
    if (auto id = vocab.find_alias(fold)) return id;
  }
  return std::nullopt;
}

bool Recipe::contains(IngredientId id) const {
  return std::binary_search(ingredients.begin(), ingredients.end(), id);
}

const Recipe* RecipeStore::find(const std::string& recipe_id) const {
  auto it = by_id_.find(recipe_id);
  return it == by_id_.end() ? nullptr : &recipes_[it->second];
}

std::optional<std::uint32_t> RecipeStore::find_index(const std::string& recipe_id) const {
  auto it = by_id_.find(recipe_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t RecipeStore::add(Recipe recipe) {
  require(!recipe.recipe_id.empty(), "recipe with empty recipe_id");
  require(!recipe.ingredients.empty(), "recipe with empty ingredient set");
  std::sort(recipe.ingredients.begin(), recipe.ingredients.end());
  recipe.ingredients.erase(
      std::unique(recipe.ingredients.begin(), recipe.ingredients.end()),
      recipe.ingredients.end());
  const std::uint32_t index = static_cast<std::uint32_t>(recipes_.size());
  require(by_id_.emplace(recipe.recipe_id, index).second,
          "duplicate recipe_id: " + recipe.recipe_id);
  recipes_.push_back(std::move(recipe));
  return index;
}

void RecipeStore::attach_title_embeddings(
    Matrix vectors, const std::unordered_map<std::string, std::uint32_t>& index) {
  for (const auto& [recipe_id, row] : index) {
    require(row < vectors.rows(), "title embedding row " + std::to_string(row) +
                                      " out of range for \"" + recipe_id + "\"");
    auto it = by_id_.find(recipe_id);
    if (it == by_id_.end()) continue;  // embeddings may cover recipes we dropped
    recipes_[it->second].title_row = row;
  }
  title_vectors_ = std::move(vectors);
}

std::optional<std::span<const double>> RecipeStore::title_embedding(const Recipe& r) const {
  if (!r.title_row || title_vectors_.empty()) return std::nullopt;
  return std::span<const double>(title_vectors_.row(*r.title_row), title_vectors_.cols());
}

namespace {

nlohmann::json parse_json_line(const std::string& line, const std::string& path,
                               std::size_t lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
  }
}

}  // namespace

RecipeStore load_recipes(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  require(in.good(), "cannot open recipes file: " + path);
  RecipeStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const nlohmann::json j = parse_json_line(line, path, lineno);
    Recipe r;
    try {
      r.recipe_id = j.at("recipe_id").get<std::string>();
      r.title = j.value("title", std::string());
      r.split = parse_split(j.at("split").get<std::string>());
      r.instructions = j.value("instructions", std::string());
      for (const auto& raw : j.at("ingredients")) {
        if (auto id = resolve_ingredient(raw.get<std::string>(), vocab)) {
          r.ingredients.push_back(*id);
        } else {
          ++store.stats().ingredients_dropped;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (r.ingredients.empty()) {
      ++store.stats().recipes_dropped;
      continue;
    }
    store.add(std::move(r));
    ++store.stats().recipes_loaded;
  }
  return store;
}

std::span<const std::uint32_t> SubstitutionDataset::split_indices(Split s) const {
  return by_split_[static_cast<std::size_t>(s)];
}

void SubstitutionDataset::add(SubstitutionSample sample) {
  check_invariant(sample.source != sample.target,
                  "substitution sample with source == target");
  by_split_[static_cast<std::size_t>(sample.split)].push_back(
      static_cast<std::uint32_t>(samples_.size()));
  samples_.push_back(sample);
}

SubstitutionDataset load_substitutions(const std::string& path, const RecipeStore& recipes,
                                       const Vocabulary& vocab) {
  std::ifstream in(path);
  require(in.good(), "cannot open substitutions file: " + path);
  SubstitutionDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const nlohmann::json j = parse_json_line(line, path, lineno);
    std::string recipe_id, source_raw, target_raw;
    try {
      recipe_id = j.at("recipe_id").get<std::string>();
      source_raw = j.at("source").get<std::string>();
      target_raw = j.at("target").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto recipe_index = recipes.find_index(recipe_id);
    if (!recipe_index) {
      ++ds.drop_stats().unknown_recipe;
      continue;
    }
    const auto source = resolve_ingredient(source_raw, vocab);
    if (!source) {
      ++ds.drop_stats().unresolved_source;
      continue;
    }
    const auto target = resolve_ingredient(target_raw, vocab);
    if (!target) {
      ++ds.drop_stats().unresolved_target;
      continue;
    }
    if (*source == *target) {
      ++ds.drop_stats().source_equals_target;
      continue;
    }
    const Recipe& recipe = recipes.at(*recipe_index);
    if (!recipe.contains(*source)) {
      ++ds.drop_stats().source_not_in_recipe;
      continue;
    }
    ds.add(SubstitutionSample{*source, *target, *recipe_index, recipe.split});
  }
  return ds;
}

std::vector<std::optional<Stratum>> stratify(const SubstitutionDataset& dataset) {
  std::unordered_map<std::uint64_t, bool> train_pairs;
  for (std::uint32_t idx : dataset.split_indices(Split::Train)) {
    const SubstitutionSample& s = dataset.samples()[idx];
    train_pairs.emplace((static_cast<std::uint64_t>(s.source) << 32) | s.target, true);
  }
  std::vector<std::optional<Stratum>> strata(dataset.samples().size());
  for (Split split : {Split::Val, Split::Test}) {
    for (std::uint32_t idx : dataset.split_indices(split)) {
      const SubstitutionSample& s = dataset.samples()[idx];
      const std::uint64_t key = (static_cast<std::uint64_t>(s.source) << 32) | s.target;
      strata[idx] = train_pairs.count(key) ? Stratum::ID : Stratum::OOD;
    }
  }
  return strata;
}

}  // namespace gismo
