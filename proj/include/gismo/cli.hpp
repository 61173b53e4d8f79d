#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gismo/model.hpp"

namespace gismo::cli {

// One flat JSON file holds every setting: the model fields plus data paths,
// seeds, and the output directory. --set KEY=VALUE, --seed and --out apply
// on top of it.
struct RunConfig {
  std::string vocab;
  std::string graph;
  std::string recipes;
  std::string substitutions;
  std::string comments;
  std::string tuples_out;
  std::string external_features;
  std::string external_features_index;
  bool external_finetune = false;
  double external_pullback = 1e-4;
  std::string title_embeddings;
  std::string title_embeddings_index;
  std::string embedding_metric = "cosine";  // for the embedding baseline
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  GismoConfig model;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Exit codes: 0 success, 2 input or format error, 3 broken internal
// invariant.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace gismo::cli
