#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gismo/corpus.hpp"
#include "gismo/eval.hpp"
#include "gismo/graph.hpp"
#include "gismo/optimizer.hpp"
#include "gismo/tape.hpp"

namespace gismo {

enum class ContextMode : std::uint8_t { None, Ingredients, Title, Both };

ContextMode parse_context_mode(const std::string& s);
std::string to_string(ContextMode m);

struct GismoConfig {
  std::uint32_t gin_layers = 2;
  std::uint32_t feature_dim = 300;   // F, width of the embedding table
  std::uint32_t embed_dim = 300;     // d, width after the encoder
  std::uint32_t decoder_layers = 3;
  std::uint32_t decoder_hidden = 300;
  double lr = 5e-5;
  double weight_decay = 1e-4;
  double dropout = 0.25;
  std::uint32_t max_epochs = 1000;
  std::uint32_t patience = 50;
  std::uint32_t negatives = 50;      // contrast candidates per positive
  std::uint32_t batch_size = 512;
  ContextMode context_mode = ContextMode::Ingredients;
  bool use_graph = true;
  double swap_prob = 0.0;            // source/target swap augmentation
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t context_dim(std::size_t title_dim) const;
};

void to_json(nlohmann::json& j, const GismoConfig& c);
void from_json(const nlohmann::json& j, GismoConfig& c);

// f^(l): two-layer MLP applied after neighbor aggregation, plus the
// learnable self-weight eps of the layer.
struct GinLayer {
  Parameter eps;          // 1 x 1
  Parameter w1, b1;       // in x d, 1 x d (in = F for the first layer)
  Parameter w2, b2;       // d x d, 1 x d
};

struct GismoParameters {
  Parameter node_embeddings;         // node_count x F
  std::vector<GinLayer> gin;
  std::vector<Parameter> decoder_w;  // (2d + context_dim) -> hidden -> ... -> 1
  std::vector<Parameter> decoder_b;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

// Optional replacement for the randomly initialized embedding table. Rows
// may cover all nodes or just the ingredient vocabulary (compounds then keep
// their random rows). Frozen features never receive updates; fine-tuned ones
// get an extra L2 gradient pulling them back toward the loaded values.
struct ExternalFeatures {
  Matrix values;
  bool finetune = false;
  double pullback = 1e-4;
};

// Uniform sample of `zeta` distinct ingredient ids, never source or target.
std::vector<IngredientId> sample_negatives(IngredientId source, IngredientId target,
                                           std::size_t vocab_size, std::size_t zeta,
                                           Rng& rng);

struct TrainLogRow {
  std::uint32_t epoch = 0;
  double loss = 0.0;
  double val_mrr = 0.0;
};

struct FitResult {
  GismoParameters best_params;
  std::vector<TrainLogRow> log;
  double best_val_mrr = 0.0;
  std::uint32_t best_epoch = 0;
};

class GismoModel {
 public:
  // The graph supplies both the node universe and, when config.use_graph is
  // set, the message-passing structure. The recipe store provides contexts
  // and title embeddings.
  GismoModel(GismoConfig config, const FlavorGraph& graph, const RecipeStore& recipes);

  const GismoConfig& config() const { return config_; }
  std::size_t vocab_size() const { return graph_->ingredient_count(); }
  std::size_t node_count() const { return graph_->node_count(); }
  std::size_t title_dim() const;
  GismoParameters& params() { return params_; }
  const GismoParameters& params() const { return params_; }
  void set_params(GismoParameters params);

  // Seeded from config.seed; draw order is fixed by the parameter layout.
  void init_parameters();
  void inject_external_features(ExternalFeatures features);
  bool embeddings_frozen() const;
  std::vector<Parameter*> trainable_params();

  // Node embeddings after the encoder, inference mode (no dropout). With
  // use_graph off the raw embedding table is returned unchanged.
  Matrix encode_ingredients() const;
  // Tape-recorded training-mode counterpart.
  Tape::Var encode_ingredients(Tape& tape, Rng& rng, bool training);

  // c_r for one recipe under the configured context mode; empty vector when
  // the mode is None. Title modes require the recipe's title embedding.
  std::vector<double> encode_context(const Matrix& h, const Recipe& recipe) const;

  // phi for a single (source, candidate) pair; candidates are ingredients,
  // never compounds.
  double score(const Matrix& h, IngredientId source, IngredientId candidate,
               std::span<const double> context) const;

  // Scores every vocabulary candidate for the query, reusing a per-encoding
  // precomputation; shared by suggest, validation, and the eval command.
  std::unique_ptr<Scorer> make_scorer() const;

  // Ranked (ingredient, score) list, best first; ties break toward the
  // smaller id. The source itself is never a candidate.
  std::vector<std::pair<IngredientId, double>> suggest(const SubstitutionQuery& query,
                                                       std::size_t top_k) const;

  // One pass over the shuffled training split; returns the mean loss per
  // sample. Every random choice (shuffle, swap, negatives, dropout) comes
  // from `rng`.
  double train_epoch(const SubstitutionDataset& dataset, AdamState& state, Rng& rng);

  // Trains with per-epoch validation MRR, keeps the best parameters, and
  // stops after `patience` consecutive epochs without improvement.
  FitResult fit(const SubstitutionDataset& dataset);

 private:
  friend class ModelScorer;

  GismoConfig config_;
  const FlavorGraph* graph_;
  const RecipeStore* recipes_;
  GismoParameters params_;
  std::optional<Matrix> anchor_;  // loaded external features, for the pullback
  bool embeddings_frozen_ = false;
  double pullback_ = 0.0;
};

std::string training_log_csv(std::span<const TrainLogRow> rows);

// Checkpoint directory: config.json, manifest.json, one matrix file per
// tensor.
void save_checkpoint(const std::string& dir, const GismoModel& model);

struct LoadedCheckpoint {
  GismoConfig config;
  GismoParameters params;
  std::size_t node_count = 0;
  std::size_t title_dim = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace gismo
