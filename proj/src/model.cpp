#include "gismo/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "gismo/errors.hpp"

namespace gismo {

ContextMode parse_context_mode(const std::string& s) {
  if (s == "none") return ContextMode::None;
  if (s == "ingredients") return ContextMode::Ingredients;
  if (s == "title") return ContextMode::Title;
  if (s == "both") return ContextMode::Both;
  throw FormatError("unknown context mode: \"" + s + "\"");
}

std::string to_string(ContextMode m) {
  switch (m) {
    case ContextMode::None: return "none";
    case ContextMode::Ingredients: return "ingredients";
    case ContextMode::Title: return "title";
    case ContextMode::Both: return "both";
  }
  throw InternalError("bad ContextMode value");
}

void GismoConfig::validate() const {
  require(gin_layers >= 1, "config: gin_layers must be >= 1");
  require(feature_dim >= 1 && embed_dim >= 1, "config: feature/embed dims must be >= 1");
  require(decoder_layers >= 1 && decoder_hidden >= 1, "config: decoder dims must be >= 1");
  require(lr > 0.0, "config: lr must be positive");
  require(weight_decay >= 0.0, "config: weight_decay must be >= 0");
  require(dropout >= 0.0 && dropout < 1.0, "config: dropout must be in [0, 1)");
  require(max_epochs >= 1, "config: max_epochs must be >= 1");
  require(batch_size >= 1, "config: batch_size must be >= 1");
  require(swap_prob >= 0.0 && swap_prob <= 1.0, "config: swap_prob must be in [0, 1]");
}

std::size_t GismoConfig::context_dim(std::size_t title_dim) const {
  const std::size_t out = use_graph ? embed_dim : feature_dim;
  switch (context_mode) {
    case ContextMode::None: return 0;
    case ContextMode::Ingredients: return out;
    case ContextMode::Title: return title_dim;
    case ContextMode::Both: return out + title_dim;
  }
  throw InternalError("bad ContextMode value");
}

void to_json(nlohmann::json& j, const GismoConfig& c) {
  j = nlohmann::json{{"gin_layers", c.gin_layers},
                     {"feature_dim", c.feature_dim},
                     {"embed_dim", c.embed_dim},
                     {"decoder_layers", c.decoder_layers},
                     {"decoder_hidden", c.decoder_hidden},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"dropout", c.dropout},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"negatives", c.negatives},
                     {"batch_size", c.batch_size},
                     {"context_mode", to_string(c.context_mode)},
                     {"use_graph", c.use_graph},
                     {"swap_prob", c.swap_prob},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GismoConfig& c) {
  c.gin_layers = j.value("gin_layers", c.gin_layers);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.dropout = j.value("dropout", c.dropout);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.negatives = j.value("negatives", c.negatives);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("context_mode")) {
    c.context_mode = parse_context_mode(j.at("context_mode").get<std::string>());
  }
  c.use_graph = j.value("use_graph", c.use_graph);
  c.swap_prob = j.value("swap_prob", c.swap_prob);
  c.seed = j.value("seed", c.seed);
}

std::vector<Parameter*> GismoParameters::all() {
  std::vector<Parameter*> out;
  out.push_back(&node_embeddings);
  for (GinLayer& layer : gin) {
    out.push_back(&layer.eps);
    out.push_back(&layer.w1);
    out.push_back(&layer.b1);
    out.push_back(&layer.w2);
    out.push_back(&layer.b2);
  }
  for (Parameter& p : decoder_w) out.push_back(&p);
  for (Parameter& p : decoder_b) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> GismoParameters::all() const {
  auto mut = const_cast<GismoParameters*>(this)->all();
  return {mut.begin(), mut.end()};
}

std::vector<IngredientId> sample_negatives(IngredientId source, IngredientId target,
                                           std::size_t vocab_size, std::size_t zeta,
                                           Rng& rng) {
  require(vocab_size >= zeta + 2,
          "sample_negatives: vocabulary too small for " + std::to_string(zeta) +
              " negatives");
  std::vector<IngredientId> out;
  if (zeta == 0) return out;
  out.reserve(zeta);
  std::unordered_set<IngredientId> chosen;
  while (out.size() < zeta) {
    const IngredientId c = static_cast<IngredientId>(rng.below(vocab_size));
    if (c == source || c == target || chosen.count(c)) continue;
    chosen.insert(c);
    out.push_back(c);
  }
  return out;
}

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

void add_row_inplace(Matrix& x, const Matrix& row) {
  check_invariant(row.rows() == 1 && row.cols() == x.cols(),
                  "add_row_inplace: shape mismatch");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* dst = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += row.at(0, c);
  }
}

void relu_inplace(Matrix& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.data()[i] < 0.0) x.data()[i] = 0.0;
  }
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  check_invariant(begin <= end && end <= m.rows(), "slice_rows: bad range");
  Matrix out(end - begin, m.cols());
  std::copy_n(m.row(begin), (end - begin) * m.cols(), out.data());
  return out;
}

}  // namespace

GismoModel::GismoModel(GismoConfig config, const FlavorGraph& graph,
                       const RecipeStore& recipes)
    : config_(std::move(config)), graph_(&graph), recipes_(&recipes) {
  config_.validate();
  if (config_.context_mode == ContextMode::Title || config_.context_mode == ContextMode::Both) {
    require(recipes_->title_dim() > 0,
            "context mode \"" + to_string(config_.context_mode) +
                "\" requires title embeddings");
  }
  init_parameters();
}

void GismoModel::init_parameters() {
  Rng rng(config_.seed);
  const std::size_t n = graph_->node_count();
  const std::size_t f = config_.feature_dim;
  const std::size_t d = config_.embed_dim;

  GismoParameters p;
  {
    const double limit = std::sqrt(3.0 / static_cast<double>(f));
    Matrix emb(n, f);
    for (std::size_t i = 0; i < emb.size(); ++i) emb.data()[i] = rng.uniform(-limit, limit);
    p.node_embeddings = Parameter("node_embeddings", std::move(emb));
  }
  for (std::uint32_t l = 0; l < config_.gin_layers; ++l) {
    const std::size_t in = l == 0 ? f : d;
    const std::string prefix = "gin." + std::to_string(l) + ".";
    GinLayer layer;
    layer.eps = Parameter(prefix + "eps", Matrix(1, 1));
    layer.w1 = Parameter(prefix + "w1", glorot_uniform(in, d, rng));
    layer.b1 = Parameter(prefix + "b1", Matrix(1, d));
    layer.w2 = Parameter(prefix + "w2", glorot_uniform(d, d, rng));
    layer.b2 = Parameter(prefix + "b2", Matrix(1, d));
    p.gin.push_back(std::move(layer));
  }
  const std::size_t out = config_.use_graph ? d : f;
  const std::size_t ctx = config_.context_dim(recipes_->title_dim());
  std::size_t in_dim = 2 * out + ctx;
  for (std::uint32_t l = 0; l < config_.decoder_layers; ++l) {
    const bool last = l + 1 == config_.decoder_layers;
    const std::size_t out_dim = last ? 1 : config_.decoder_hidden;
    const std::string prefix = "decoder." + std::to_string(l) + ".";
    p.decoder_w.emplace_back(prefix + "w", glorot_uniform(in_dim, out_dim, rng));
    p.decoder_b.emplace_back(prefix + "b", Matrix(1, out_dim));
    in_dim = out_dim;
  }
  params_ = std::move(p);
  anchor_.reset();
  embeddings_frozen_ = false;
  pullback_ = 0.0;
}

void GismoModel::set_params(GismoParameters params) {
  check_invariant(params.node_embeddings.value.rows() == graph_->node_count() &&
                      params.node_embeddings.value.cols() == config_.feature_dim,
                  "set_params: embedding shape mismatch");
  check_invariant(params.gin.size() == config_.gin_layers, "set_params: layer count mismatch");
  check_invariant(params.decoder_w.size() == config_.decoder_layers,
                  "set_params: decoder depth mismatch");
  params_ = std::move(params);
}

void GismoModel::inject_external_features(ExternalFeatures features) {
  const Matrix& values = features.values;
  require(values.cols() == config_.feature_dim,
          "external features have dimension " + std::to_string(values.cols()) +
              ", expected " + std::to_string(config_.feature_dim));
  require(values.rows() == graph_->node_count() || values.rows() == vocab_size(),
          "external features must cover all nodes or the ingredient vocabulary");
  require(values.all_finite(), "external features contain non-finite entries");
  Matrix& emb = params_.node_embeddings.value;
  for (std::size_t r = 0; r < values.rows(); ++r) {
    std::copy_n(values.row(r), values.cols(), emb.row(r));
  }
  embeddings_frozen_ = !features.finetune;
  pullback_ = features.finetune ? features.pullback : 0.0;
  anchor_ = std::move(features.values);
}

bool GismoModel::embeddings_frozen() const { return embeddings_frozen_; }

std::size_t GismoModel::title_dim() const { return recipes_->title_dim(); }

std::vector<Parameter*> GismoModel::trainable_params() {
  std::vector<Parameter*> out = params_.all();
  if (embeddings_frozen_) {
    std::erase(out, &params_.node_embeddings);
  }
  return out;
}

Matrix GismoModel::encode_ingredients() const {
  Matrix h = params_.node_embeddings.value;
  if (!config_.use_graph) return h;
  for (const GinLayer& layer : params_.gin) {
    Matrix agg = gismo::sparse_aggregate(*graph_, h);
    Matrix pre = std::move(h);
    scale_inplace(pre, 1.0 + layer.eps.value.at(0, 0));
    add_inplace(pre, agg);
    Matrix z = matmul(pre, layer.w1.value);
    add_row_inplace(z, layer.b1.value);
    relu_inplace(z);
    Matrix z2 = matmul(z, layer.w2.value);
    add_row_inplace(z2, layer.b2.value);
    h = std::move(z2);
  }
  return h;
}

Tape::Var GismoModel::encode_ingredients(Tape& tape, Rng& rng, bool training) {
  Tape::Var h = tape.param(params_.node_embeddings);
  if (!config_.use_graph) return h;
  for (GinLayer& layer : params_.gin) {
    Tape::Var agg = tape.sparse_aggregate(*graph_, h);
    Tape::Var pre = tape.gin_combine(tape.param(layer.eps), h, agg);
    Tape::Var z = tape.matmul(pre, tape.param(layer.w1));
    z = tape.add_row_broadcast(z, tape.param(layer.b1));
    z = tape.relu(z);
    z = tape.dropout(z, config_.dropout, rng, training);
    z = tape.matmul(z, tape.param(layer.w2));
    z = tape.add_row_broadcast(z, tape.param(layer.b2));
    h = z;
  }
  return h;
}

std::vector<double> GismoModel::encode_context(const Matrix& h, const Recipe& recipe) const {
  std::vector<double> ctx;
  if (config_.context_mode == ContextMode::Ingredients ||
      config_.context_mode == ContextMode::Both) {
    check_invariant(!recipe.ingredients.empty(), "encode_context: recipe has no ingredients");
    const Matrix mean = mean_rows(h, recipe.ingredients);
    ctx.assign(mean.row(0), mean.row(0) + mean.cols());
  }
  if (config_.context_mode == ContextMode::Title ||
      config_.context_mode == ContextMode::Both) {
    const auto title = recipes_->title_embedding(recipe);
    require(title.has_value(),
            "recipe \"" + recipe.recipe_id + "\" has no title embedding");
    ctx.insert(ctx.end(), title->begin(), title->end());
  }
  return ctx;
}

double GismoModel::score(const Matrix& h, IngredientId source, IngredientId candidate,
                         std::span<const double> context) const {
  check_invariant(source != candidate, "score: candidate equals source");
  check_invariant(candidate < vocab_size(), "score: candidate is a compound node");
  check_invariant(source < vocab_size(), "score: source is a compound node");
  const std::size_t out = h.cols();
  Matrix x(1, 2 * out + context.size());
  std::copy_n(h.row(source), out, x.row(0));
  std::copy_n(h.row(candidate), out, x.row(0) + out);
  std::copy(context.begin(), context.end(), x.row(0) + 2 * out);
  for (std::size_t l = 0; l < params_.decoder_w.size(); ++l) {
    Matrix z = matmul(x, params_.decoder_w[l].value);
    add_row_inplace(z, params_.decoder_b[l].value);
    if (l + 1 < params_.decoder_w.size()) relu_inplace(z);
    x = std::move(z);
  }
  check_invariant(x.rows() == 1 && x.cols() == 1, "score: decoder output is not scalar");
  return x.at(0, 0);
}

// Shared inference path. The candidate-side share of the first decoder layer
// is precomputed once per encoding; per query only the source and context
// shares are added before the remaining layers run.
class ModelScorer final : public Scorer {
 public:
  explicit ModelScorer(const GismoModel& model)
      : model_(&model), h_(model.encode_ingredients()) {
    const std::size_t out = h_.cols();
    const Matrix& w0 = model_->params().decoder_w[0].value;
    const Matrix h_vocab = slice_rows(h_, 0, model_->vocab_size());
    cand_part_ = matmul(h_vocab, slice_rows(w0, out, 2 * out));
  }

  const Matrix& embeddings() const { return h_; }

  std::vector<double> rank(const RankedQuery& query) const override {
    check_invariant(query.query.recipe != nullptr, "ModelScorer: query without recipe");
    const GismoParameters& p = model_->params();
    const std::size_t out = h_.cols();
    const Matrix& w0 = p.decoder_w[0].value;
    const std::vector<double> ctx = model_->encode_context(h_, *query.query.recipe);
    check_invariant(2 * out + ctx.size() == w0.rows(),
                    "ModelScorer: context width mismatch");

    // base = h_s * W0_src + c_r * W0_ctx + b0
    const std::size_t h0 = w0.cols();
    std::vector<double> base(h0, 0.0);
    const double* hs = h_.row(query.query.source);
    for (std::size_t k = 0; k < out; ++k) {
      const double v = hs[k];
      if (v == 0.0) continue;
      const double* wk = w0.row(k);
      for (std::size_t j = 0; j < h0; ++j) base[j] += v * wk[j];
    }
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      const double v = ctx[k];
      if (v == 0.0) continue;
      const double* wk = w0.row(2 * out + k);
      for (std::size_t j = 0; j < h0; ++j) base[j] += v * wk[j];
    }
    for (std::size_t j = 0; j < h0; ++j) base[j] += p.decoder_b[0].value.at(0, j);

    Matrix z = cand_part_;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double* dst = z.row(r);
      for (std::size_t j = 0; j < h0; ++j) dst[j] += base[j];
    }
    const std::size_t layers = p.decoder_w.size();
    for (std::size_t l = 1; l < layers; ++l) {
      relu_inplace(z);
      Matrix z2 = matmul(z, p.decoder_w[l].value);
      add_row_inplace(z2, p.decoder_b[l].value);
      z = std::move(z2);
    }
    check_invariant(z.cols() == 1, "ModelScorer: decoder output is not scalar");
    std::vector<double> scores(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) scores[r] = z.at(r, 0);
    return scores;
  }

  std::string name() const override { return "gismo"; }

 private:
  const GismoModel* model_;
  Matrix h_;
  Matrix cand_part_;
};

std::unique_ptr<Scorer> GismoModel::make_scorer() const {
  return std::make_unique<ModelScorer>(*this);
}

std::vector<std::pair<IngredientId, double>> GismoModel::suggest(
    const SubstitutionQuery& query, std::size_t top_k) const {
  require(top_k > 0, "suggest: top_k must be positive");
  require(query.recipe != nullptr, "suggest: query without recipe");
  require(query.source < vocab_size(), "suggest: unknown source ingredient");
  require(query.recipe->contains(query.source),
          "suggest: source ingredient is not part of the recipe");
  ModelScorer scorer(*this);
  RankedQuery rq;
  rq.query = query;
  const std::vector<double> scores = scorer.rank(rq);
  std::vector<std::pair<IngredientId, double>> ranked;
  ranked.reserve(scores.size() - 1);
  for (IngredientId v = 0; v < scores.size(); ++v) {
    if (v != query.source) ranked.emplace_back(v, scores[v]);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

double GismoModel::train_epoch(const SubstitutionDataset& dataset, AdamState& state,
                               Rng& rng) {
  const auto train = dataset.split_indices(Split::Train);
  require(!train.empty(), "training split is empty");
  std::vector<std::uint32_t> order(train.begin(), train.end());
  rng.shuffle(order);

  const std::size_t zeta = config_.negatives;
  const std::size_t stride = 1 + zeta;
  const bool use_ing_ctx = config_.context_mode == ContextMode::Ingredients ||
                           config_.context_mode == ContextMode::Both;
  const bool use_title_ctx = config_.context_mode == ContextMode::Title ||
                             config_.context_mode == ContextMode::Both;
  std::vector<Parameter*> trainables = trainable_params();

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t bsz = std::min<std::size_t>(config_.batch_size, order.size() - start);

    struct Prepared {
      IngredientId source, target;
      std::uint32_t recipe_index;
      std::vector<IngredientId> negatives;
    };
    std::vector<Prepared> batch;
    batch.reserve(bsz);
    for (std::size_t i = 0; i < bsz; ++i) {
      const SubstitutionSample& s = dataset.samples()[order[start + i]];
      IngredientId source = s.source, target = s.target;
      if (config_.swap_prob > 0.0 && rng.uniform() < config_.swap_prob) {
        std::swap(source, target);
      }
      batch.push_back({source, target, s.recipe_index,
                       sample_negatives(source, target, vocab_size(), zeta, rng)});
    }

    Tape tape;
    Tape::Var h = encode_ingredients(tape, rng, /*training=*/true);

    std::vector<std::uint32_t> src_idx(bsz * stride), cand_idx(bsz * stride),
        ctx_idx(bsz * stride);
    for (std::size_t i = 0; i < bsz; ++i) {
      const Prepared& s = batch[i];
      for (std::size_t j = 0; j < stride; ++j) {
        src_idx[i * stride + j] = s.source;
        cand_idx[i * stride + j] = j == 0 ? s.target : s.negatives[j - 1];
        ctx_idx[i * stride + j] = static_cast<std::uint32_t>(i);
      }
    }

    std::vector<Tape::Var> parts{tape.gather_rows(h, std::move(src_idx)),
                                 tape.gather_rows(h, std::move(cand_idx))};
    if (use_ing_ctx) {
      std::vector<std::vector<std::uint32_t>> groups;
      groups.reserve(bsz);
      for (const Prepared& s : batch) {
        groups.push_back(recipes_->at(s.recipe_index).ingredients);
      }
      Tape::Var ctx = tape.group_mean_rows(h, std::move(groups));
      parts.push_back(tape.gather_rows(ctx, ctx_idx));
    }
    if (use_title_ctx) {
      Matrix titles(bsz, recipes_->title_dim());
      for (std::size_t i = 0; i < bsz; ++i) {
        const Recipe& recipe = recipes_->at(batch[i].recipe_index);
        const auto t = recipes_->title_embedding(recipe);
        require(t.has_value(),
                "recipe \"" + recipe.recipe_id + "\" has no title embedding");
        std::copy(t->begin(), t->end(), titles.row(i));
      }
      parts.push_back(tape.gather_rows(tape.input(std::move(titles)), ctx_idx));
    }

    Tape::Var x = tape.concat_cols(parts);
    for (std::size_t l = 0; l < params_.decoder_w.size(); ++l) {
      x = tape.matmul(x, tape.param(params_.decoder_w[l]));
      x = tape.add_row_broadcast(x, tape.param(params_.decoder_b[l]));
      if (l + 1 < params_.decoder_w.size()) {
        x = tape.relu(x);
        x = tape.dropout(x, config_.dropout, rng, /*training=*/true);
      }
    }
    Tape::Var loss = tape.contrastive_mean(x, bsz, zeta);
    tape.backward(loss);

    if (anchor_ && !embeddings_frozen_ && pullback_ > 0.0) {
      // pull fine-tuned rows back toward the loaded features
      Matrix& grad = params_.node_embeddings.grad;
      const Matrix& value = params_.node_embeddings.value;
      for (std::size_t r = 0; r < anchor_->rows(); ++r) {
        const double* anchor_row = anchor_->row(r);
        const double* value_row = value.row(r);
        double* grad_row = grad.row(r);
        for (std::size_t c = 0; c < anchor_->cols(); ++c) {
          grad_row[c] += pullback_ * (value_row[c] - anchor_row[c]);
        }
      }
    }
    adam_step(trainables, state, config_.lr, config_.weight_decay);
    loss_sum += tape.value(loss).at(0, 0) * static_cast<double>(bsz);
  }
  return loss_sum / static_cast<double>(order.size());
}

FitResult GismoModel::fit(const SubstitutionDataset& dataset) {
  require(dataset.split_size(Split::Train) > 0, "fit: training split is empty");
  require(dataset.split_size(Split::Val) > 0, "fit: validation split is empty");
  const auto strata = stratify(dataset);
  const auto val_queries = build_queries(dataset, Split::Val, strata, *recipes_);

  AdamState state = AdamState::init(trainable_params());
  Rng rng(config_.seed);
  FitResult result;
  double best = -1.0;
  std::uint32_t since_improvement = 0;
  for (std::uint32_t epoch = 1; epoch <= config_.max_epochs; ++epoch) {
    const double loss = train_epoch(dataset, state, rng);
    const auto scorer = make_scorer();
    const double val_mrr = evaluate(*scorer, val_queries).overall.mrr;
    result.log.push_back({epoch, loss, val_mrr});
    if (val_mrr > best) {
      best = val_mrr;
      result.best_params = params_;
      result.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement > config_.patience) {
      break;
    }
  }
  result.best_val_mrr = best;
  return result;
}

std::string training_log_csv(std::span<const TrainLogRow> rows) {
  std::string out = "epoch,loss,val_mrr\n";
  char line[96];
  for (const TrainLogRow& r : rows) {
    std::snprintf(line, sizeof(line), "%u,%.17g,%.17g\n", r.epoch, r.loss, r.val_mrr);
    out += line;
  }
  return out;
}

void save_checkpoint(const std::string& dir, const GismoModel& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    nlohmann::json j = model.config();
    std::ofstream out(dir + "/config.json", std::ios::trunc);
    require(out.good(), "cannot write " + dir + "/config.json");
    out << j.dump(2) << '\n';
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter* p : model.params().all()) {
    const std::string file = p->name + ".bin";
    save_matrix(p->value, dir + "/" + file);
    tensors.push_back({{"name", p->name},
                       {"file", file},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()}});
  }
  nlohmann::json manifest{{"format", "gismo-checkpoint-v1"},
                          {"node_count", model.node_count()},
                          {"vocab_size", model.vocab_size()},
                          {"title_dim", model.title_dim()},
                          {"tensors", tensors}};
  std::ofstream out(dir + "/manifest.json", std::ios::trunc);
  require(out.good(), "cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  std::ifstream cfg_in(dir + "/config.json");
  require(cfg_in.good(), "cannot open " + dir + "/config.json");
  nlohmann::json cfg_json;
  try {
    cfg_in >> cfg_json;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/config.json: " + std::string(e.what()));
  }
  LoadedCheckpoint loaded;
  loaded.config = cfg_json.get<GismoConfig>();

  std::ifstream man_in(dir + "/manifest.json");
  require(man_in.good(), "cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    man_in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/manifest.json: " + std::string(e.what()));
  }
  require(manifest.value("format", "") == "gismo-checkpoint-v1",
          dir + ": not a checkpoint directory");
  loaded.node_count = manifest.at("node_count").get<std::size_t>();
  loaded.title_dim = manifest.value("title_dim", 0);

  std::unordered_map<std::string, Matrix> tensors;
  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Matrix m = load_matrix(dir + "/" + t.at("file").get<std::string>());
    require(m.rows() == t.at("rows").get<std::size_t>() &&
                m.cols() == t.at("cols").get<std::size_t>(),
            dir + ": tensor \"" + name + "\" does not match its manifest shape");
    tensors.emplace(name, std::move(m));
  }
  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    require(it != tensors.end(), dir + ": missing tensor \"" + name + "\"");
    Parameter p(name, std::move(it->second));
    tensors.erase(it);
    return p;
  };
  loaded.params.node_embeddings = take("node_embeddings");
  for (std::uint32_t l = 0; l < loaded.config.gin_layers; ++l) {
    const std::string prefix = "gin." + std::to_string(l) + ".";
    GinLayer layer;
    layer.eps = take(prefix + "eps");
    layer.w1 = take(prefix + "w1");
    layer.b1 = take(prefix + "b1");
    layer.w2 = take(prefix + "w2");
    layer.b2 = take(prefix + "b2");
    loaded.params.gin.push_back(std::move(layer));
  }
  for (std::uint32_t l = 0; l < loaded.config.decoder_layers; ++l) {
    const std::string prefix = "decoder." + std::to_string(l) + ".";
    loaded.params.decoder_w.push_back(take(prefix + "w"));
    loaded.params.decoder_b.push_back(take(prefix + "b"));
  }
  require(tensors.empty(), dir + ": manifest lists unexpected tensors");
  return loaded;
}

}  // namespace gismo
