#include "gismo/baselines.hpp"

#include <cmath>

#include "gismo/errors.hpp"
#include "gismo/rng.hpp"

namespace gismo {

FrequencyTables fit_tables(const SubstitutionDataset& dataset, Split split) {
  require(dataset.split_size(split) > 0,
          "fit_tables: split \"" + to_string(split) + "\" is empty");
  FrequencyTables tables;
  for (std::uint32_t idx : dataset.split_indices(split)) {
    const SubstitutionSample& s = dataset.samples()[idx];
    ++tables.target_counts[s.target];
    ++tables.pair_counts[FrequencyTables::pair_key(s.source, s.target)];
    ++tables.total;
  }
  return tables;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<double> RandomRanker::rank(const RankedQuery& query) const {
  std::uint64_t key = seed_;
  key = mix64(key ^ hash_string(query.query.recipe ? query.query.recipe->recipe_id : ""));
  key = mix64(key ^ query.query.source);
  key = mix64(key ^ query.true_target);
  Rng rng(key);
  std::vector<double> scores(vocab_size_);
  for (double& s : scores) s = rng.uniform();
  return scores;
}

ModeRanker::ModeRanker(std::size_t vocab_size, const FrequencyTables& tables)
    : vocab_size_(vocab_size), modal_(0) {
  std::uint64_t best = 0;
  bool found = false;
  for (IngredientId id = 0; id < vocab_size; ++id) {
    const std::uint64_t count = tables.target_count(id);
    if (count > best) {  // ties resolve to the smallest id by scan order
      best = count;
      modal_ = id;
      found = true;
    }
  }
  check_invariant(found, "ModeRanker: no targets in the tables");
}

std::vector<double> ModeRanker::rank(const RankedQuery&) const {
  std::vector<double> scores(vocab_size_, 0.0);
  scores[modal_] = 1.0;
  return scores;
}

std::vector<double> FreqRanker::rank(const RankedQuery&) const {
  std::vector<double> scores(vocab_size_, 0.0);
  for (const auto& [target, count] : tables_.target_counts) {
    scores[target] = static_cast<double>(count);
  }
  return scores;
}

std::vector<double> LtRanker::rank(const RankedQuery& query) const {
  std::vector<double> scores(vocab_size_, 0.0);
  for (IngredientId v = 0; v < vocab_size_; ++v) {
    if (tables_.pair_count(query.query.source, v) > 0) scores[v] = 1.0;
  }
  return scores;
}

std::vector<double> LtFreqRanker::rank(const RankedQuery& query) const {
  std::vector<double> scores(vocab_size_, 0.0);
  for (IngredientId v = 0; v < vocab_size_; ++v) {
    scores[v] = static_cast<double>(tables_.pair_count(query.query.source, v));
  }
  return scores;
}

SimilarityMetric parse_metric(const std::string& s) {
  if (s == "cosine") return SimilarityMetric::Cosine;
  if (s == "euclidean") return SimilarityMetric::Euclidean;
  throw FormatError("unknown similarity metric: \"" + s + "\"");
}

EmbeddingMatrix load_embedding_matrix(const std::string& matrix_path,
                                      const std::string& sidecar_path,
                                      const Vocabulary& vocab, SimilarityMetric metric) {
  const Matrix raw = load_matrix(matrix_path);
  const auto index = load_row_index(sidecar_path);
  Matrix ordered(vocab.size(), raw.cols());
  for (IngredientId id = 0; id < vocab.size(); ++id) {
    auto it = index.find(vocab.name(id));
    require(it != index.end(),
            sidecar_path + ": no row for ingredient \"" + vocab.name(id) + "\"");
    require(it->second < raw.rows(), sidecar_path + ": row " + std::to_string(it->second) +
                                         " out of range for \"" + vocab.name(id) + "\"");
    std::copy_n(raw.row(it->second), raw.cols(), ordered.row(id));
  }
  require(ordered.all_finite(), matrix_path + ": embedding matrix has non-finite entries");
  return EmbeddingMatrix{std::move(ordered), metric};
}

std::vector<double> EmbeddingRanker::rank(const RankedQuery& query) const {
  const Matrix& e = embedding_.vectors;
  const IngredientId s = query.query.source;
  check_invariant(s < e.rows(), "EmbeddingRanker: source row missing");
  const double* src = e.row(s);
  const std::size_t dim = e.cols();
  std::vector<double> scores(e.rows(), 0.0);
  if (embedding_.metric == SimilarityMetric::Cosine) {
    double src_norm = 0.0;
    for (std::size_t c = 0; c < dim; ++c) src_norm += src[c] * src[c];
    src_norm = std::sqrt(src_norm);
    for (std::size_t v = 0; v < e.rows(); ++v) {
      const double* row = e.row(v);
      double dot = 0.0, norm = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        dot += src[c] * row[c];
        norm += row[c] * row[c];
      }
      norm = std::sqrt(norm);
      scores[v] = (src_norm > 0.0 && norm > 0.0) ? dot / (src_norm * norm) : 0.0;
    }
  } else {
    for (std::size_t v = 0; v < e.rows(); ++v) {
      const double* row = e.row(v);
      double dist2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = src[c] - row[c];
        dist2 += diff * diff;
      }
      scores[v] = -std::sqrt(dist2);
    }
  }
  return scores;
}

}  // namespace gismo
