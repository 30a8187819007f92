#include "tcr/gallery.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "tcr/errors.hpp"

namespace tcr {

GalleryStore::GalleryStore(Matrix embeddings, std::vector<std::string> ids)
    : embeddings_(std::move(embeddings)), ids_(std::move(ids)) {
  if (embeddings_.rows() == 0) {
    throw EmptyGalleryError("gallery must hold at least one item");
  }
  if (ids_.size() != embeddings_.rows()) {
    throw SizeMismatchError("gallery ids do not match embedding count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) {
      throw DuplicateIdError("duplicate gallery id: " + id);
    }
  }
  for (std::size_t i = 0; i < embeddings_.rows(); ++i) {
    if (std::abs(norm(embeddings_.row(i)) - 1.0) > kUnitNormTolerance) {
      throw InvalidDistributionError("gallery row " + std::to_string(i) + " is not unit norm");
    }
  }
}

GalleryStore GalleryStore::from_raw(const Matrix& raw, std::vector<std::string> ids) {
  if (raw.rows() == 0) {
    throw EmptyGalleryError("gallery must hold at least one item");
  }
  return GalleryStore(normalize_rows(raw), std::move(ids));
}

std::size_t nearest(const GalleryStore& store, std::span<const double> query) {
  if (store.size() == 0) {
    throw EmptyGalleryError("nearest: empty gallery");
  }
  if (query.size() != store.dim()) {
    throw DimensionMismatchError("nearest: query dimension mismatch");
  }
  std::size_t best = 0;
  double best_sim = dot(query, store.row(0));
  for (std::size_t j = 1; j < store.size(); ++j) {
    const double sim = dot(query, store.row(j));
    if (sim > best_sim) {
      best_sim = sim;
      best = j;
    }
  }
  return best;
}

CandidateSet select_candidates(const GalleryStore& store, const EmbeddingBatch& batch) {
  if (batch.dim() != store.dim()) {
    throw DimensionMismatchError("select_candidates: dimension mismatch");
  }
  CandidateSet cands;
  cands.indices.resize(batch.size());
  cands.embeddings = Matrix(batch.size(), store.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = nearest(store, batch.row(i));
    cands.indices[i] = j;
    const auto src = store.row(j);
    auto dst = cands.embeddings.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return cands;
}

PredictionMatrix refined_predict(const EmbeddingBatch& batch, const CandidateSet& cands,
                                 double temperature) {
  if (cands.size() != batch.size()) {
    throw SizeMismatchError("refined_predict: candidate count must equal batch size");
  }
  if (cands.embeddings.cols() != batch.dim()) {
    throw DimensionMismatchError("refined_predict: dimension mismatch");
  }
  Matrix sims(batch.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto qi = batch.row(i);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      sims.at(i, j) = dot(qi, cands.embeddings.row(j));
    }
  }
  return softmax_predict(sims, temperature);
}

}  // namespace tcr
