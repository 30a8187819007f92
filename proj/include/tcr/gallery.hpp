#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tcr/embedding.hpp"
#include "tcr/matrix.hpp"

namespace tcr {

// Immutable gallery embedding set with stable item identifiers. Rows must be
// unit norm; construction validates, from_raw normalizes first.
class GalleryStore {
 public:
  GalleryStore(Matrix embeddings, std::vector<std::string> ids);

  static GalleryStore from_raw(const Matrix& raw, std::vector<std::string> ids);

  std::size_t size() const noexcept { return embeddings_.rows(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }
  const Matrix& embeddings() const noexcept { return embeddings_; }
  std::span<const double> row(std::size_t i) const { return embeddings_.row(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }

  // Gallery embeddings viewed as an EmbeddingBatch.
  EmbeddingBatch as_batch() const { return EmbeddingBatch(embeddings_, Modality::gallery); }

  std::vector<double> mean() const { return column_mean(embeddings_); }

 private:
  Matrix embeddings_;
  std::vector<std::string> ids_;
};

// Per-query nearest gallery items: indices plus their embedding rows.
struct CandidateSet {
  std::vector<std::size_t> indices;  // length B, duplicates permitted
  Matrix embeddings;                 // B x D, row i = gallery row indices[i]

  std::size_t size() const noexcept { return indices.size(); }
  std::vector<double> mean() const { return column_mean(embeddings); }
};

// Index of the most similar gallery row by dot product; ties break to the
// lowest index. Throws EmptyGallery / DimensionMismatch.
std::size_t nearest(const GalleryStore& store, std::span<const double> query);

// Row-wise nearest-neighbor selection for a whole query batch.
CandidateSet select_candidates(const GalleryStore& store, const EmbeddingBatch& batch);

// B x B predictions of each query over the batch's selected candidates.
PredictionMatrix refined_predict(const EmbeddingBatch& batch, const CandidateSet& cands,
                                 double temperature);

}  // namespace tcr
