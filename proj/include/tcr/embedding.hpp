#pragma once

#include <span>
#include <vector>

#include "tcr/matrix.hpp"

namespace tcr {

enum class Modality { query, gallery };

// Tolerance for the unit-norm invariant on constructed embeddings.
inline constexpr double kUnitNormTolerance = 1e-6;

// Norm below which a vector is considered degenerate and rejected.
inline constexpr double kZeroNormThreshold = 1e-12;

// A single l2-normalized embedding. Construct through l2_normalize.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

 private:
  std::vector<double> values_;
};

// Normalizes v to unit length. Throws ZeroVectorError when the norm is
// below kZeroNormThreshold; a zero embedding is always an upstream bug.
EmbeddingVector l2_normalize(std::span<const double> v);

// Row-wise l2 normalization of a raw matrix.
Matrix normalize_rows(const Matrix& raw);

// A B x D block of unit-norm vectors for one modality.
class EmbeddingBatch {
 public:
  EmbeddingBatch(Matrix rows, Modality tag);

  // Builds a batch from un-normalized rows.
  static EmbeddingBatch normalized(const Matrix& raw, Modality tag);

  const Matrix& matrix() const noexcept { return rows_; }
  Modality modality() const noexcept { return modality_; }
  std::size_t size() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }

  // Batch mean of the unit rows; not re-normalized.
  std::vector<double> mean() const { return column_mean(rows_); }

 private:
  Matrix rows_;
  Modality modality_;
};

// Entry (i, j) = <q_i, g_j>. Throws DimensionMismatchError when D differs.
Matrix similarity_matrix(const EmbeddingBatch& q, const EmbeddingBatch& g);

// Row-stochastic matrix of temperature-scaled softmax predictions.
class PredictionMatrix {
 public:
  PredictionMatrix(Matrix probs, double temperature);

  const Matrix& probs() const noexcept { return probs_; }
  double temperature() const noexcept { return temperature_; }
  std::size_t rows() const noexcept { return probs_.rows(); }
  std::size_t cols() const noexcept { return probs_.cols(); }
  std::span<const double> row(std::size_t i) const { return probs_.row(i); }

 private:
  Matrix probs_;
  double temperature_;
};

// Row i = softmax(sims_i / temperature), computed with row-max subtraction.
// Throws NonPositiveTemperatureError when temperature <= 0.
PredictionMatrix softmax_predict(const Matrix& sims, double temperature);

// Shannon entropy -sum p log p (natural log, 0 log 0 := 0). Throws
// InvalidDistributionError when the row sum deviates from 1 by more than 1e-4.
double entropy(std::span<const double> row);

// Entropy of every row of a prediction matrix.
std::vector<double> row_entropies(const PredictionMatrix& preds);

}  // namespace tcr
