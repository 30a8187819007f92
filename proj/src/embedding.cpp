#include "tcr/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tcr/errors.hpp"

namespace tcr {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw DimensionMismatchError("embedding dimension must be at least 2");
  }
  if (!all_finite(std::span<const double>(values_))) {
    throw NonFiniteError("embedding has non-finite entries");
  }
  const double n = norm(values_);
  if (std::abs(n - 1.0) > kUnitNormTolerance) {
    throw InvalidDistributionError("embedding is not unit norm: " + std::to_string(n));
  }
}

EmbeddingVector l2_normalize(std::span<const double> v) {
  if (v.size() < 2) {
    throw DimensionMismatchError("l2_normalize: need at least 2 entries");
  }
  if (!all_finite(v)) {
    throw NonFiniteError("l2_normalize: non-finite input");
  }
  const double n = norm(v);
  if (n < kZeroNormThreshold) {
    throw ZeroVectorError("l2_normalize: norm below 1e-12");
  }
  std::vector<double> out(v.size());
  const double inv = 1.0 / n;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return EmbeddingVector(std::move(out));
}

Matrix normalize_rows(const Matrix& raw) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto unit = l2_normalize(raw.row(i));
    auto dst = out.row(i);
    std::copy(unit.values().begin(), unit.values().end(), dst.begin());
  }
  return out;
}

EmbeddingBatch::EmbeddingBatch(Matrix rows, Modality tag)
    : rows_(std::move(rows)), modality_(tag) {
  if (rows_.rows() == 0) {
    throw SizeMismatchError("embedding batch must hold at least one row");
  }
  if (rows_.cols() < 2) {
    throw DimensionMismatchError("embedding dimension must be at least 2");
  }
  for (std::size_t i = 0; i < rows_.rows(); ++i) {
    const auto r = rows_.row(i);
    if (!all_finite(r)) {
      throw NonFiniteError("batch row " + std::to_string(i) + " has non-finite entries");
    }
    if (std::abs(norm(r) - 1.0) > kUnitNormTolerance) {
      throw InvalidDistributionError("batch row " + std::to_string(i) + " is not unit norm");
    }
  }
}

EmbeddingBatch EmbeddingBatch::normalized(const Matrix& raw, Modality tag) {
  return EmbeddingBatch(normalize_rows(raw), tag);
}

Matrix similarity_matrix(const EmbeddingBatch& q, const EmbeddingBatch& g) {
  if (q.dim() != g.dim()) {
    throw DimensionMismatchError("similarity_matrix: dimension mismatch");
  }
  Matrix sims(q.size(), g.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto qi = q.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) {
      sims.at(i, j) = dot(qi, g.row(j));
    }
  }
  return sims;
}

PredictionMatrix::PredictionMatrix(Matrix probs, double temperature)
    : probs_(std::move(probs)), temperature_(temperature) {
  if (temperature_ <= 0.0) {
    throw NonPositiveTemperatureError("prediction temperature must be positive");
  }
  for (std::size_t i = 0; i < probs_.rows(); ++i) {
    double sum = 0.0;
    for (double p : probs_.row(i)) {
      if (p < 0.0 || p > 1.0 + 1e-12) {
        throw InvalidDistributionError("prediction entry outside [0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kUnitNormTolerance) {
      throw InvalidDistributionError("prediction row does not sum to 1");
    }
  }
}

PredictionMatrix softmax_predict(const Matrix& sims, double temperature) {
  if (temperature <= 0.0) {
    throw NonPositiveTemperatureError("softmax_predict: temperature must be positive");
  }
  Matrix probs(sims.rows(), sims.cols());
  for (std::size_t i = 0; i < sims.rows(); ++i) {
    const auto row = sims.row(i);
    double max_logit = row[0];
    for (double s : row) max_logit = std::max(max_logit, s);
    double sum = 0.0;
    auto out = probs.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      out[j] = std::exp((row[j] - max_logit) / temperature);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < row.size(); ++j) out[j] *= inv;
  }
  return PredictionMatrix(std::move(probs), temperature);
}

double entropy(std::span<const double> row) {
  double sum = 0.0;
  for (double p : row) {
    if (p < 0.0) {
      throw InvalidDistributionError("entropy: negative probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-4) {
    throw InvalidDistributionError("entropy: probabilities sum to " + std::to_string(sum));
  }
  double h = 0.0;
  for (double p : row) {
    if (p > 0.0) h -= p * std::log(p);
  }
  // Tiny negative values can appear from cancellation on one-hot rows.
  return h < 0.0 ? 0.0 : h;
}

std::vector<double> row_entropies(const PredictionMatrix& preds) {
  std::vector<double> out(preds.rows());
  for (std::size_t i = 0; i < preds.rows(); ++i) out[i] = entropy(preds.row(i));
  return out;
}

}  // namespace tcr
