#pragma once

#include <cstddef>
#include <vector>

#include "tcr/embedding.hpp"
#include "tcr/matrix.hpp"

namespace tcr {

// Per-dimension affine transform applied to raw query embeddings before
// renormalization. Identity at gamma = 1, beta = 0.
struct AdaptationHead {
  std::vector<double> gamma;
  std::vector<double> beta;

  static AdaptationHead identity(std::size_t dim);
  std::size_t dim() const noexcept { return gamma.size(); }
};

// Rows of `raw` mapped through the head and renormalized onto the unit
// sphere. Throws DimensionMismatchError when widths differ and
// ZeroVectorError when a transformed row collapses.
EmbeddingBatch apply_head(const AdaptationHead& head, const Matrix& raw, Modality tag);

// Gradient of a scalar loss with respect to the head parameters.
struct GradientVector {
  std::vector<double> d_gamma;
  std::vector<double> d_beta;
};

// Chain rule through apply_head: dz holds the loss gradient with respect to
// the normalized output rows; the result is the gradient with respect to
// gamma and beta.
GradientVector backprop_head(const AdaptationHead& head, const Matrix& raw, const Matrix& dz);

}  // namespace tcr
