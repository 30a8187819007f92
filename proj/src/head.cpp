#include "tcr/head.hpp"

#include <cmath>

#include "tcr/errors.hpp"

namespace tcr {

AdaptationHead AdaptationHead::identity(std::size_t dim) {
  AdaptationHead head;
  head.gamma.assign(dim, 1.0);
  head.beta.assign(dim, 0.0);
  return head;
}

GradientVector backprop_head(const AdaptationHead& head, const Matrix& raw, const Matrix& dz) {
  if (raw.cols() != head.dim() || dz.rows() != raw.rows() || dz.cols() != raw.cols()) {
    throw DimensionMismatchError("gradient shape does not match raw rows and head width");
  }
  GradientVector grad;
  grad.d_gamma.assign(head.dim(), 0.0);
  grad.d_beta.assign(head.dim(), 0.0);
  std::vector<double> u(raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto r = raw.row(i);
    double sq = 0.0;
    for (std::size_t d = 0; d < raw.cols(); ++d) {
      u[d] = head.gamma[d] * r[d] + head.beta[d];
      sq += u[d] * u[d];
    }
    const double n = std::sqrt(sq);
    if (n < kZeroNormThreshold) {
      throw ZeroVectorError("transformed embedding collapsed to zero");
    }
    const auto g = dz.row(i);
    double zdot = 0.0;
    for (std::size_t d = 0; d < raw.cols(); ++d) {
      zdot += (u[d] / n) * g[d];
    }
    for (std::size_t d = 0; d < raw.cols(); ++d) {
      const double du = (g[d] - zdot * (u[d] / n)) / n;
      grad.d_gamma[d] += du * r[d];
      grad.d_beta[d] += du;
    }
  }
  return grad;
}

EmbeddingBatch apply_head(const AdaptationHead& head, const Matrix& raw, Modality tag) {
  if (raw.cols() != head.dim()) {
    throw DimensionMismatchError("head width does not match embedding dimension");
  }
  Matrix out(raw.rows(), raw.cols());
  std::vector<double> u(raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto r = raw.row(i);
    for (std::size_t d = 0; d < raw.cols(); ++d) {
      u[d] = head.gamma[d] * r[d] + head.beta[d];
    }
    const EmbeddingVector z = l2_normalize(u);
    for (std::size_t d = 0; d < raw.cols(); ++d) {
      out.at(i, d) = z.values()[d];
    }
  }
  return EmbeddingBatch(std::move(out), tag);
}

}  // namespace tcr
