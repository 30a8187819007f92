#include "tcr/objectives.hpp"

#include <cmath>

#include "tcr/errors.hpp"

namespace tcr {

double uniformity_loss(const EmbeddingBatch& batch, double t) {
  if (!(t > 0.0)) {
    throw ConfigError("uniformity scale must be positive");
  }
  const std::vector<double> center = batch.mean();
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += std::exp(-distance(batch.row(i), center) / t);
  }
  return sum / static_cast<double>(batch.size());
}

double compute_delta_t(const EmbeddingBatch& batch, const CandidateSet& cands) {
  if (cands.size() != batch.size()) {
    throw SizeMismatchError("candidate set size must match batch size");
  }
  return distance(batch.mean(), cands.mean());
}

double gap_loss(double delta_t, double delta_s) {
  const double diff = delta_t - delta_s;
  return diff * diff;
}

double noise_robust_loss(std::span<const double> entropies, double e_m) {
  if (!(e_m > 0.0)) {
    throw NonPositiveThresholdError("entropy threshold must be positive");
  }
  double weighted = 0.0;
  std::size_t nonzero = 0;
  for (const double e : entropies) {
    const double s = std::max(1.0 - e / e_m, 0.0);
    if (s > 0.0) {
      weighted += s * e;
      nonzero += 1;
    }
  }
  if (nonzero == 0) {
    return 0.0;
  }
  return weighted / static_cast<double>(nonzero);
}

LossBreakdown total_loss(const EmbeddingBatch& batch, const CandidateSet& cands,
                         const std::optional<SourceConstraints>& constraints,
                         double temperature, double uniformity_t) {
  LossBreakdown out;
  out.uniformity = uniformity_loss(batch, uniformity_t);
  if (constraints) {
    out.gap = gap_loss(compute_delta_t(batch, cands), constraints->delta_s);
    if (constraints->e_m > 0.0) {
      const PredictionMatrix preds = refined_predict(batch, cands, temperature);
      const std::vector<double> entropies = row_entropies(preds);
      out.noise = noise_robust_loss(entropies, constraints->e_m);
    }
  }
  out.total = out.uniformity + out.gap + out.noise;
  return out;
}

std::vector<double> entropy_embedding_gradient(std::span<const double> p_row,
                                               const Matrix& refs, double temperature) {
  if (p_row.size() != refs.rows()) {
    throw SizeMismatchError("prediction row length must match reference count");
  }
  double ent = 0.0;
  for (const double p : p_row) {
    if (p > 0.0) {
      ent -= p * std::log(p);
    }
  }
  std::vector<double> grad(refs.cols(), 0.0);
  for (std::size_t j = 0; j < refs.rows(); ++j) {
    const double p = p_row[j];
    if (p <= 0.0) {
      continue;
    }
    const double coef = -p * (std::log(p) + ent) / temperature;
    const auto ref = refs.row(j);
    for (std::size_t d = 0; d < refs.cols(); ++d) {
      grad[d] += coef * ref[d];
    }
  }
  return grad;
}

GradientVector total_loss_gradient(const AdaptationHead& head, const Matrix& raw,
                                   const CandidateSet& cands,
                                   const std::optional<SourceConstraints>& constraints,
                                   double temperature, double uniformity_t,
                                   bool stop_gradient_center) {
  if (raw.cols() != head.dim()) {
    throw DimensionMismatchError("head width does not match embedding dimension");
  }
  if (!(uniformity_t > 0.0)) {
    throw ConfigError("uniformity scale must be positive");
  }
  const std::size_t b = raw.rows();
  const std::size_t dim = raw.cols();
  const double bf = static_cast<double>(b);

  // Forward pass through the head, keeping the pre-normalization norms.
  Matrix z(b, dim);
  std::vector<double> norms(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto r = raw.row(i);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double u = head.gamma[d] * r[d] + head.beta[d];
      z.at(i, d) = u;
      sq += u * u;
    }
    const double n = std::sqrt(sq);
    if (n < kZeroNormThreshold) {
      throw ZeroVectorError("transformed embedding collapsed to zero");
    }
    norms[i] = n;
    for (std::size_t d = 0; d < dim; ++d) {
      z.at(i, d) /= n;
    }
  }
  const std::vector<double> center = column_mean(z);

  Matrix dz(b, dim, 0.0);

  // Uniformity term. v_i is the unit offset from the center; a row sitting
  // exactly on the center takes the zero subgradient.
  {
    Matrix v(b, dim, 0.0);
    std::vector<double> w(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double off = z.at(i, d) - center[d];
        v.at(i, d) = off;
        sq += off * off;
      }
      const double dist_i = std::sqrt(sq);
      w[i] = std::exp(-dist_i / uniformity_t);
      if (dist_i < kZeroNormThreshold) {
        for (std::size_t d = 0; d < dim; ++d) {
          v.at(i, d) = 0.0;
        }
      } else {
        for (std::size_t d = 0; d < dim; ++d) {
          v.at(i, d) /= dist_i;
        }
      }
    }
    std::vector<double> wv_mean(dim, 0.0);
    if (!stop_gradient_center) {
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
          wv_mean[d] += w[i] * v.at(i, d);
        }
      }
      for (std::size_t d = 0; d < dim; ++d) {
        wv_mean[d] /= bf;
      }
    }
    const double scale = -1.0 / (bf * uniformity_t);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        dz.at(i, d) += scale * (w[i] * v.at(i, d) - wv_mean[d]);
      }
    }
  }

  if (constraints) {
    // Gap term. Every row moves the batch mean with weight 1/B.
    if (cands.size() != b) {
      throw SizeMismatchError("candidate set size must match batch size");
    }
    const std::vector<double> g_mean = cands.mean();
    std::vector<double> dir(dim, 0.0);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      dir[d] = center[d] - g_mean[d];
      sq += dir[d] * dir[d];
    }
    const double delta_t = std::sqrt(sq);
    if (delta_t > kZeroNormThreshold) {
      const double coef = 2.0 * (delta_t - constraints->delta_s) / (delta_t * bf);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
          dz.at(i, d) += coef * dir[d];
        }
      }
    }

    // Noise term. The count of active rows is held constant, matching the
    // forward evaluation.
    if (constraints->e_m > 0.0) {
      const EmbeddingBatch batch(z, Modality::query);
      const PredictionMatrix preds = refined_predict(batch, cands, temperature);
      const std::vector<double> entropies = row_entropies(preds);
      std::size_t nonzero = 0;
      for (const double e : entropies) {
        if (std::max(1.0 - e / constraints->e_m, 0.0) > 0.0) {
          nonzero += 1;
        }
      }
      if (nonzero > 0) {
        for (std::size_t i = 0; i < b; ++i) {
          const double e = entropies[i];
          const double s = std::max(1.0 - e / constraints->e_m, 0.0);
          if (s <= 0.0) {
            continue;
          }
          const double upstream =
              (s + e * (-1.0 / constraints->e_m)) / static_cast<double>(nonzero);
          const std::vector<double> de_dz =
              entropy_embedding_gradient(preds.row(i), cands.embeddings, temperature);
          for (std::size_t d = 0; d < dim; ++d) {
            dz.at(i, d) += upstream * de_dz[d];
          }
        }
      }
    }
  }

  // Normalization backprop, then the affine head.
  GradientVector grad;
  grad.d_gamma.assign(dim, 0.0);
  grad.d_beta.assign(dim, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double zdot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      zdot += z.at(i, d) * dz.at(i, d);
    }
    const auto r = raw.row(i);
    for (std::size_t d = 0; d < dim; ++d) {
      const double du = (dz.at(i, d) - zdot * z.at(i, d)) / norms[i];
      grad.d_gamma[d] += du * r[d];
      grad.d_beta[d] += du;
    }
  }
  return grad;
}

}  // namespace tcr
