#include "tcr/untrained.hpp"

#include <algorithm>
#include <cmath>

#include "tcr/constraints.hpp"
#include "tcr/errors.hpp"
#include "tcr/metrics.hpp"

namespace tcr {

Matrix scale_rows_about_mean(const Matrix& rows, double lambda) {
  if (!(lambda > 0.0)) {
    throw ConfigError("scale coefficient must be positive");
  }
  if (lambda == 1.0) {
    return rows;
  }
  const std::vector<double> mean = column_mean(rows);
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto r = rows.row(i);
    for (std::size_t d = 0; d < rows.cols(); ++d) {
      out.at(i, d) = mean[d] + lambda * (r[d] - mean[d]);
    }
  }
  return out;
}

Matrix offset_rows(const Matrix& rows, std::span<const double> direction, double lambda) {
  if (direction.size() != rows.cols()) {
    throw DimensionMismatchError("offset direction length does not match row width");
  }
  if (lambda == 0.0) {
    return rows;
  }
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto r = rows.row(i);
    for (std::size_t d = 0; d < rows.cols(); ++d) {
      out.at(i, d) = r[d] - lambda * direction[d];
    }
  }
  return out;
}

EmbeddingBatch scale_uniformity(const EmbeddingBatch& batch, double lambda_scale) {
  if (lambda_scale == 1.0) {
    return batch;
  }
  const Matrix scaled = scale_rows_about_mean(batch.matrix(), lambda_scale);
  return EmbeddingBatch::normalized(scaled, batch.modality());
}

EmbeddingBatch rectify_gap(const EmbeddingBatch& batch, const CandidateSet& cands,
                           double delta_s) {
  if (delta_s < 0.0) {
    throw ConfigError("target gap must be non-negative");
  }
  const std::vector<double> q_mean = batch.mean();
  const std::vector<double> g_mean = cands.mean();
  std::vector<double> direction(q_mean.size());
  for (std::size_t d = 0; d < direction.size(); ++d) {
    direction[d] = q_mean[d] - g_mean[d];
  }
  const double delta_t = norm(direction);
  if (delta_t <= kZeroNormThreshold) {
    return batch;
  }
  const double lambda_offset = 1.0 - delta_s / delta_t;
  if (lambda_offset == 0.0) {
    return batch;
  }
  const Matrix moved = offset_rows(batch.matrix(), direction, lambda_offset);
  return EmbeddingBatch::normalized(moved, batch.modality());
}

RetrievalReport run_untrained(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth, const StreamConfig& config) {
  validate(config);
  if (input.raw_queries.rows() == 0) {
    throw SizeMismatchError("query stream is empty");
  }
  if (input.raw_queries.rows() != input.query_ids.size()) {
    throw SizeMismatchError("query ids do not match query rows");
  }
  if (input.raw_queries.cols() != gallery.dim()) {
    throw DimensionMismatchError("query and gallery dimensions differ");
  }
  const std::size_t n = input.raw_queries.rows();
  const std::size_t dim = input.raw_queries.cols();
  ConstraintQueue queue(config.effective_queue_capacity(), config.queue_update_budget);
  std::vector<std::vector<std::string>> ranked;
  ranked.reserve(n);
  Matrix adapted_all(n, dim);
  std::size_t filled = 0;
  std::vector<TrajectoryPoint> trajectory;
  const EmbeddingBatch gal = gallery.as_batch();
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(begin + config.batch_size, n);
    const Matrix raw = slice_rows(input.raw_queries, begin, end);
    const EmbeddingBatch batch = EmbeddingBatch::normalized(raw, Modality::query);
    const CandidateSet cands = select_candidates(gallery, batch);
    const PredictionMatrix preds = refined_predict(batch, cands, config.temperature);
    const std::vector<double> entropies = row_entropies(preds);
    const std::vector<PairRecord> pairs = make_pair_records(batch, cands, entropies);
    update_queue(queue, select_source_like(pairs, config.source_like_fraction));

    EmbeddingBatch adapted = scale_uniformity(batch, config.lambda_scale);
    if (config.lambda_offset_override) {
      const double lo = *config.lambda_offset_override;
      if (lo != 0.0) {
        const std::vector<double> q_mean = adapted.mean();
        const std::vector<double> g_mean = cands.mean();
        std::vector<double> direction(dim);
        for (std::size_t d = 0; d < dim; ++d) {
          direction[d] = q_mean[d] - g_mean[d];
        }
        adapted = EmbeddingBatch::normalized(offset_rows(adapted.matrix(), direction, lo),
                                             Modality::query);
      }
    } else {
      const double delta_s = estimate_gap(queue);
      adapted = rectify_gap(adapted, cands, delta_s);
    }

    const auto idx = top_k_indices(adapted, gallery, 10);
    auto ids = rank_ids(idx, gallery);
    const std::vector<std::string> batch_ids(
        input.query_ids.begin() + static_cast<std::ptrdiff_t>(begin),
        input.query_ids.begin() + static_cast<std::ptrdiff_t>(end));
    TrajectoryPoint point;
    point.batch_index = batch_index;
    point.recall_at_1 = recall_at_k(batch_ids, ids, truth, 1);
    point.uniformity = uniformity(adapted);
    point.gap = modality_gap(adapted, gal);
    trajectory.push_back(point);
    for (auto& r : ids) {
      ranked.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < adapted.size(); ++i) {
      const auto row = adapted.row(i);
      for (std::size_t d = 0; d < dim; ++d) {
        adapted_all.at(filled, d) = row[d];
      }
      filled += 1;
    }
    batch_index += 1;
  }
  RetrievalReport report;
  for (const std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
    report.recall_at[k] = recall_at_k(input.query_ids, ranked, truth, k);
  }
  const EmbeddingBatch all(adapted_all, Modality::query);
  report.uniformity_query = uniformity(all);
  report.uniformity_gallery = uniformity(gal);
  report.modality_gap = modality_gap(all, gal);
  report.per_batch_trajectory = std::move(trajectory);
  if (!queue.empty()) {
    report.constraints = current_constraints(queue);
  }
  report.queue_updates = queue.update_count();
  return report;
}

}  // namespace tcr
