#include "tcr/adaptation.hpp"

#include <algorithm>
#include <cmath>

#include "tcr/errors.hpp"

namespace tcr {

AdamWState::AdamWState(std::size_t dim)
    : m_gamma(dim, 0.0), v_gamma(dim, 0.0), m_beta(dim, 0.0), v_beta(dim, 0.0) {}

void AdamWState::reset() {
  std::fill(m_gamma.begin(), m_gamma.end(), 0.0);
  std::fill(v_gamma.begin(), v_gamma.end(), 0.0);
  std::fill(m_beta.begin(), m_beta.end(), 0.0);
  std::fill(v_beta.begin(), v_beta.end(), 0.0);
  step_count = 0;
}

namespace {

void adamw_update(std::vector<double>& theta, std::vector<double>& m, std::vector<double>& v,
                  const std::vector<double>& g, const AdamWConfig& c, double anchor,
                  double bias1, double bias2) {
  for (std::size_t d = 0; d < theta.size(); ++d) {
    m[d] = c.beta1 * m[d] + (1.0 - c.beta1) * g[d];
    v[d] = c.beta2 * v[d] + (1.0 - c.beta2) * g[d] * g[d];
    const double m_hat = m[d] / bias1;
    const double v_hat = v[d] / bias2;
    theta[d] -= c.learning_rate *
                (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * (theta[d] - anchor));
  }
}

}  // namespace

void adamw_step(AdaptationHead& head, AdamWState& state, const GradientVector& grad,
                const AdamWConfig& config) {
  if (grad.d_gamma.size() != head.dim() || grad.d_beta.size() != head.dim() ||
      state.m_gamma.size() != head.dim()) {
    throw DimensionMismatchError("gradient and optimizer state must match the head width");
  }
  state.step_count += 1;
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step_count));
  adamw_update(head.gamma, state.m_gamma, state.v_gamma, grad.d_gamma, config, 1.0, bias1,
               bias2);
  adamw_update(head.beta, state.m_beta, state.v_beta, grad.d_beta, config, 0.0, bias1, bias2);
  if (!all_finite(head.gamma) || !all_finite(head.beta)) {
    throw NonFiniteError("head parameters left the finite range during an optimizer step");
  }
}

void validate(const StreamConfig& config) {
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (config.tta_steps < 1) throw ConfigError("tta_steps must be at least 1");
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(config.uniformity_t > 0.0)) throw ConfigError("uniformity_t must be positive");
  if (!(config.source_like_fraction > 0.0) || config.source_like_fraction > 1.0) {
    throw ConfigError("source_like_fraction must lie in (0, 1]");
  }
  if (config.queue_update_budget < 0) throw ConfigError("queue_update_budget must be >= 0");
  if (!(config.tent_temperature > 0.0)) throw ConfigError("tent_temperature must be positive");
  if (!(config.lambda_scale > 0.0)) throw ConfigError("lambda_scale must be positive");
  if (config.optimizer.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (config.optimizer.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

BatchResult adapt_batch(AdaptationHead& head, AdamWState& state, ConstraintQueue& queue,
                        const Matrix& raw_batch, const GalleryStore& gallery,
                        const StreamConfig& config) {
  if (raw_batch.rows() == 0) {
    throw SizeMismatchError("cannot adapt an empty batch");
  }
  if (config.reset_optimizer_per_batch) {
    state.reset();
  }
  LossBreakdown last_losses;
  std::optional<SourceConstraints> constraints;
  for (int step = 1; step <= config.tta_steps; ++step) {
    const EmbeddingBatch batch = apply_head(head, raw_batch, Modality::query);
    const CandidateSet cands = select_candidates(gallery, batch);
    const PredictionMatrix preds = refined_predict(batch, cands, config.temperature);
    const std::vector<double> entropies = row_entropies(preds);
    if (step == 1) {
      const std::vector<PairRecord> pairs = make_pair_records(batch, cands, entropies);
      const std::vector<PairRecord> source_like =
          select_source_like(pairs, config.source_like_fraction);
      update_queue(queue, source_like);
    }
    if (!queue.empty()) {
      constraints = current_constraints(queue);
    }
    last_losses =
        total_loss(batch, cands, constraints, config.temperature, config.uniformity_t);
    const GradientVector grad =
        total_loss_gradient(head, raw_batch, cands, constraints, config.temperature,
                            config.uniformity_t, config.stop_gradient_center);
    adamw_step(head, state, grad, config.optimizer);
  }
  EmbeddingBatch adapted = apply_head(head, raw_batch, Modality::query);
  CandidateSet cands = select_candidates(gallery, adapted);
  PredictionMatrix refined = refined_predict(adapted, cands, config.temperature);
  return BatchResult{std::move(refined), std::move(adapted), std::move(cands), last_losses,
                     constraints};
}

namespace {

constexpr std::size_t kRecallDepth = 10;

struct StreamAccumulator {
  std::vector<std::vector<std::string>> ranked;
  Matrix adapted_all;
  std::size_t filled = 0;

  StreamAccumulator(std::size_t count, std::size_t dim) : adapted_all(count, dim) {
    ranked.reserve(count);
  }

  // Batch-level rankings and rows folded into the stream-level buffers;
  // returns the batch's recall@1 for the trajectory.
  double absorb(const EmbeddingBatch& batch, const std::vector<std::string>& batch_ids,
                const GalleryStore& gallery, const TruthMap& truth) {
    const auto idx = top_k_indices(batch, gallery, kRecallDepth);
    auto ids = rank_ids(idx, gallery);
    const double r1 = recall_at_k(batch_ids, ids, truth, 1);
    for (auto& r : ids) {
      ranked.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto row = batch.row(i);
      for (std::size_t d = 0; d < batch.dim(); ++d) {
        adapted_all.at(filled, d) = row[d];
      }
      filled += 1;
    }
    return r1;
  }
};

void check_stream(const StreamInput& input, const GalleryStore& gallery) {
  if (input.raw_queries.rows() == 0) {
    throw SizeMismatchError("query stream is empty");
  }
  if (input.raw_queries.rows() != input.query_ids.size()) {
    throw SizeMismatchError("query ids do not match query rows");
  }
  if (input.raw_queries.cols() != gallery.dim()) {
    throw DimensionMismatchError("query and gallery dimensions differ");
  }
}

std::vector<std::string> ids_slice(const std::vector<std::string>& ids, std::size_t begin,
                                   std::size_t end) {
  return std::vector<std::string>(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                  ids.begin() + static_cast<std::ptrdiff_t>(end));
}

// Resolves the caller-provided state (resume) or the local fresh one.
AdaptationState* resolve_state(AdaptationState* provided, AdaptationState& local,
                               std::size_t dim) {
  AdaptationState* s = provided != nullptr ? provided : &local;
  if (s->head.dim() == 0) {
    *s = AdaptationState(dim);
  } else if (s->head.dim() != dim) {
    throw DimensionMismatchError("checkpointed head width does not match the stream");
  }
  return s;
}

RetrievalReport finish_report(StreamAccumulator& acc, const std::vector<std::string>& ids,
                              const GalleryStore& gallery, const TruthMap& truth) {
  RetrievalReport report;
  for (const std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
    report.recall_at[k] = recall_at_k(ids, acc.ranked, truth, k);
  }
  const EmbeddingBatch all(acc.adapted_all, Modality::query);
  const EmbeddingBatch gal = gallery.as_batch();
  report.uniformity_query = uniformity(all);
  report.uniformity_gallery = uniformity(gal);
  report.modality_gap = modality_gap(all, gal);
  return report;
}

}  // namespace

RetrievalReport run_stream(const StreamInput& input, const GalleryStore& gallery,
                           const TruthMap& truth, const StreamConfig& config,
                           AdaptationState* state) {
  validate(config);
  check_stream(input, gallery);
  const std::size_t n = input.raw_queries.rows();
  const std::size_t dim = input.raw_queries.cols();
  AdaptationState local;
  AdaptationState* s = resolve_state(state, local, dim);
  ConstraintQueue queue(config.effective_queue_capacity(), config.queue_update_budget);
  StreamAccumulator acc(n, dim);
  std::vector<TrajectoryPoint> trajectory;
  const EmbeddingBatch gal = gallery.as_batch();
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(begin + config.batch_size, n);
    const Matrix raw = slice_rows(input.raw_queries, begin, end);
    const std::vector<std::string> batch_ids = ids_slice(input.query_ids, begin, end);
    BatchResult result = adapt_batch(s->head, s->optimizer, queue, raw, gallery, config);
    TrajectoryPoint point;
    point.batch_index = batch_index;
    point.losses = result.losses;
    point.recall_at_1 = acc.absorb(result.adapted, batch_ids, gallery, truth);
    point.uniformity = uniformity(result.adapted);
    point.gap = modality_gap(result.adapted, gal);
    trajectory.push_back(point);
    batch_index += 1;
  }
  RetrievalReport report = finish_report(acc, input.query_ids, gallery, truth);
  report.per_batch_trajectory = std::move(trajectory);
  if (!queue.empty()) {
    report.constraints = current_constraints(queue);
  }
  report.queue_updates = queue.update_count();
  return report;
}

RetrievalReport tent_baseline(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth, const StreamConfig& config,
                              AdaptationState* state) {
  validate(config);
  check_stream(input, gallery);
  const std::size_t n = input.raw_queries.rows();
  const std::size_t dim = input.raw_queries.cols();
  AdaptationState local;
  AdaptationState* s = resolve_state(state, local, dim);
  StreamAccumulator acc(n, dim);
  std::vector<TrajectoryPoint> trajectory;
  const EmbeddingBatch gal = gallery.as_batch();
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(begin + config.batch_size, n);
    const Matrix raw = slice_rows(input.raw_queries, begin, end);
    const std::vector<std::string> batch_ids = ids_slice(input.query_ids, begin, end);
    if (config.reset_optimizer_per_batch) {
      s->optimizer.reset();
    }
    const double bf = static_cast<double>(raw.rows());
    double last_loss = 0.0;
    for (int step = 1; step <= config.tta_steps; ++step) {
      const EmbeddingBatch batch = apply_head(s->head, raw, Modality::query);
      const Matrix sims = similarity_matrix(batch, gal);
      const PredictionMatrix preds = softmax_predict(sims, config.tent_temperature);
      const std::vector<double> entropies = row_entropies(preds);
      double loss = 0.0;
      for (const double e : entropies) {
        loss += e;
      }
      last_loss = loss / bf;
      Matrix dz(raw.rows(), dim, 0.0);
      for (std::size_t i = 0; i < raw.rows(); ++i) {
        const std::vector<double> de_dz = entropy_embedding_gradient(
            preds.row(i), gallery.embeddings(), config.tent_temperature);
        for (std::size_t d = 0; d < dim; ++d) {
          dz.at(i, d) = de_dz[d] / bf;
        }
      }
      const GradientVector grad = backprop_head(s->head, raw, dz);
      adamw_step(s->head, s->optimizer, grad, config.optimizer);
    }
    const EmbeddingBatch adapted = apply_head(s->head, raw, Modality::query);
    TrajectoryPoint point;
    point.batch_index = batch_index;
    LossBreakdown losses;
    losses.total = last_loss;
    point.losses = losses;
    point.recall_at_1 = acc.absorb(adapted, batch_ids, gallery, truth);
    point.uniformity = uniformity(adapted);
    point.gap = modality_gap(adapted, gal);
    trajectory.push_back(point);
    batch_index += 1;
  }
  RetrievalReport report = finish_report(acc, input.query_ids, gallery, truth);
  report.per_batch_trajectory = std::move(trajectory);
  return report;
}

RetrievalReport evaluate_base(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth) {
  check_stream(input, gallery);
  const EmbeddingBatch queries = EmbeddingBatch::normalized(input.raw_queries, Modality::query);
  return evaluate_batchwise(queries, input.query_ids, gallery, truth);
}

RetrievalReport evaluate_batchwise(const EmbeddingBatch& queries,
                                   const std::vector<std::string>& query_ids,
                                   const GalleryStore& gallery, const TruthMap& truth) {
  if (queries.size() != query_ids.size()) {
    throw SizeMismatchError("query ids do not match query rows");
  }
  StreamAccumulator acc(queries.size(), queries.dim());
  acc.absorb(queries, query_ids, gallery, truth);
  return finish_report(acc, query_ids, gallery, truth);
}

}  // namespace tcr
