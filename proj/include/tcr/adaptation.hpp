#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcr/constraints.hpp"
#include "tcr/gallery.hpp"
#include "tcr/head.hpp"
#include "tcr/metrics.hpp"
#include "tcr/objectives.hpp"
#include "tcr/report.hpp"

namespace tcr {

// Adam with decoupled weight decay. The decay anchor is the identity head
// (gamma = 1, beta = 0), so a zero gradient never moves the parameters.
struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  explicit AdamWState(std::size_t dim);

  void reset();

  std::vector<double> m_gamma;
  std::vector<double> v_gamma;
  std::vector<double> m_beta;
  std::vector<double> v_beta;
  long step_count = 0;
};

// One optimizer update in place. learning_rate = 0 leaves the head bitwise
// unchanged.
void adamw_step(AdaptationHead& head, AdamWState& state, const GradientVector& grad,
                const AdamWConfig& config);

// Knobs for one pass over a query stream. queue_capacity = 0 means
// batch_size.
struct StreamConfig {
  std::size_t batch_size = 64;
  int tta_steps = 1;
  double temperature = 0.02;
  double uniformity_t = 10.0;
  double source_like_fraction = 0.3;
  std::size_t queue_capacity = 0;
  int queue_update_budget = 10;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  bool reset_optimizer_per_batch = false;
  bool stop_gradient_center = false;
  double tent_temperature = 0.01;
  double lambda_scale = 2.0;
  std::optional<double> lambda_offset_override;

  std::size_t effective_queue_capacity() const {
    return queue_capacity == 0 ? batch_size : queue_capacity;
  }
};

// Throws ConfigError when a field is outside its stated range.
void validate(const StreamConfig& config);

// Outcome of adapting one batch: predictions and embeddings computed from
// the post-update head, plus the losses of the last inner step.
struct BatchResult {
  PredictionMatrix refined;
  EmbeddingBatch adapted;
  CandidateSet candidates;
  LossBreakdown losses;
  std::optional<SourceConstraints> constraints;
};

// One batch of the trained loop: eta inner steps, each re-applying the head,
// re-selecting candidates and taking one optimizer update; the queue is
// consulted every step but mutated only at the first. Head, optimizer state
// and queue are updated in place.
BatchResult adapt_batch(AdaptationHead& head, AdamWState& state, ConstraintQueue& queue,
                        const Matrix& raw_batch, const GalleryStore& gallery,
                        const StreamConfig& config);

// A query stream: raw (not necessarily normalized) embeddings plus ids
// aligned with the rows.
struct StreamInput {
  Matrix raw_queries;
  std::vector<std::string> query_ids;
};

// Head plus optimizer moments, the unit of checkpoint/resume. A
// default-constructed value is sized lazily on first use.
struct AdaptationState {
  AdaptationState() : optimizer(0) {}
  explicit AdaptationState(std::size_t dim)
      : head(AdaptationHead::identity(dim)), optimizer(dim) {}

  AdaptationHead head;
  AdamWState optimizer;
};

// Full trained pass in arrival order, batches of at most batch_size.
// Recall is computed from full-gallery rankings of the adapted embeddings.
// A non-null state is the starting point and receives the final state back
// (resume semantics); null starts from the identity head.
RetrievalReport run_stream(const StreamInput& input, const GalleryStore& gallery,
                           const TruthMap& truth, const StreamConfig& config,
                           AdaptationState* state = nullptr);

// Entropy-minimization baseline: same loop shape, objective = mean entropy
// of full-gallery predictions at tent_temperature. The trajectory records
// that loss in LossBreakdown.total.
RetrievalReport tent_baseline(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth, const StreamConfig& config,
                              AdaptationState* state = nullptr);

// No adaptation: normalize the raw queries and evaluate retrieval.
RetrievalReport evaluate_base(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth);

// Shared evaluation used by every mode.
RetrievalReport evaluate_batchwise(const EmbeddingBatch& queries,
                                   const std::vector<std::string>& query_ids,
                                   const GalleryStore& gallery, const TruthMap& truth);

}  // namespace tcr
