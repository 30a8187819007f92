#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tcr/constraints.hpp"
#include "tcr/embedding.hpp"
#include "tcr/gallery.hpp"
#include "tcr/head.hpp"
#include "tcr/matrix.hpp"

namespace tcr {

// Loss terms for one batch. `gap` and `noise` are zero until the queue has
// produced constraints.
struct LossBreakdown {
  double uniformity = 0.0;
  double gap = 0.0;
  double noise = 0.0;
  double total = 0.0;
};

// Mean of exp(-||z_i - mean|| / t) over the batch. Pushes rows apart; equals
// 1 when the batch has collapsed onto its mean.
double uniformity_loss(const EmbeddingBatch& batch, double t);

// Distance between the batch mean and the candidate mean.
double compute_delta_t(const EmbeddingBatch& batch, const CandidateSet& cands);

// Squared deviation of the current gap from the source gap estimate.
double gap_loss(double delta_t, double delta_s);

// Entropy-weighted average with weights max(1 - E_i / e_m, 0). Rows at or
// above the threshold are ignored; if every weight is zero the loss is zero.
double noise_robust_loss(std::span<const double> entropies, double e_m);

// All loss terms for an adapted batch against its candidate set. The noise
// term needs refined predictions and is computed internally. A missing
// constraint estimate (or a non-positive entropy threshold) disables the gap
// and noise terms.
LossBreakdown total_loss(const EmbeddingBatch& batch, const CandidateSet& cands,
                         const std::optional<SourceConstraints>& constraints,
                         double temperature, double uniformity_t);

// Gradient of row entropy with respect to the embedding the similarity row
// was computed from: sum_j -p_j (ln p_j + E) * ref_j / temperature.
std::vector<double> entropy_embedding_gradient(std::span<const double> p_row,
                                               const Matrix& refs, double temperature);

// Analytic gradient of total_loss with respect to gamma and beta, treating
// the candidate set and the constraint estimates as constants.
// `stop_gradient_center` drops the dependence of the batch mean on the rows
// in the uniformity term.
GradientVector total_loss_gradient(const AdaptationHead& head, const Matrix& raw,
                                   const CandidateSet& cands,
                                   const std::optional<SourceConstraints>& constraints,
                                   double temperature, double uniformity_t,
                                   bool stop_gradient_center = false);

}  // namespace tcr
