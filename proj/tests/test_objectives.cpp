#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "tcr/embedding.hpp"
#include "tcr/errors.hpp"
#include "tcr/gallery.hpp"
#include "tcr/head.hpp"
#include "tcr/objectives.hpp"
#include "tcr/rng.hpp"

using namespace tcr;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.at(i, j) = rng.normal();
  }
  return m;
}

GalleryStore random_gallery(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "g" + std::to_string(i);
  return GalleryStore(normalize_rows(random_matrix(n, d, rng)), std::move(ids));
}

AdaptationHead random_head(std::size_t d, Rng& rng) {
  AdaptationHead head = AdaptationHead::identity(d);
  for (std::size_t i = 0; i < d; ++i) {
    head.gamma[i] = 0.7 + 0.6 * rng.uniform();
    head.beta[i] = -0.2 + 0.4 * rng.uniform();
  }
  return head;
}

// Entropy threshold placed at the widest gap between sorted entropies, so
// finite-difference probes cannot push a row across the clamp.
double safe_threshold(std::vector<double> entropies) {
  std::sort(entropies.begin(), entropies.end());
  if (entropies.size() < 2 || entropies.back() - entropies.front() < 1e-6) {
    return entropies.back() + 1.0;
  }
  double best_lo = entropies.front();
  double best_gap = 0.0;
  for (std::size_t i = 0; i + 1 < entropies.size(); ++i) {
    const double gap = entropies[i + 1] - entropies[i];
    if (gap > best_gap) {
      best_gap = gap;
      best_lo = entropies[i];
    }
  }
  return best_lo + best_gap / 2.0;
}

double loss_at(const AdaptationHead& head, const Matrix& raw, const CandidateSet& cands,
               const std::optional<SourceConstraints>& cons, double tau, double t) {
  const EmbeddingBatch batch = apply_head(head, raw, Modality::query);
  return total_loss(batch, cands, cons, tau, t).total;
}

}  // namespace

TEST_CASE("uniformity_loss frozen values") {
  const EmbeddingBatch antipodal =
      EmbeddingBatch(Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}}), Modality::query);
  CHECK(uniformity_loss(antipodal, 10.0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
  const EmbeddingBatch collapsed =
      EmbeddingBatch(Matrix::from_rows({{0.0, 1.0}, {0.0, 1.0}}), Modality::query);
  CHECK(uniformity_loss(collapsed, 10.0) == 1.0);
  CHECK_THROWS_AS(uniformity_loss(antipodal, 0.0), ConfigError);
}

TEST_CASE("uniformity_loss stays in (0, 1] and is 1 only at collapse") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const EmbeddingBatch batch =
        EmbeddingBatch::normalized(random_matrix(6, 8, rng), Modality::query);
    const double value = uniformity_loss(batch, 10.0);
    CHECK(value > 0.0);
    CHECK(value <= 1.0);
    CHECK(value < 1.0);  // random rows never coincide
  }
}

TEST_CASE("gap_loss squared deviation") {
  CHECK(gap_loss(0.72, 0.67) == doctest::Approx(0.0025).epsilon(1e-12));
  CHECK(gap_loss(0.5, 0.5) == 0.0);
}

TEST_CASE("noise_robust_loss weights, zero rows, and errors") {
  const double e_m = 0.8;
  // Single entropy at half the threshold: weight 1/2, loss = e_m / 4.
  CHECK(noise_robust_loss(std::vector<double>{e_m / 2.0}, e_m) ==
        doctest::Approx(e_m / 4.0).epsilon(1e-12));
  // Rows at or above the threshold contribute nothing.
  CHECK(noise_robust_loss(std::vector<double>{e_m, e_m * 2.0}, e_m) == 0.0);
  // Mixed batch: only the active row is counted and normalized.
  CHECK(noise_robust_loss(std::vector<double>{e_m / 2.0, e_m * 3.0}, e_m) ==
        doctest::Approx(e_m / 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(noise_robust_loss(std::vector<double>{0.1}, 0.0), NonPositiveThresholdError);
  CHECK_THROWS_AS(noise_robust_loss(std::vector<double>{0.1}, -1.0), NonPositiveThresholdError);
}

TEST_CASE("total_loss without constraints is the uniformity term alone") {
  Rng rng(31);
  const Matrix raw = random_matrix(5, 6, rng);
  const EmbeddingBatch batch = EmbeddingBatch::normalized(raw, Modality::query);
  const GalleryStore gallery = random_gallery(12, 6, rng);
  const CandidateSet cands = select_candidates(gallery, batch);
  const LossBreakdown out = total_loss(batch, cands, std::nullopt, 0.02, 10.0);
  CHECK(out.gap == 0.0);
  CHECK(out.noise == 0.0);
  CHECK(out.total == doctest::Approx(out.uniformity));
}

TEST_CASE("total_loss is invariant under permutation of batch rows") {
  Rng rng(41);
  const Matrix raw = random_matrix(6, 8, rng);
  const GalleryStore gallery = random_gallery(20, 8, rng);
  const EmbeddingBatch batch = EmbeddingBatch::normalized(raw, Modality::query);
  const CandidateSet cands = select_candidates(gallery, batch);
  const SourceConstraints cons{0.4, 1.0};
  const LossBreakdown a = total_loss(batch, cands, cons, 0.02, 10.0);

  // Reverse the row order of batch and candidates together.
  const std::size_t b = raw.rows();
  Matrix rev(b, raw.cols());
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < raw.cols(); ++j) rev.at(i, j) = batch.row(b - 1 - i)[j];
  }
  const EmbeddingBatch batch_rev(rev, Modality::query);
  const CandidateSet cands_rev = select_candidates(gallery, batch_rev);
  const LossBreakdown c = total_loss(batch_rev, cands_rev, cons, 0.02, 10.0);
  CHECK(a.total == doctest::Approx(c.total).epsilon(1e-12));
  CHECK(a.uniformity == doctest::Approx(c.uniformity).epsilon(1e-12));
  CHECK(a.gap == doctest::Approx(c.gap).epsilon(1e-12));
  CHECK(a.noise == doctest::Approx(c.noise).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(71);
  const std::size_t batch_sizes[] = {2, 4, 8};
  const std::size_t dims[] = {4, 8, 16};
  const double t = 10.0;
  const double h = 1e-5;
  int instances = 0;
  for (const std::size_t b : batch_sizes) {
    for (const std::size_t d : dims) {
      for (int rep = 0; rep < 2; ++rep) {
        // Sharp and soft prediction temperatures: the soft case keeps every
        // entropy away from zero so the noise term is exercised.
        const double tau = rep == 0 ? 0.02 : 0.25;
        instances += 1;
        const Matrix raw = random_matrix(b, d, rng);
        const GalleryStore gallery = random_gallery(24, d, rng);
        AdaptationHead head = random_head(d, rng);
        const EmbeddingBatch batch = apply_head(head, raw, Modality::query);
        const CandidateSet cands = select_candidates(gallery, batch);
        const std::vector<double> entropies = row_entropies(refined_predict(batch, cands, tau));
        const SourceConstraints cons{0.2 + 0.6 * rng.uniform(), safe_threshold(entropies)};
        const std::optional<SourceConstraints> opt_cons(cons);

        const GradientVector grad =
            total_loss_gradient(head, raw, cands, opt_cons, tau, t, false);
        for (std::size_t k = 0; k < d; ++k) {
          AdaptationHead plus = head;
          AdaptationHead minus = head;
          plus.gamma[k] += h;
          minus.gamma[k] -= h;
          const double fd = (loss_at(plus, raw, cands, opt_cons, tau, t) -
                             loss_at(minus, raw, cands, opt_cons, tau, t)) /
                            (2.0 * h);
          const double denom = std::max(1.0, std::abs(grad.d_gamma[k]));
          CHECK(std::abs(grad.d_gamma[k] - fd) / denom <= 1e-4);
        }
        for (std::size_t k = 0; k < d; ++k) {
          AdaptationHead plus = head;
          AdaptationHead minus = head;
          plus.beta[k] += h;
          minus.beta[k] -= h;
          const double fd = (loss_at(plus, raw, cands, opt_cons, tau, t) -
                             loss_at(minus, raw, cands, opt_cons, tau, t)) /
                            (2.0 * h);
          const double denom = std::max(1.0, std::abs(grad.d_beta[k]));
          CHECK(std::abs(grad.d_beta[k] - fd) / denom <= 1e-4);
        }
      }
    }
  }
  CHECK(instances == 18);
}

TEST_CASE("gradient with stop_gradient_center matches a detached-center oracle") {
  Rng rng(73);
  const std::size_t b = 4;
  const std::size_t d = 6;
  const Matrix raw = random_matrix(b, d, rng);
  const GalleryStore gallery = random_gallery(12, d, rng);
  AdaptationHead head = random_head(d, rng);
  const EmbeddingBatch batch = apply_head(head, raw, Modality::query);
  const CandidateSet cands = select_candidates(gallery, batch);

  // With the center detached, only the direct w_k v_k term remains. A
  // finite-difference oracle would need the frozen center, so check the
  // difference of the two modes instead: it must equal the center term.
  const GradientVector full =
      total_loss_gradient(head, raw, cands, std::nullopt, 0.02, 10.0, false);
  const GradientVector stopped =
      total_loss_gradient(head, raw, cands, std::nullopt, 0.02, 10.0, true);
  bool any_difference = false;
  for (std::size_t k = 0; k < d; ++k) {
    if (std::abs(full.d_gamma[k] - stopped.d_gamma[k]) > 1e-12) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("zero gradient at a symmetric stationary configuration") {
  // Antipodal queries and coincident candidate pairs: the uniformity pull is
  // purely radial (killed by normalization), the gap is 0 = delta_s, and the
  // refined predictions are one-hot.
  const Matrix raw = Matrix::from_rows({{2.0, 0.0}, {-2.0, 0.0}});
  const AdaptationHead head = AdaptationHead::identity(2);
  const EmbeddingBatch batch = apply_head(head, raw, Modality::query);
  CandidateSet cands;
  cands.indices = {0, 1};
  cands.embeddings = Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
  const SourceConstraints cons{0.0, 0.5};
  const GradientVector grad =
      total_loss_gradient(head, raw, cands, std::optional<SourceConstraints>(cons), 0.02, 10.0,
                          false);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(grad.d_gamma[k]) <= 1e-9);
    CHECK(std::abs(grad.d_beta[k]) <= 1e-9);
  }
}

TEST_CASE("rows at or above the entropy threshold get zero gradient contribution") {
  Rng rng(79);
  const std::size_t b = 4;
  const std::size_t d = 6;
  const double tau = 0.5;  // keep entropies comfortably positive
  const Matrix raw = random_matrix(b, d, rng);
  const GalleryStore gallery = random_gallery(12, d, rng);
  AdaptationHead head = random_head(d, rng);
  const EmbeddingBatch batch = apply_head(head, raw, Modality::query);
  const CandidateSet cands = select_candidates(gallery, batch);
  const std::vector<double> entropies = row_entropies(refined_predict(batch, cands, tau));
  const double min_entropy = *std::min_element(entropies.begin(), entropies.end());
  const double max_entropy = *std::max_element(entropies.begin(), entropies.end());
  REQUIRE(min_entropy > 1e-3);

  // Two thresholds below every entropy: all rows clamp, the noise term and its
  // gradient vanish, so both gradients reduce to uniformity + gap and agree.
  const SourceConstraints clamped_a{0.5, min_entropy * 0.5};
  const SourceConstraints clamped_b{0.5, min_entropy * 0.25};
  const LossBreakdown losses =
      total_loss(batch, cands, std::optional<SourceConstraints>(clamped_a), tau, 10.0);
  CHECK(losses.noise == 0.0);
  const GradientVector grad_a = total_loss_gradient(
      head, raw, cands, std::optional<SourceConstraints>(clamped_a), tau, 10.0, false);
  const GradientVector grad_b = total_loss_gradient(
      head, raw, cands, std::optional<SourceConstraints>(clamped_b), tau, 10.0, false);
  for (std::size_t k = 0; k < d; ++k) {
    CHECK(grad_a.d_gamma[k] == doctest::Approx(grad_b.d_gamma[k]).epsilon(1e-12));
    CHECK(grad_a.d_beta[k] == doctest::Approx(grad_b.d_beta[k]).epsilon(1e-12));
  }

  // Threshold above every entropy: the noise term is live and must change the
  // gradient relative to the clamped case.
  const SourceConstraints active{0.5, max_entropy * 2.0};
  const GradientVector grad_live = total_loss_gradient(
      head, raw, cands, std::optional<SourceConstraints>(active), tau, 10.0, false);
  bool any_difference = false;
  for (std::size_t k = 0; k < d; ++k) {
    if (std::abs(grad_live.d_gamma[k] - grad_a.d_gamma[k]) > 1e-12) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("entropy_embedding_gradient matches finite differences on an explicit row") {
  Rng rng(83);
  const std::size_t d = 5;
  const Matrix refs = normalize_rows(random_matrix(3, d, rng));
  std::vector<double> z(d);
  for (double& x : z) x = rng.normal();
  const EmbeddingVector unit = l2_normalize(z);
  const double tau = 0.1;

  auto entropy_of = [&](std::span<const double> q) {
    Matrix sims(1, refs.rows());
    for (std::size_t j = 0; j < refs.rows(); ++j) sims.at(0, j) = dot(q, refs.row(j));
    return row_entropies(softmax_predict(sims, tau))[0];
  };

  Matrix sims(1, refs.rows());
  for (std::size_t j = 0; j < refs.rows(); ++j) sims.at(0, j) = dot(unit.span(), refs.row(j));
  const PredictionMatrix preds = softmax_predict(sims, tau);
  const std::vector<double> grad = entropy_embedding_gradient(preds.row(0), refs, tau);

  const double h = 1e-6;
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> plus(unit.values());
    std::vector<double> minus(unit.values());
    plus[k] += h;
    minus[k] -= h;
    const double fd = (entropy_of(plus) - entropy_of(minus)) / (2.0 * h);
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-4));
  }
}
