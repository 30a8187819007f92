#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tcr/embedding.hpp"
#include "tcr/errors.hpp"
#include "tcr/gallery.hpp"
#include "tcr/matrix.hpp"
#include "tcr/metrics.hpp"
#include "tcr/rng.hpp"

using namespace tcr;

namespace {

Matrix random_unit_matrix(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.at(i, j) = rng.normal();
  }
  return normalize_rows(m);
}

GalleryStore small_gallery(const Matrix& rows) {
  std::vector<std::string> ids(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) ids[i] = "g" + std::to_string(i);
  return GalleryStore(rows, std::move(ids));
}

}  // namespace

TEST_CASE("uniformity of an antipodal pair is one") {
  Matrix rows(2, 3);
  rows.at(0, 0) = 1.0;
  rows.at(1, 0) = -1.0;
  CHECK(uniformity(EmbeddingBatch(rows, Modality::query)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("uniformity of identical rows is zero") {
  Matrix rows(4, 3);
  for (std::size_t i = 0; i < 4; ++i) rows.at(i, 2) = 1.0;
  CHECK(uniformity(EmbeddingBatch(rows, Modality::gallery)) == 0.0);
}

TEST_CASE("uniformity matches a two-pass oracle on random batches") {
  Rng rng(103);
  const std::size_t n = 17;
  const std::size_t d = 9;
  const Matrix rows = random_unit_matrix(n, d, rng);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += rows.at(i, k);
  }
  for (double& v : mean) v /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      sq += (rows.at(i, k) - mean[k]) * (rows.at(i, k) - mean[k]);
    }
    total += std::sqrt(sq);
  }
  const double expect = total / static_cast<double>(n);
  CHECK(uniformity(EmbeddingBatch(rows, Modality::query)) ==
        doctest::Approx(expect).epsilon(1e-14));
  CHECK(uniformity(EmbeddingBatch(rows, Modality::query)) > 0.0);
  CHECK(uniformity(EmbeddingBatch(rows, Modality::query)) <= 1.0);
}

TEST_CASE("modality_gap of a batch against itself is zero") {
  Rng rng(107);
  const Matrix rows = random_unit_matrix(6, 5, rng);
  const EmbeddingBatch q(rows, Modality::query);
  const EmbeddingBatch g(rows, Modality::gallery);
  CHECK(modality_gap(q, g) == 0.0);
}

TEST_CASE("modality_gap of antipodal singleton batches is two") {
  Matrix a(1, 4);
  a.at(0, 1) = 1.0;
  Matrix b(1, 4);
  b.at(0, 1) = -1.0;
  CHECK(modality_gap(EmbeddingBatch(a, Modality::query), EmbeddingBatch(b, Modality::gallery)) ==
        doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("modality_gap matches the distance between hand-computed centers") {
  Rng rng(109);
  const Matrix qr = random_unit_matrix(8, 6, rng);
  const Matrix gr = random_unit_matrix(11, 6, rng);
  const std::vector<double> qm = column_mean(qr);
  const std::vector<double> gm = column_mean(gr);
  double sq = 0.0;
  for (std::size_t k = 0; k < 6; ++k) sq += (qm[k] - gm[k]) * (qm[k] - gm[k]);
  CHECK(modality_gap(EmbeddingBatch(qr, Modality::query), EmbeddingBatch(gr, Modality::gallery)) ==
        doctest::Approx(std::sqrt(sq)).epsilon(1e-14));
}

TEST_CASE("modality_gap rejects mismatched dimensions") {
  Matrix a(1, 3);
  a.at(0, 0) = 1.0;
  Matrix b(1, 4);
  b.at(0, 0) = 1.0;
  CHECK_THROWS_AS(
      modality_gap(EmbeddingBatch(a, Modality::query), EmbeddingBatch(b, Modality::gallery)),
      DimensionMismatchError);
}

TEST_CASE("top_k_indices orders by similarity and breaks ties toward low indices") {
  Matrix grows(4, 2);
  grows.at(0, 0) = 1.0;                                  // sim 1 with e1
  grows.at(1, 0) = -1.0;                                 // sim -1
  grows.at(2, 0) = std::sqrt(0.5);                       // sim sqrt(0.5)
  grows.at(2, 1) = std::sqrt(0.5);
  grows.at(3, 0) = std::sqrt(0.5);                       // identical sim, higher index
  grows.at(3, 1) = -std::sqrt(0.5);
  const GalleryStore gallery = small_gallery(grows);
  Matrix qrows(1, 2);
  qrows.at(0, 0) = 1.0;
  const EmbeddingBatch queries(qrows, Modality::query);

  const auto top = top_k_indices(queries, gallery, 3);
  REQUIRE(top.size() == 1);
  REQUIRE(top[0].size() == 3);
  CHECK(top[0][0] == 0);
  CHECK(top[0][1] == 2);  // ties at sqrt(0.5) resolve to the lower index first
  CHECK(top[0][2] == 3);
}

TEST_CASE("top_k_indices clamps k to the gallery size") {
  Rng rng(113);
  const GalleryStore gallery = small_gallery(random_unit_matrix(3, 4, rng));
  const EmbeddingBatch queries(random_unit_matrix(2, 4, rng), Modality::query);
  const auto top = top_k_indices(queries, gallery, 10);
  for (const auto& row : top) CHECK(row.size() == 3);
}

TEST_CASE("top_k_indices rejects k of zero and mismatched dimensions") {
  Rng rng(127);
  const GalleryStore gallery = small_gallery(random_unit_matrix(3, 4, rng));
  const EmbeddingBatch queries(random_unit_matrix(2, 4, rng), Modality::query);
  CHECK_THROWS_AS(top_k_indices(queries, gallery, 0), ConfigError);
  const EmbeddingBatch wide(random_unit_matrix(2, 5, rng), Modality::query);
  CHECK_THROWS_AS(top_k_indices(wide, gallery, 1), DimensionMismatchError);
}

TEST_CASE("top_k_indices agrees with a full-sort oracle on random data") {
  Rng rng(131);
  const std::size_t g = 40;
  const std::size_t d = 7;
  const GalleryStore gallery = small_gallery(random_unit_matrix(g, d, rng));
  const EmbeddingBatch queries(random_unit_matrix(9, d, rng), Modality::query);
  const std::size_t k = 5;
  const auto top = top_k_indices(queries, gallery, k);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t j = 0; j < g; ++j) {
      sims.emplace_back(dot(queries.row(i), gallery.row(j)), j);
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t r = 0; r < k; ++r) CHECK(top[i][r] == sims[r].second);
  }
}

TEST_CASE("rank_ids maps index lists onto gallery identifiers") {
  Rng rng(137);
  const GalleryStore gallery = small_gallery(random_unit_matrix(5, 3, rng));
  const std::vector<std::vector<std::size_t>> indices = {{2, 0}, {4}};
  const auto ids = rank_ids(indices, gallery);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == std::vector<std::string>{"g2", "g0"});
  CHECK(ids[1] == std::vector<std::string>{"g4"});
}

TEST_CASE("recall_at_k counts a hit anywhere in the first k ranks") {
  const std::vector<std::string> qids = {"a", "b", "c", "d"};
  const std::vector<std::vector<std::string>> ranked = {
      {"g1", "g2", "g3"},   // hit at rank 1
      {"g9", "g5", "g7"},   // hit at rank 2
      {"g4", "g6", "g8"},   // hit at rank 3 only
      {"g0", "g0", "g0"},   // miss
  };
  const TruthMap truth = {
      {"a", {"g1"}}, {"b", {"g5"}}, {"c", {"g8"}}, {"d", {"g5"}}};
  CHECK(recall_at_k(qids, ranked, truth, 1) == doctest::Approx(0.25));
  CHECK(recall_at_k(qids, ranked, truth, 2) == doctest::Approx(0.5));
  CHECK(recall_at_k(qids, ranked, truth, 3) == doctest::Approx(0.75));
  CHECK(recall_at_k(qids, ranked, truth, 10) == doctest::Approx(0.75));
}

TEST_CASE("recall_at_k accepts any correct id from a multi-truth set") {
  const std::vector<std::string> qids = {"a"};
  const std::vector<std::vector<std::string>> ranked = {{"g7", "g3"}};
  const TruthMap truth = {{"a", {"g3", "g10"}}};
  CHECK(recall_at_k(qids, ranked, truth, 2) == doctest::Approx(1.0));
  CHECK(recall_at_k(qids, ranked, truth, 1) == doctest::Approx(0.0));
}

TEST_CASE("recall_at_k ignores the ordering of ranks beyond k") {
  const std::vector<std::string> qids = {"a", "b"};
  const std::vector<std::vector<std::string>> ranked = {
      {"g1", "g2", "g3", "g4"}, {"g5", "g6", "g7", "g8"}};
  std::vector<std::vector<std::string>> shuffled = ranked;
  std::swap(shuffled[0][2], shuffled[0][3]);
  std::swap(shuffled[1][2], shuffled[1][3]);
  const TruthMap truth = {{"a", {"g1"}}, {"b", {"g6"}}};
  CHECK(recall_at_k(qids, ranked, truth, 2) == recall_at_k(qids, shuffled, truth, 2));
}

TEST_CASE("recall_at_k rejects missing truth and mismatched sizes") {
  const std::vector<std::string> qids = {"a", "b"};
  const std::vector<std::vector<std::string>> ranked = {{"g1"}, {"g2"}};
  const TruthMap truth = {{"a", {"g1"}}};
  CHECK_THROWS_AS(recall_at_k(qids, ranked, truth, 1), MissingTruthError);
  CHECK_THROWS_AS(recall_at_k({}, {}, truth, 1), SizeMismatchError);
  CHECK_THROWS_AS(recall_at_k(qids, {{"g1"}}, truth, 1), SizeMismatchError);
}
