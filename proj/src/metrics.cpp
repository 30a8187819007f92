#include "tcr/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "tcr/errors.hpp"
#include "tcr/matrix.hpp"

namespace tcr {

double uniformity(const EmbeddingBatch& batch) {
  const std::vector<double> center = batch.mean();
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += distance(batch.row(i), center);
  }
  return sum / static_cast<double>(batch.size());
}

double modality_gap(const EmbeddingBatch& queries, const EmbeddingBatch& gallery) {
  if (queries.dim() != gallery.dim()) {
    throw DimensionMismatchError("modality gap requires equal embedding dimensions");
  }
  return distance(queries.mean(), gallery.mean());
}

std::vector<std::vector<std::size_t>> top_k_indices(const EmbeddingBatch& queries,
                                                    const GalleryStore& gallery,
                                                    std::size_t k) {
  if (queries.dim() != gallery.dim()) {
    throw DimensionMismatchError("query and gallery dimensions differ");
  }
  if (k == 0) {
    throw ConfigError("k must be positive");
  }
  const std::size_t kk = std::min(k, gallery.size());
  std::vector<std::vector<std::size_t>> out(queries.size());
  std::vector<double> sims(gallery.size());
  std::vector<std::size_t> order(gallery.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto q = queries.row(i);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      sims[j] = dot(q, gallery.row(j));
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk),
                      order.end(), [&sims](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) {
                          return sims[a] > sims[b];
                        }
                        return a < b;
                      });
    out[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk));
  }
  return out;
}

std::vector<std::vector<std::string>> rank_ids(
    const std::vector<std::vector<std::size_t>>& indices, const GalleryStore& gallery) {
  std::vector<std::vector<std::string>> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out[i].reserve(indices[i].size());
    for (const std::size_t j : indices[i]) {
      out[i].push_back(gallery.id(j));
    }
  }
  return out;
}

double recall_at_k(const std::vector<std::string>& query_ids,
                   const std::vector<std::vector<std::string>>& ranked,
                   const TruthMap& truth, std::size_t k) {
  if (query_ids.empty() || query_ids.size() != ranked.size()) {
    throw SizeMismatchError("query ids and rankings must be non-empty and equal length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < query_ids.size(); ++i) {
    const auto it = truth.find(query_ids[i]);
    if (it == truth.end()) {
      throw MissingTruthError("no ground truth for query id " + query_ids[i]);
    }
    const std::size_t depth = std::min(k, ranked[i].size());
    for (std::size_t r = 0; r < depth; ++r) {
      if (it->second.count(ranked[i][r]) > 0) {
        hits += 1;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(query_ids.size());
}

}  // namespace tcr
