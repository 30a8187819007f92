#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tcr/embedding.hpp"
#include "tcr/gallery.hpp"

namespace tcr {

// query id -> set of gallery ids counted as correct.
using TruthMap = std::unordered_map<std::string, std::unordered_set<std::string>>;

// Mean distance of rows from their mean. Larger is more spread out; an
// antipodal pair scores 1.
double uniformity(const EmbeddingBatch& batch);

// Distance between the two modality centers.
double modality_gap(const EmbeddingBatch& queries, const EmbeddingBatch& gallery);

// Per-query top-k gallery indices, similarity descending, index ascending on
// ties. k is clamped to the gallery size.
std::vector<std::vector<std::size_t>> top_k_indices(const EmbeddingBatch& queries,
                                                    const GalleryStore& gallery,
                                                    std::size_t k);

// Index lists mapped to gallery ids.
std::vector<std::vector<std::string>> rank_ids(
    const std::vector<std::vector<std::size_t>>& indices, const GalleryStore& gallery);

// Fraction of queries whose truth set intersects the first k ranked ids.
// Throws MissingTruthError for a query id absent from the map.
double recall_at_k(const std::vector<std::string>& query_ids,
                   const std::vector<std::vector<std::string>>& ranked,
                   const TruthMap& truth, std::size_t k);

}  // namespace tcr
