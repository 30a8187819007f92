#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcr/adaptation.hpp"
#include "tcr/gallery.hpp"
#include "tcr/matrix.hpp"
#include "tcr/metrics.hpp"

namespace tcr {

// Binary embedding container: magic "TCRE", version u32, dim u32, count u64
// (all little-endian), count*dim float32 row-major payload, then count
// newline-terminated UTF-8 ids.
inline constexpr char kEmbeddingMagic[4] = {'T', 'C', 'R', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

struct EmbeddingData {
  Matrix values;  // float32 payload widened to double
  std::vector<std::string> ids;
};

// Values are narrowed to float32 on write. Ids must be unique, non-empty and
// newline-free.
void write_embedding_file(const std::string& path, const Matrix& values,
                          const std::vector<std::string>& ids);

EmbeddingData read_embedding_file(const std::string& path);

// Gallery rows are normalized on load; query rows stay raw so the adaptation
// head has something to act on.
GalleryStore load_gallery(const std::string& path);
StreamInput load_queries(const std::string& path);

// Tab-separated "query_id<TAB>gallery_id" lines, one or more per query.
TruthMap read_truth_file(const std::string& path);
void write_truth_file(const std::string& path, const std::vector<std::string>& query_ids,
                      const TruthMap& truth);

// Header plus payload statistics for the inspect subcommand.
struct EmbeddingFileInfo {
  std::uint32_t version = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  double min_value = 0.0;
  double max_value = 0.0;
  double mean_norm = 0.0;
  bool finite = true;
  std::vector<std::string> sample_ids;
};

EmbeddingFileInfo inspect_embedding_file(const std::string& path);

}  // namespace tcr
