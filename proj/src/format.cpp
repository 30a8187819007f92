#include "tcr/format.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "tcr/embedding.hpp"
#include "tcr/errors.hpp"

namespace tcr {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::string line() {
    const std::size_t nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) {
      throw TruncatedPayloadError(path_ + ": id section ends without a newline");
    }
    std::string s = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return s;
  }

  void expect_magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kEmbeddingMagic, 4) != 0) {
      throw BadMagicError(path_ + ": not an embedding file (bad magic)");
    }
    pos_ += 4;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw TruncatedPayloadError(path_ + ": file ends mid-record");
    }
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileIoError("cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void check_ids(const std::vector<std::string>& ids) {
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const std::string& id : ids) {
    if (id.empty() || id.find('\n') != std::string::npos) {
      throw ConfigError("ids must be non-empty and newline-free");
    }
    if (!seen.insert(id).second) {
      throw DuplicateIdError("duplicate id: " + id);
    }
  }
}

}  // namespace

void write_embedding_file(const std::string& path, const Matrix& values,
                          const std::vector<std::string>& ids) {
  if (values.rows() != ids.size()) {
    throw SizeMismatchError("row count and id count differ");
  }
  check_ids(ids);
  std::string out;
  out.reserve(16 + values.rows() * values.cols() * 4 + ids.size() * 8);
  out.append(kEmbeddingMagic, 4);
  put_u32(out, kEmbeddingVersion);
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  put_u64(out, static_cast<std::uint64_t>(values.rows()));
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j) {
      put_f32(out, static_cast<float>(values.at(i, j)));
    }
  }
  for (const std::string& id : ids) {
    out += id;
    out.push_back('\n');
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw FileIoError("cannot open " + path + " for writing");
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw FileIoError("short write to " + path);
  }
}

EmbeddingData read_embedding_file(const std::string& path) {
  const std::string bytes = slurp(path);
  Cursor cur(bytes, path);
  cur.expect_magic();
  const std::uint32_t version = cur.u32();
  if (version != kEmbeddingVersion) {
    throw VersionUnsupportedError(path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t dim = cur.u32();
  const std::uint64_t count = cur.u64();
  EmbeddingData data;
  data.values = Matrix(static_cast<std::size_t>(count), dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) {
      data.values.at(static_cast<std::size_t>(i), j) = static_cast<double>(cur.f32());
    }
  }
  data.ids.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    data.ids.push_back(cur.line());
  }
  check_ids(data.ids);
  return data;
}

GalleryStore load_gallery(const std::string& path) {
  EmbeddingData data = read_embedding_file(path);
  return GalleryStore::from_raw(data.values, std::move(data.ids));
}

StreamInput load_queries(const std::string& path) {
  EmbeddingData data = read_embedding_file(path);
  return StreamInput{std::move(data.values), std::move(data.ids)};
}

TruthMap read_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileIoError("cannot open " + path);
  }
  TruthMap truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (line.empty()) {
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected query_id<TAB>gallery_id");
    }
    truth[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  return truth;
}

void write_truth_file(const std::string& path, const std::vector<std::string>& query_ids,
                      const TruthMap& truth) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FileIoError("cannot open " + path + " for writing");
  }
  for (const std::string& qid : query_ids) {
    const auto it = truth.find(qid);
    if (it == truth.end()) {
      throw MissingTruthError("no ground truth for query id " + qid);
    }
    std::vector<std::string> targets(it->second.begin(), it->second.end());
    std::sort(targets.begin(), targets.end());
    for (const std::string& gid : targets) {
      out << qid << '\t' << gid << '\n';
    }
  }
  if (!out) {
    throw FileIoError("short write to " + path);
  }
}

EmbeddingFileInfo inspect_embedding_file(const std::string& path) {
  const EmbeddingData data = read_embedding_file(path);
  EmbeddingFileInfo info;
  info.version = kEmbeddingVersion;
  info.dim = static_cast<std::uint32_t>(data.values.cols());
  info.count = data.values.rows();
  if (!data.values.empty()) {
    info.min_value = std::numeric_limits<double>::infinity();
    info.max_value = -std::numeric_limits<double>::infinity();
    for (const double v : data.values.data()) {
      info.min_value = std::min(info.min_value, v);
      info.max_value = std::max(info.max_value, v);
      if (!std::isfinite(v)) {
        info.finite = false;
      }
    }
    double norm_sum = 0.0;
    for (std::size_t i = 0; i < data.values.rows(); ++i) {
      norm_sum += norm(data.values.row(i));
    }
    info.mean_norm = norm_sum / static_cast<double>(data.values.rows());
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(5, data.ids.size()); ++i) {
    info.sample_ids.push_back(data.ids[i]);
  }
  return info;
}

}  // namespace tcr
