// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_EMBEDDING_STORE_HPP
#define DPA_EMBEDDING_STORE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpa/errors.hpp"

namespace dpa {

static_assert(std::endian::native == std::endian::little,
              "store format is little-endian; big-endian hosts unsupported");

/// Flat float32 embedding matrix with id lookup.
///
/// On-disk layout: magic "DPAE", u32 version=1, u32 dim, u64 count, then
/// count*dim little-endian float32 values, row-major. Row ids live in a
/// sidecar text file at `<path>.ids`, one id per line in row order.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  explicit EmbeddingStore(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("dim must be positive");
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  void add(const std::string& id, std::span<const float> row) {
    if (row.size() != dim_) {
      throw std::invalid_argument("embedding length " + std::to_string(row.size()) +
                                  " != store dim " + std::to_string(dim_));
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw std::invalid_argument("duplicate doc_id: " + id);
    }
    ids_.push_back(id);
    data_.insert(data_.end(), row.begin(), row.end());
  }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::size_t row_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw std::out_of_range("unknown id in embedding store: " + id);
    }
    return it->second;
  }

  std::span<const float> row_of(const std::string& id) const {
    return row(row_index(id));
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (a.dim_ != b.dim_ || a.ids_ != b.ids_) return false;
    if (a.data_.size() != b.data_.size()) return false;
    // bitwise, so NaN payloads and signed zeros also roundtrip
    return std::memcmp(a.data_.data(), b.data_.data(),
                       a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline constexpr char kStoreMagic[4] = {'D', 'P', 'A', 'E'};
inline constexpr std::uint32_t kStoreVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw FormatError(FormatError::Kind::Truncated,
                      std::string("store truncated while reading ") + what);
  }
  return value;
}

}  // namespace detail

inline void save_store(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(detail::kStoreMagic, 4);
  detail::write_le<std::uint32_t>(out, detail::kStoreVersion);
  detail::write_le<std::uint32_t>(out, store.dim());
  detail::write_le<std::uint64_t>(out, store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    auto r = store.row(i);
    out.write(reinterpret_cast<const char*>(r.data()),
              static_cast<std::streamsize>(r.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);

  std::ofstream ids(path + ".ids", std::ios::binary | std::ios::trunc);
  if (!ids) throw std::runtime_error("cannot open " + path + ".ids for writing");
  for (const auto& id : store.ids()) ids << id << '\n';
  if (!ids) throw std::runtime_error("write failed: " + path + ".ids");
}

inline EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, detail::kStoreMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, "not a DPAE file: " + path);
  }
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != detail::kStoreVersion) {
    throw FormatError(FormatError::Kind::BadVersion,
                      "unsupported DPAE version " + std::to_string(version));
  }
  const auto dim = detail::read_le<std::uint32_t>(in, "dim");
  const auto count = detail::read_le<std::uint64_t>(in, "count");
  if (dim == 0) {
    throw FormatError(FormatError::Kind::SizeMismatch, "store dim must be positive");
  }

  std::vector<float> payload(static_cast<std::size_t>(count) * dim);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float))) {
    throw FormatError(FormatError::Kind::Truncated,
                      "store payload truncated: expected " +
                          std::to_string(payload.size() * sizeof(float)) + " bytes");
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw FormatError(FormatError::Kind::SizeMismatch,
                      "store payload longer than dim*count declares");
  }

  std::ifstream ids_in(path + ".ids", std::ios::binary);
  if (!ids_in) throw std::runtime_error("cannot open " + path + ".ids");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  if (ids.size() != count) {
    throw FormatError(FormatError::Kind::IdMismatch,
                      "ids sidecar has " + std::to_string(ids.size()) +
                          " entries, header declares " + std::to_string(count));
  }

  EmbeddingStore store(dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    store.add(ids[i], {payload.data() + i * dim, dim});
  }
  return store;
}

}  // namespace dpa

#endif  // DPA_EMBEDDING_STORE_HPP
