/*
 * Copyright 2026 The lleb Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lleb/embedding.hpp"
#include "lleb/error.hpp"
#include "lleb/vocab.hpp"

namespace lleb {

// Binary layout (little-endian):
//   "LLEB" | u32 version | u32 vocab_size | u32 dim
//   | u32 metadata length | metadata JSON
//   | vocab_size x (u32 len, token bytes, u32 id, u8 has_category, [u32 len, category bytes])
//   | vocab_size * dim f64 weights, row-major
inline constexpr char kSnapshotMagic[4] = {'L', 'L', 'E', 'B'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct SnapshotMetadata {
  std::string created_at;  // ISO-8601 UTC
  std::string strategy;
  std::int64_t week = 0;

  friend bool operator==(const SnapshotMetadata&, const SnapshotMetadata&) = default;
};

struct Snapshot {
  std::uint32_t version = kSnapshotVersion;
  VocabMap vocab;
  EmbeddingMatrix embedding;
  SnapshotMetadata metadata;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* field) {
    need(1, field);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
  std::string raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string str(const char* field) { return raw(u32(field), field); }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw SnapshotError(field, std::string("unexpected end of ") + field);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot) {
  const auto& vocab = snapshot.vocab;
  const auto& emb = snapshot.embedding;
  if (emb.rows() != vocab.size()) {
    throw Defect("snapshot embedding rows do not match vocabulary size");
  }
  detail::ByteWriter out;
  out.raw({kSnapshotMagic, 4});
  out.u32(snapshot.version);
  out.u32(static_cast<std::uint32_t>(vocab.size()));
  out.u32(static_cast<std::uint32_t>(emb.dim()));

  nlohmann::json meta = {{"created_at", snapshot.metadata.created_at},
                         {"strategy", snapshot.metadata.strategy},
                         {"week", snapshot.metadata.week}};
  out.str(meta.dump());

  auto tokens = vocab.tokens();
  for (std::uint32_t id = 0; id < tokens.size(); ++id) {
    out.str(tokens[id]);
    out.u32(id);
    if (auto category = vocab.category(tokens[id])) {
      out.u8(1);
      out.str(*category);
    } else {
      out.u8(0);
    }
  }
  for (double w : emb.data()) out.f64(w);
  return out.take();
}

inline Snapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0) {
    throw SnapshotError("magic", "bad magic");
  }
  in.raw(4, "magic");

  Snapshot snapshot;
  snapshot.version = in.u32("version");
  if (snapshot.version != kSnapshotVersion) {
    throw SnapshotError("version", "unsupported version " + std::to_string(snapshot.version));
  }
  const std::uint32_t vocab_size = in.u32("header");
  const std::uint32_t dim = in.u32("header");
  if (vocab_size == 0) throw SnapshotError("header", "vocab_size must be positive");
  if (dim == 0) throw SnapshotError("header", "dim must be positive");

  const std::string meta_text = in.str("metadata");
  try {
    auto meta = nlohmann::json::parse(meta_text);
    snapshot.metadata.created_at = meta.at("created_at").get<std::string>();
    snapshot.metadata.strategy = meta.at("strategy").get<std::string>();
    snapshot.metadata.week = meta.at("week").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError("metadata", std::string("malformed metadata: ") + e.what());
  }

  std::vector<Token> tokens;
  tokens.reserve(vocab_size);
  CategoryMap categories;
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    Token token = in.str("vocabulary");
    if (in.u32("vocabulary") != i) {
      throw SnapshotError("vocabulary", "vocabulary id out of order at record " + std::to_string(i));
    }
    const std::uint8_t flag = in.u8("vocabulary");
    if (flag > 1) throw SnapshotError("vocabulary", "bad category flag at record " + std::to_string(i));
    if (flag == 1) categories.emplace(token, in.str("vocabulary"));
    tokens.push_back(std::move(token));
  }
  try {
    snapshot.vocab = VocabMap::from_ordered(std::move(tokens), std::move(categories));
  } catch (const InvalidInput& e) {
    throw SnapshotError("vocabulary", e.what());
  }

  const std::uint64_t count = std::uint64_t{vocab_size} * dim;
  if (in.remaining() < count * 8) throw SnapshotError("weights", "unexpected end of weights");
  std::vector<double> weights(count);
  for (double& w : weights) w = in.f64("weights");
  if (in.remaining() != 0) throw SnapshotError("weights", "trailing bytes after weights");
  snapshot.embedding = EmbeddingMatrix(vocab_size, dim, std::move(weights));
  return snapshot;
}

inline void save_snapshot(const Snapshot& snapshot, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(snapshot);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("failed writing " + path.string());
}

inline Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace lleb
