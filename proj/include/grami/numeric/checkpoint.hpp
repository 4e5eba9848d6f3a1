#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "grami/error.hpp"
#include "grami/numeric/tensor.hpp"

// Named-tensor container:
//   "GRAMICKP" | u32 version | u32 count
//   count x { u32 name_len | name | u32 rows | u32 cols }
//   for each tensor, rows*cols little-endian f32, row-major
//   u64 json_len | json (UTF-8)

namespace grami {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'A', 'M', 'I', 'C', 'K', 'P'};

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    require(n <= data_.size() - pos_, ErrorKind::CorruptCheckpoint, source_ + ": truncated at byte " + std::to_string(pos_));
  }

  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct TensorBundle {
  ParamStore<float> tensors;
  std::string json;
};

inline std::string encode_tensors(const ParamStore<float>& tensors, const std::string& json) {
  std::string out(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& e : tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rows()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.cols()));
  }
  for (const auto& e : tensors)
    for (index_t i = 0; i < e.value.size(); ++i)
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(e.value.data()[i]));
  detail::put_le<std::uint64_t>(out, json.size());
  out += json;
  return out;
}

inline TensorBundle decode_tensors(const std::string& data, const std::string& source = "checkpoint") {
  detail::ByteReader in(data, source);
  require(in.bytes(8) == std::string(detail::kCheckpointMagic, 8), ErrorKind::CorruptCheckpoint, source + ": bad magic");
  const auto version = in.get<std::uint32_t>();
  require(version == 1, ErrorKind::CorruptCheckpoint, source + ": unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  TensorBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>();
    std::string name = in.bytes(len);
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    require(!bundle.tensors.contains(name), ErrorKind::CorruptCheckpoint, source + ": duplicate tensor " + name);
    bundle.tensors.add(name, rows, cols);
  }
  for (auto& e : bundle.tensors)
    for (index_t i = 0; i < e.value.size(); ++i) e.value.data()[i] = std::bit_cast<float>(in.get<std::uint32_t>());
  const auto json_len = in.get<std::uint64_t>();
  bundle.json = in.bytes(json_len);
  require(in.at_end(), ErrorKind::CorruptCheckpoint, source + ": trailing bytes after JSON trailer");
  return bundle;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::IoError, "write failed for " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace grami
