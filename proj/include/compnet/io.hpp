#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "compnet/tensor.hpp"

namespace compnet {

// All on-disk integers and floats are little-endian; tensors are stored as
// IEEE-754 binary32 regardless of the in-memory scalar type.

namespace bytes {

inline void put_u8(std::vector<uint8_t>& b, uint8_t v) { b.push_back(v); }

inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline void put_f32(std::vector<uint8_t>& b, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(b, u);
}

inline void put_f64(std::vector<uint8_t>& b, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(b, u);
}

/// Sequential reader with byte-offset diagnostics on truncation.
class Reader {
 public:
  Reader(const std::vector<uint8_t>& data, std::string name)
      : data_(data), name_(std::move(name)) {}

  size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= data_.size(); }

  const uint8_t* take(size_t n, const char* what) {
    if (pos_ + n > data_.size())
      throw DataError(name_ + ": truncated reading " + what + " at byte offset " +
                      std::to_string(pos_) + " (need " + std::to_string(n) +
                      " bytes, have " + std::to_string(data_.size() - pos_) + ")");
    const uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  uint8_t u8(const char* what) { return *take(1, what); }

  uint16_t u16(const char* what) {
    const uint8_t* p = take(2, what);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }

  uint32_t u32(const char* what) {
    const uint8_t* p = take(4, what);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }

  uint64_t u64(const char* what) {
    uint64_t lo = u32(what), hi = u32(what);
    return lo | (hi << 32);
  }

  float f32(const char* what) {
    uint32_t u = u32(what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }

  double f64(const char* what) {
    uint64_t u = u64(what);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }

  void expect_magic(const char* magic, size_t len) {
    size_t at = pos_;
    const uint8_t* p = take(len, "magic");
    if (std::memcmp(p, magic, len) != 0)
      throw DataError(name_ + ": bad magic at byte offset " + std::to_string(at));
  }

 private:
  const std::vector<uint8_t>& data_;
  std::string name_;
  size_t pos_ = 0;
};

}  // namespace bytes

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::string& path, const std::vector<uint8_t>& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!f) throw DataError("short write to " + path);
}

// --------------------------------------------------------------------------
// CTEN tensor format: "CTEN1\0", u8 rank, rank x u32 extents, then
// numel binary32 real values followed by numel imaginary values.
// --------------------------------------------------------------------------

inline constexpr char kCtenMagic[6] = {'C', 'T', 'E', 'N', '1', '\0'};

template <typename T>
void encode_cten(std::vector<uint8_t>& out, const CTensor<T>& t) {
  out.insert(out.end(), kCtenMagic, kCtenMagic + 6);
  bytes::put_u8(out, static_cast<uint8_t>(t.rank()));
  for (int64_t e : t.shape) bytes::put_u32(out, static_cast<uint32_t>(e));
  for (T v : t.re) bytes::put_f32(out, static_cast<float>(v));
  for (T v : t.im) bytes::put_f32(out, static_cast<float>(v));
}

template <typename T>
CTensor<T> decode_cten(bytes::Reader& r) {
  r.expect_magic(kCtenMagic, 6);
  int rank = r.u8("rank");
  std::vector<int64_t> shape;
  for (int i = 0; i < rank; ++i) shape.push_back(r.u32("extent"));
  CTensor<T> t(shape);
  for (auto& v : t.re) v = static_cast<T>(r.f32("real data"));
  for (auto& v : t.im) v = static_cast<T>(r.f32("imag data"));
  return t;
}

template <typename T>
void write_cten(const std::string& path, const CTensor<T>& t) {
  std::vector<uint8_t> buf;
  buf.reserve(16 + 8 * static_cast<size_t>(t.numel()));
  encode_cten(buf, t);
  write_file(path, buf);
}

template <typename T = float>
CTensor<T> read_cten(const std::string& path) {
  auto data = read_file(path);
  bytes::Reader r(data, path);
  return decode_cten<T>(r);
}

// --------------------------------------------------------------------------
// CKPT checkpoint format: "CKPT1\0", u32 header length, UTF-8 key=value
// header block, then (u16 name length, name, CTEN tensor) records to EOF.
// --------------------------------------------------------------------------

inline constexpr char kCkptMagic[6] = {'C', 'K', 'P', 'T', '1', '\0'};

struct Checkpoint {
  std::string header;  // key=value lines
  std::vector<std::pair<std::string, CTensor<float>>> tensors;

  const CTensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kCkptMagic, kCkptMagic + 6);
  bytes::put_u32(buf, static_cast<uint32_t>(ck.header.size()));
  buf.insert(buf.end(), ck.header.begin(), ck.header.end());
  for (const auto& [name, t] : ck.tensors) {
    bytes::put_u16(buf, static_cast<uint16_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    encode_cten(buf, t);
  }
  write_file(path, buf);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  auto data = read_file(path);
  bytes::Reader r(data, path);
  r.expect_magic(kCkptMagic, 6);
  Checkpoint ck;
  uint32_t hlen = r.u32("header length");
  const uint8_t* h = r.take(hlen, "header");
  ck.header.assign(reinterpret_cast<const char*>(h), hlen);
  while (!r.at_end()) {
    uint16_t nlen = r.u16("record name length");
    const uint8_t* np = r.take(nlen, "record name");
    std::string name(reinterpret_cast<const char*>(np), nlen);
    ck.tensors.emplace_back(std::move(name), decode_cten<float>(r));
  }
  return ck;
}

// --------------------------------------------------------------------------
// PPM (P6, maxval 255) for human-viewable frames. Tensors are (3, H, W)
// real-valued in [0, 1]; the imaginary plane is ignored on write and zero
// on read.
// --------------------------------------------------------------------------

template <typename T>
void write_ppm(const std::string& path, const CTensor<T>& img) {
  check_shape(img.rank() == 3 && img.shape[0] == 3,
              "write_ppm: expected (3,H,W) tensor, got " + img.shape_str());
  int64_t h = img.shape[1], w = img.shape[2];
  std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<uint8_t> buf(header.begin(), header.end());
  buf.reserve(buf.size() + static_cast<size_t>(3 * h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double v = static_cast<double>(img.re[(c * h + y) * w + x]);
        v = std::min(1.0, std::max(0.0, v));
        buf.push_back(static_cast<uint8_t>(std::lround(v * 255.0)));
      }
  write_file(path, buf);
}

template <typename T = float>
CTensor<T> read_ppm(const std::string& path) {
  auto data = read_file(path);
  size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < data.size() && std::isspace(data[pos])) ++pos;
    if (pos < data.size() && data[pos] == '#') {  // comment line
      while (pos < data.size() && data[pos] != '\n') ++pos;
      while (pos < data.size() && std::isspace(data[pos])) ++pos;
    }
    size_t start = pos;
    while (pos < data.size() && !std::isspace(data[pos])) ++pos;
    return std::string(data.begin() + start, data.begin() + pos);
  };
  if (token() != "P6") throw DataError(path + ": not a P6 PPM");
  int64_t w = std::stoll(token()), h = std::stoll(token());
  int64_t maxval = std::stoll(token());
  if (maxval != 255) throw DataError(path + ": unsupported maxval");
  ++pos;  // single whitespace after maxval
  if (pos + static_cast<size_t>(3 * h * w) > data.size())
    throw DataError(path + ": truncated pixel data at byte offset " + std::to_string(pos));
  CTensor<T> img({3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        img.re[(c * h + y) * w + x] =
            static_cast<T>(data[pos + ((y * w + x) * 3 + c)] / 255.0);
  return img;
}

}  // namespace compnet
