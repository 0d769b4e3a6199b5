#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

// TNSR binary format: "TNSR", version byte 0x01, u32 LE order, u32 LE dims,
// then IEEE-754 f64 LE values with the last index varying fastest.

inline void write_tensor(const std::filesystem::path& path, const Tensord& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f.write("TNSR", 4);
  char version = 0x01;
  f.write(&version, 1);
  auto put_u32 = [&](std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    f.write(b, 4);
  };
  put_u32(static_cast<std::uint32_t>(t.order()));
  for (Index d : t.dims()) put_u32(static_cast<std::uint32_t>(d));
  static_assert(sizeof(double) == 8);
  f.write(reinterpret_cast<const char*>(t.data().data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline Tensord read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "TNSR", 4) != 0)
    throw InvalidInputError("bad magic in tensor file " + path.string());
  char version = 0;
  f.read(&version, 1);
  if (version != 0x01) throw InvalidInputError("unsupported tensor file version");
  auto get_u32 = [&]() {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  std::uint32_t order = get_u32();
  if (order == 0) throw InvalidInputError("tensor file order is zero");
  Dims dims(order);
  for (auto& d : dims) d = static_cast<Index>(get_u32());
  Index size = 1;
  for (Index d : dims) size *= d;
  Eigen::VectorXd data(size);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size * 8));
  if (!f) throw InvalidInputError("truncated tensor file " + path.string());
  return Tensord(dims, std::move(data));
}

inline void write_matrix(const std::filesystem::path& path, const Matrixd& m) {
  Tensord t({m.rows(), m.cols()});
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) t({i, j}) = m(i, j);
  write_tensor(path, t);
}

inline Matrixd read_matrix(const std::filesystem::path& path) {
  Tensord t = read_tensor(path);
  if (t.order() != 2) throw InvalidInputError("expected order-2 tensor in " + path.string());
  return unfold(t, 0);
}

// Manifests are plain key=value lines, UTF-8, LF.

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path, std::ios::binary);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace mtd
