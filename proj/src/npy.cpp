#include "eaaslab/npy.hpp"

#include <cstring>
#include <fstream>

#include "eaaslab/errors.hpp"

namespace eaaslab::npy {

static const char kMagic[] = "\x93NUMPY";

static std::string shape_str(const std::vector<size_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) s += std::to_string(shape[i]) + ", ";
  if (shape.size() > 1) s.resize(s.size() - 2);  // keep trailing comma for 1-tuples
  s += ")";
  return s;
}

static void save_raw(const std::filesystem::path& path, const std::string& dtype,
                     const std::vector<size_t>& shape, const void* data, size_t item_size) {
  std::string header = "{'descr': '" + dtype + "', 'fortran_order': False, 'shape': " +
                       shape_str(shape) + ", }";
  // pad so that magic(6)+version(2)+len(2)+header is a multiple of 64
  size_t unpadded = 10 + header.size() + 1;
  size_t pad = (64 - unpadded % 64) % 64;
  header += std::string(pad, ' ');
  header += '\n';

  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open for write: " + path.string());
  f.write(kMagic, 6);
  f.put(1).put(0);
  uint16_t hlen = static_cast<uint16_t>(header.size());
  f.write(reinterpret_cast<const char*>(&hlen), 2);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  size_t n = 1;
  for (size_t d : shape) n *= d;
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * item_size));
  if (!f) throw LoadError("short write: " + path.string());
}

void save_u8(const std::filesystem::path& path, const std::vector<size_t>& shape,
             const uint8_t* data) {
  save_raw(path, "|u1", shape, data, 1);
}
void save_i32(const std::filesystem::path& path, const std::vector<size_t>& shape,
              const int32_t* data) {
  save_raw(path, "<i4", shape, data, 4);
}
void save_f32(const std::filesystem::path& path, const std::vector<size_t>& shape,
              const float* data) {
  save_raw(path, "<f4", shape, data, 4);
}

static size_t dtype_size(const std::string& d) {
  if (d == "|u1") return 1;
  if (d == "<i4" || d == "<f4") return 4;
  throw LoadError("unsupported npy dtype: " + d);
}

Array load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open: " + path.string());
  char magic[6];
  f.read(magic, 6);
  if (!f || std::memcmp(magic, kMagic, 6) != 0)
    throw LoadError("not an npy file: " + path.string());
  char ver[2];
  f.read(ver, 2);
  if (!f || ver[0] != 1) throw LoadError("unsupported npy version: " + path.string());
  uint16_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 2);
  std::string header(hlen, '\0');
  f.read(header.data(), hlen);
  if (!f) throw LoadError("truncated npy header: " + path.string());

  Array a;
  auto dpos = header.find("'descr':");
  auto q1 = header.find('\'', dpos + 8);
  auto q2 = header.find('\'', q1 + 1);
  if (dpos == std::string::npos || q2 == std::string::npos)
    throw LoadError("bad npy header: " + path.string());
  a.dtype = header.substr(q1 + 1, q2 - q1 - 1);
  if (header.find("'fortran_order': False") == std::string::npos)
    throw LoadError("fortran-order npy unsupported: " + path.string());
  auto sp = header.find("'shape':");
  auto p1 = header.find('(', sp);
  auto p2 = header.find(')', p1);
  if (sp == std::string::npos || p2 == std::string::npos)
    throw LoadError("bad npy shape: " + path.string());
  std::string dims = header.substr(p1 + 1, p2 - p1 - 1);
  size_t pos = 0;
  while (pos < dims.size()) {
    while (pos < dims.size() && (dims[pos] == ' ' || dims[pos] == ',')) ++pos;
    if (pos >= dims.size()) break;
    size_t end = pos;
    while (end < dims.size() && isdigit(static_cast<unsigned char>(dims[end]))) ++end;
    if (end == pos) throw LoadError("bad npy shape: " + path.string());
    a.shape.push_back(std::stoull(dims.substr(pos, end - pos)));
    pos = end;
  }

  size_t bytes = a.count() * dtype_size(a.dtype);
  a.raw.resize(bytes);
  f.read(reinterpret_cast<char*>(a.raw.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw LoadError("truncated npy payload: " + path.string());
  return a;
}

}  // namespace eaaslab::npy
