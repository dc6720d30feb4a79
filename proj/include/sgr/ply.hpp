#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sgr/point_cloud.hpp"

namespace sgr {

class PlyError : public Error {
 public:
  PlyError(const std::string& what, std::size_t offset, std::string property)
      : Error("ply: " + what + " (byte " + std::to_string(offset) +
              (property.empty() ? "" : ", property '" + property + "'") + ")"),
        offset_(offset),
        property_(std::move(property)) {}

  std::size_t offset() const { return offset_; }
  const std::string& property() const { return property_; }

 private:
  std::size_t offset_;
  std::string property_;
};

enum class PlyEncoding { ascii, binary_le };

/// Side information collected while parsing.
struct PlyInfo {
  bool had_color = true;
  bool had_normals = false;
  PlyEncoding encoding = PlyEncoding::ascii;
  std::vector<std::string> warnings;
};

namespace ply_detail {

enum class Type { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::i8:
    case Type::u8:
      return 1;
    case Type::i16:
    case Type::u16:
      return 2;
    case Type::i32:
    case Type::u32:
    case Type::f32:
      return 4;
    case Type::f64:
      return 8;
  }
  return 0;
}

inline bool parse_type(std::string_view s, Type& t) {
  if (s == "char" || s == "int8") t = Type::i8;
  else if (s == "uchar" || s == "uint8") t = Type::u8;
  else if (s == "short" || s == "int16") t = Type::i16;
  else if (s == "ushort" || s == "uint16") t = Type::u16;
  else if (s == "int" || s == "int32") t = Type::i32;
  else if (s == "uint" || s == "uint32") t = Type::u32;
  else if (s == "float" || s == "float32") t = Type::f32;
  else if (s == "double" || s == "float64") t = Type::f64;
  else return false;
  return true;
}

struct Property {
  std::string name;
  Type type = Type::f32;
  bool is_list = false;
  Type count_type = Type::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

// Slot of each known vertex property in the output record.
enum Slot : int { kX, kY, kZ, kR, kG, kB, kNx, kNy, kNz, kSlotCount, kSkip = -1 };

inline int slot_of(std::string_view name) {
  if (name == "x") return kX;
  if (name == "y") return kY;
  if (name == "z") return kZ;
  if (name == "r" || name == "red") return kR;
  if (name == "g" || name == "green") return kG;
  if (name == "b" || name == "blue") return kB;
  if (name == "nx") return kNx;
  if (name == "ny") return kNy;
  if (name == "nz") return kNz;
  return kSkip;
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void write_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1)
    std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

inline double read_binary_scalar(const char* p, Type t) {
  switch (t) {
    case Type::i8: return read_le<std::int8_t>(p);
    case Type::u8: return read_le<std::uint8_t>(p);
    case Type::i16: return read_le<std::int16_t>(p);
    case Type::u16: return read_le<std::uint16_t>(p);
    case Type::i32: return read_le<std::int32_t>(p);
    case Type::u32: return read_le<std::uint32_t>(p);
    case Type::f32: return read_le<float>(p);
    case Type::f64: return read_le<double>(p);
  }
  return 0;
}

// Whitespace tokenizer over the ASCII body that remembers byte offsets.
class Tokens {
 public:
  Tokens(std::string_view data, std::size_t pos) : data_(data), pos_(pos) {}

  bool next(std::string_view& tok, std::size_t& at) {
    while (pos_ < data_.size() && is_space(data_[pos_])) ++pos_;
    if (pos_ >= data_.size()) return false;
    at = pos_;
    while (pos_ < data_.size() && !is_space(data_[pos_])) ++pos_;
    tok = data_.substr(at, pos_ - at);
    return true;
  }

  std::size_t pos() const { return pos_; }

 private:
  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  }
  std::string_view data_;
  std::size_t pos_;
};

}  // namespace ply_detail

/// Parses a PLY stream (ascii or binary_little_endian). Only the `vertex`
/// element is kept; other elements are skipped with a warning.
inline PointCloud load_ply(std::istream& in, PlyInfo* info_out = nullptr) {
  using namespace ply_detail;
  const std::string data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  PlyInfo info;

  // Header.
  std::size_t pos = 0;
  auto next_line = [&](std::string& line, std::size_t& at) -> bool {
    if (pos >= data.size()) return false;
    at = pos;
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) nl = data.size();
    line = data.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return true;
  };

  std::string line;
  std::size_t at = 0;
  if (!next_line(line, at) || line != "ply")
    throw PlyError("missing 'ply' magic", 0, "");

  std::vector<Element> elements;
  bool have_format = false;
  bool ended = false;
  while (next_line(line, at)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") info.encoding = PlyEncoding::ascii;
      else if (fmt == "binary_little_endian") info.encoding = PlyEncoding::binary_le;
      else if (fmt == "binary_big_endian")
        throw PlyError("binary_big_endian is not supported", at, "");
      else throw PlyError("unknown format '" + fmt + "'", at, "");
      if (ver != "1.0") throw PlyError("unsupported version '" + ver + "'", at, "");
      have_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0 || ls.fail())
        throw PlyError("malformed element line", at, "");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty())
        throw PlyError("property before any element", at, "");
      Property p;
      std::string t1;
      ls >> t1;
      if (t1 == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        if (!parse_type(ct, p.count_type) || !parse_type(it, p.type))
          throw PlyError("unknown list type", at, p.name);
      } else {
        ls >> p.name;
        if (!parse_type(t1, p.type))
          throw PlyError("unknown type '" + t1 + "'", at, p.name);
      }
      if (p.name.empty()) throw PlyError("property without a name", at, "");
      elements.back().properties.push_back(std::move(p));
    } else if (kw == "end_header") {
      ended = true;
      break;
    } else {
      throw PlyError("unexpected header keyword '" + kw + "'", at, "");
    }
  }
  if (!ended) throw PlyError("header has no end_header", data.size(), "");
  if (!have_format) throw PlyError("header has no format line", 0, "");

  const Element* vertex = nullptr;
  for (const auto& e : elements)
    if (e.name == "vertex") vertex = &e;
  if (vertex == nullptr) throw PlyError("no 'vertex' element", 0, "");

  // Map vertex properties to slots and validate their types.
  std::vector<int> slots;
  std::array<bool, kSlotCount> present{};
  for (const auto& p : vertex->properties) {
    if (p.name.rfind("diffuse_", 0) == 0)
      throw PlyError("ambiguous color property is not supported", 0, p.name);
    int s = slot_of(p.name);
    if (s != kSkip) {
      if (p.is_list) throw PlyError("list type for a scalar property", 0, p.name);
      const bool is_color = s == kR || s == kG || s == kB;
      if (is_color && p.type != Type::u8)
        throw PlyError("unsupported property type (expected uchar)", 0, p.name);
      if (!is_color && p.type != Type::f32)
        throw PlyError("unsupported property type (expected float)", 0, p.name);
      if (present[s]) throw PlyError("duplicate property", 0, p.name);
      present[s] = true;
    }
    slots.push_back(s);
  }
  for (int s : {kX, kY, kZ})
    if (!present[s])
      throw PlyError("vertex lacks coordinate", 0, std::string(1, "xyz"[s]));
  const int n_color = present[kR] + present[kG] + present[kB];
  const int n_normal = present[kNx] + present[kNy] + present[kNz];
  if (n_color != 0 && n_color != 3)
    throw PlyError("partial color properties", 0, "red/green/blue");
  if (n_normal != 0 && n_normal != 3)
    throw PlyError("partial normal properties", 0, "nx/ny/nz");
  info.had_color = n_color == 3;
  info.had_normals = n_normal == 3;

  PointCloud cloud;
  cloud.geometry.resize(vertex->count);
  cloud.color.assign(vertex->count, Rgb{128, 128, 128});
  if (info.had_normals) cloud.normals.emplace(vertex->count);

  auto store = [&](std::size_t i, int slot, double v) {
    switch (slot) {
      case kX: case kY: case kZ:
        cloud.geometry[i][slot] = static_cast<float>(v);
        break;
      case kR: case kG: case kB:
        cloud.color[i][slot - kR] = static_cast<std::uint8_t>(v);
        break;
      case kNx: case kNy: case kNz:
        (*cloud.normals)[i][slot - kNx] = static_cast<float>(v);
        break;
      default:
        break;
    }
  };

  for (const auto& e : elements) {
    if (&e != vertex && e.count > 0)
      info.warnings.push_back("ignored element '" + e.name + "' (" +
                              std::to_string(e.count) + " items)");
  }

  if (info.encoding == PlyEncoding::ascii) {
    Tokens toks(data, pos);
    std::string_view tok;
    std::size_t tat = 0;
    for (const auto& e : elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& p = e.properties[k];
          if (!toks.next(tok, tat))
            throw PlyError("truncated payload in element '" + e.name + "'",
                           toks.pos(), p.name);
          if (p.is_list) {
            long long n = -1;
            auto r = std::from_chars(tok.data(), tok.data() + tok.size(), n);
            if (r.ec != std::errc() || n < 0)
              throw PlyError("bad list count", tat, p.name);
            for (long long j = 0; j < n; ++j)
              if (!toks.next(tok, tat))
                throw PlyError("truncated payload in element '" + e.name + "'",
                               toks.pos(), p.name);
            continue;
          }
          if (!is_vertex || slots[k] == kSkip) continue;
          const int s = slots[k];
          if (p.type == Type::u8) {
            int v = -1;
            auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() ||
                v < 0 || v > 255)
              throw PlyError("bad uchar value '" + std::string(tok) + "'", tat,
                             p.name);
            store(i, s, v);
          } else {
            float v = 0;
            auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
              throw PlyError("bad float value '" + std::string(tok) + "'", tat,
                             p.name);
            store(i, s, v);
          }
        }
      }
    }
  } else {
    std::size_t off = pos;
    auto need = [&](std::size_t bytes, const Element& e, const Property& p) {
      if (off + bytes > data.size())
        throw PlyError("truncated payload in element '" + e.name + "'", off,
                       p.name);
    };
    for (const auto& e : elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& p = e.properties[k];
          if (p.is_list) {
            const std::size_t cs = type_size(p.count_type);
            need(cs, e, p);
            const double n = read_binary_scalar(data.data() + off, p.count_type);
            off += cs;
            if (n < 0) throw PlyError("bad list count", off - cs, p.name);
            const std::size_t bytes =
                static_cast<std::size_t>(n) * type_size(p.type);
            need(bytes, e, p);
            off += bytes;
            continue;
          }
          const std::size_t sz = type_size(p.type);
          need(sz, e, p);
          if (is_vertex && slots[k] != kSkip)
            store(i, slots[k], read_binary_scalar(data.data() + off, p.type));
          off += sz;
        }
      }
    }
  }

  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (float c : cloud.geometry[i])
      if (!std::isfinite(c))
        throw PlyError("non-finite coordinate at vertex " + std::to_string(i),
                       0, "x/y/z");
  if (cloud.normals) {
    bool ok = true;
    for (const auto& n : *cloud.normals)
      if (!(std::abs(norm(to_vec3(n)) - 1.0) <= 1e-4)) ok = false;
    if (!ok) {
      cloud.normals.reset();
      info.had_normals = false;
      info.warnings.push_back("file normals are not unit length; dropped");
    }
  }
  if (info_out) *info_out = std::move(info);
  return cloud;
}

inline PointCloud load_ply(const std::string& bytes, PlyInfo* info = nullptr) {
  std::istringstream in(bytes);
  return load_ply(in, info);
}

namespace ply_detail {

inline void append_float(std::string& out, float v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, r.ptr);
}

}  // namespace ply_detail

/// Writes x/y/z as float, red/green/blue as uchar, and nx/ny/nz as float
/// when the cloud carries normals.
inline std::string save_ply(const PointCloud& cloud, PlyEncoding encoding) {
  cloud.validate();
  std::string out;
  out += "ply\n";
  out += encoding == PlyEncoding::ascii ? "format ascii 1.0\n"
                                        : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.normals)
    out += "property float nx\nproperty float ny\nproperty float nz\n";
  out += "end_header\n";

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& g = cloud.geometry[i];
    const auto& c = cloud.color[i];
    if (encoding == PlyEncoding::ascii) {
      for (int a = 0; a < 3; ++a) {
        ply_detail::append_float(out, g[a]);
        out += ' ';
      }
      out += std::to_string(c[0]) + ' ' + std::to_string(c[1]) + ' ' +
             std::to_string(c[2]);
      if (cloud.normals) {
        for (int a = 0; a < 3; ++a) {
          out += ' ';
          ply_detail::append_float(out, (*cloud.normals)[i][a]);
        }
      }
      out += '\n';
    } else {
      for (int a = 0; a < 3; ++a) ply_detail::write_le(out, g[a]);
      for (int a = 0; a < 3; ++a) ply_detail::write_le(out, c[a]);
      if (cloud.normals)
        for (int a = 0; a < 3; ++a)
          ply_detail::write_le(out, (*cloud.normals)[i][a]);
    }
  }
  return out;
}

inline void save_ply(std::ostream& os, const PointCloud& cloud,
                     PlyEncoding encoding) {
  const std::string bytes = save_ply(cloud, encoding);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("ply: write failed");
}

}  // namespace sgr
