#include "asab/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace asab {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw CloudParseError(line, fmt::format("'{}' is not a number", tok));
  }
  if (!std::isfinite(v)) {
    throw CloudParseError(line, fmt::format("'{}' is not a finite number", tok));
  }
  return v;
}

long long parse_integer(std::string_view tok, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw CloudParseError(line, fmt::format("'{}' is not an integer", tok));
  }
  return v;
}

std::uint8_t parse_channel(std::string_view tok, std::size_t line) {
  const long long v = parse_integer(tok, line);
  if (v < 0 || v > 255) {
    throw CloudParseError(line, fmt::format("color value {} outside [0, 255]", v));
  }
  return static_cast<std::uint8_t>(v);
}

enum class ScalarKind { Float32, Float64, Integer };

struct Column {
  std::string name;
  ScalarKind kind = ScalarKind::Float64;
};

double read_coordinate(std::string_view tok, ScalarKind kind, std::size_t line) {
  const double v = parse_real(tok, line);
  // Single-precision columns hold exactly the float value.
  return kind == ScalarKind::Float32 ? static_cast<double>(static_cast<float>(v)) : v;
}

std::optional<std::size_t> find_column(const std::vector<Column>& cols,
                                       std::initializer_list<std::string_view> names) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (std::find(names.begin(), names.end(), cols[i].name) != names.end()) {
      return i;
    }
  }
  return std::nullopt;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

ScalarKind ply_kind(std::string_view type, std::size_t line) {
  if (type == "float" || type == "float32") return ScalarKind::Float32;
  if (type == "double" || type == "float64") return ScalarKind::Float64;
  static constexpr std::string_view kInts[] = {"char",  "uchar", "short", "ushort", "int",
                                               "uint",  "int8",  "uint8", "int16",  "uint16",
                                               "int32", "uint32"};
  if (std::find(std::begin(kInts), std::end(kInts), type) != std::end(kInts)) {
    return ScalarKind::Integer;
  }
  throw CloudParseError(line, fmt::format("unknown PLY property type '{}'", type));
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<Column> columns;
  bool has_list = false;
};

PointCloud parse_ply(std::istream& in, const std::string& default_frame) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"}) {
    throw CloudParseError(reader.number(), "missing 'ply' magic line");
  }
  std::string frame_id = default_frame;
  std::uint64_t timestamp = 0;
  std::vector<PlyElement> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (reader.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw CloudParseError(reader.number(), "malformed format line");
      if (tok[1] != "ascii") {
        throw CloudParseError(reader.number(),
                              fmt::format("unsupported PLY format '{}', only ascii", tok[1]));
      }
      if (tok[2] != "1.0") {
        throw CloudParseError(reader.number(), fmt::format("unsupported PLY version '{}'", tok[2]));
      }
      saw_format = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() == 3 && tok[0] == "comment" && tok[1] == "frame_id") {
        frame_id = std::string(tok[2]);
      } else if (tok.size() == 3 && tok[0] == "comment" && tok[1] == "timestamp_ns") {
        const long long ts = parse_integer(tok[2], reader.number());
        if (ts < 0) throw CloudParseError(reader.number(), "negative timestamp");
        timestamp = static_cast<std::uint64_t>(ts);
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw CloudParseError(reader.number(), "malformed element line");
      const long long n = parse_integer(tok[2], reader.number());
      if (n < 0) throw CloudParseError(reader.number(), "negative element count");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(n), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty()) {
        throw CloudParseError(reader.number(), "property declared before any element");
      }
      if (tok.size() == 5 && tok[1] == "list") {
        elements.back().has_list = true;
      } else if (tok.size() == 3) {
        elements.back().columns.push_back({std::string(tok[2]), ply_kind(tok[1], reader.number())});
      } else {
        throw CloudParseError(reader.number(), "malformed property line");
      }
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      throw CloudParseError(reader.number(), fmt::format("unexpected header keyword '{}'", tok[0]));
    }
  }
  if (!saw_format) throw CloudParseError(reader.number(), "PLY header lacks a format line");
  if (!saw_end) throw CloudParseError(reader.number(), "PLY header is not terminated");

  const auto vertex = std::find_if(elements.begin(), elements.end(),
                                   [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex == elements.end()) {
    throw CloudParseError(reader.number(), "PLY header declares no vertex element");
  }
  if (vertex->has_list) {
    throw CloudParseError(reader.number(), "list properties on vertices are not supported");
  }
  const auto& cols = vertex->columns;
  const auto ix = find_column(cols, {"x"}), iy = find_column(cols, {"y"}),
             iz = find_column(cols, {"z"});
  if (!ix || !iy || !iz) {
    throw CloudParseError(reader.number(), "vertex element must declare x, y and z");
  }
  const auto ir = find_column(cols, {"red", "r"}), ig = find_column(cols, {"green", "g"}),
             ib = find_column(cols, {"blue", "b"});
  const bool has_color = ir && ig && ib;

  std::vector<CloudPoint> points;
  points.reserve(std::min<std::size_t>(vertex->count, PointCloud::kDefaultMaxPoints));
  for (const PlyElement& e : elements) {
    for (std::size_t row = 0; row < e.count; ++row) {
      if (!reader.next(line)) {
        throw CloudParseError(reader.number(),
                              fmt::format("expected {} '{}' rows, file ended after {}", e.count,
                                          e.name, row));
      }
      if (&e != &*vertex) continue;
      const auto tok = split_ws(line);
      if (tok.size() != cols.size()) {
        throw CloudParseError(reader.number(), fmt::format("expected {} values, found {}",
                                                           cols.size(), tok.size()));
      }
      CloudPoint p;
      p.position = {read_coordinate(tok[*ix], cols[*ix].kind, reader.number()),
                    read_coordinate(tok[*iy], cols[*iy].kind, reader.number()),
                    read_coordinate(tok[*iz], cols[*iz].kind, reader.number())};
      if (has_color) {
        p.color = {parse_channel(tok[*ir], reader.number()), parse_channel(tok[*ig], reader.number()),
                   parse_channel(tok[*ib], reader.number())};
      }
      if (points.size() == PointCloud::kDefaultMaxPoints) {
        throw CloudParseError(reader.number(), "cloud exceeds the point limit");
      }
      points.push_back(p);
    }
  }
  return PointCloud(std::move(frame_id), timestamp, std::move(points));
}

PointCloud parse_pcd(std::istream& in, const std::string& frame_id) {
  LineReader reader(in);
  std::string line;
  std::vector<std::string> fields;
  std::vector<std::string> sizes, types, counts;
  std::optional<std::size_t> declared_points;
  bool saw_data = false;
  while (reader.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string_view key = tok[0];
    auto rest = [&] {
      std::vector<std::string> v;
      for (std::size_t i = 1; i < tok.size(); ++i) v.emplace_back(tok[i]);
      return v;
    };
    if (key == "VERSION") {
      if (tok.size() != 2 || (tok[1] != "0.7" && tok[1] != ".7")) {
        throw CloudParseError(reader.number(), "unsupported PCD version, expected 0.7");
      }
    } else if (key == "FIELDS") {
      fields = rest();
    } else if (key == "SIZE") {
      sizes = rest();
    } else if (key == "TYPE") {
      types = rest();
    } else if (key == "COUNT") {
      counts = rest();
    } else if (key == "WIDTH" || key == "HEIGHT" || key == "VIEWPOINT") {
      // Row layout is irrelevant for unorganized ascii data.
    } else if (key == "POINTS") {
      if (tok.size() != 2) throw CloudParseError(reader.number(), "malformed POINTS line");
      const long long n = parse_integer(tok[1], reader.number());
      if (n < 0) throw CloudParseError(reader.number(), "negative POINTS");
      declared_points = static_cast<std::size_t>(n);
    } else if (key == "DATA") {
      if (tok.size() != 2 || tok[1] != "ascii") {
        throw CloudParseError(reader.number(), "unsupported PCD data encoding, only ascii");
      }
      saw_data = true;
      break;
    } else {
      throw CloudParseError(reader.number(), fmt::format("unexpected PCD header key '{}'", key));
    }
  }
  if (!saw_data) throw CloudParseError(reader.number(), "PCD header lacks a DATA line");
  if (!declared_points) throw CloudParseError(reader.number(), "PCD header lacks POINTS");
  if (fields.empty() || types.size() != fields.size() ||
      (!sizes.empty() && sizes.size() != fields.size())) {
    throw CloudParseError(reader.number(), "PCD FIELDS/SIZE/TYPE lengths disagree");
  }
  if (!counts.empty() && counts.size() != fields.size()) {
    throw CloudParseError(reader.number(), "PCD COUNT length disagrees with FIELDS");
  }
  // Token offset of each field in a row.
  std::vector<std::size_t> offset(fields.size());
  std::size_t width = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    offset[i] = width;
    const long long c = counts.empty() ? 1 : parse_integer(counts[i], reader.number());
    if (c < 1) throw CloudParseError(reader.number(), "PCD COUNT must be positive");
    width += static_cast<std::size_t>(c);
  }
  auto field = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto fx = field("x"), fy = field("y"), fz = field("z");
  if (!fx || !fy || !fz) throw CloudParseError(reader.number(), "PCD FIELDS must include x y z");
  auto frgb = field("rgb");
  if (!frgb) frgb = field("rgba");
  auto coord_kind = [&](std::size_t i) {
    if (types[i] != "F") {
      throw CloudParseError(reader.number(), "PCD coordinates must have TYPE F");
    }
    return (!sizes.empty() && sizes[i] == "8") ? ScalarKind::Float64 : ScalarKind::Float32;
  };
  const ScalarKind kx = coord_kind(*fx), ky = coord_kind(*fy), kz = coord_kind(*fz);

  std::vector<CloudPoint> points;
  points.reserve(std::min(*declared_points, PointCloud::kDefaultMaxPoints));
  for (std::size_t row = 0; row < *declared_points; ++row) {
    if (!reader.next(line)) {
      throw CloudParseError(reader.number(), fmt::format("expected {} points, file ended after {}",
                                                         *declared_points, row));
    }
    const auto tok = split_ws(line);
    if (tok.size() != width) {
      throw CloudParseError(reader.number(),
                            fmt::format("expected {} values, found {}", width, tok.size()));
    }
    CloudPoint p;
    p.position = {read_coordinate(tok[offset[*fx]], kx, reader.number()),
                  read_coordinate(tok[offset[*fy]], ky, reader.number()),
                  read_coordinate(tok[offset[*fz]], kz, reader.number())};
    if (frgb) {
      const std::string_view t = tok[offset[*frgb]];
      std::uint32_t packed = 0;
      if (types[*frgb] == "F") {
        // PCL packs 0x00RRGGBB into the bits of a float.
        packed = std::bit_cast<std::uint32_t>(static_cast<float>(
            [&] {
              float f = 0.0f;
              const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), f);
              if (ec != std::errc() || ptr != t.data() + t.size()) {
                throw CloudParseError(reader.number(), fmt::format("'{}' is not a number", t));
              }
              return f;
            }()));
      } else {
        const long long v = parse_integer(t, reader.number());
        if (v < 0 || v > 0xFFFFFFFFLL) {
          throw CloudParseError(reader.number(), "packed rgb out of range");
        }
        packed = static_cast<std::uint32_t>(v);
      }
      p.color = {static_cast<std::uint8_t>((packed >> 16) & 0xFF),
                 static_cast<std::uint8_t>((packed >> 8) & 0xFF),
                 static_cast<std::uint8_t>(packed & 0xFF)};
    }
    if (points.size() == PointCloud::kDefaultMaxPoints) {
      throw CloudParseError(reader.number(), "cloud exceeds the point limit");
    }
    points.push_back(p);
  }
  return PointCloud(frame_id, 0, std::move(points));
}

std::string coord(double v) { return fmt::format("{:.9g}", static_cast<float>(v)); }

}  // namespace

CloudParseError::CloudParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, what) : what), line_(line) {}

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return CloudFormat::PlyAscii;
  if (ext == ".pcd") return CloudFormat::PcdAscii;
  throw CloudParseError(0, fmt::format("unsupported cloud file extension '{}'", ext));
}

PointCloud parse_cloud(std::istream& in, CloudFormat format, const std::string& frame_id) {
  return format == CloudFormat::PlyAscii ? parse_ply(in, frame_id) : parse_pcd(in, frame_id);
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw CloudParseError(0, fmt::format("cannot open '{}'", path.string()));
  }
  return parse_cloud(in, format);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format) {
  const auto points = cloud.points();
  if (format == CloudFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\n";
    if (!cloud.frame_id().empty() &&
        cloud.frame_id().find_first_of(" \t\r\n") == std::string::npos) {
      out << "comment frame_id " << cloud.frame_id() << '\n';
    }
    out << "comment timestamp_ns " << cloud.timestamp_ns() << '\n';
    out << "element vertex " << points.size() << '\n';
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (const CloudPoint& p : points) {
      out << fmt::format("{} {} {} {} {} {}\n", coord(p.position.x), coord(p.position.y),
                         coord(p.position.z), p.color.r, p.color.g, p.color.b);
    }
  } else {
    out << "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n";
    out << "FIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F U\nCOUNT 1 1 1 1\n";
    out << "WIDTH " << points.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
    out << "POINTS " << points.size() << "\nDATA ascii\n";
    for (const CloudPoint& p : points) {
      const std::uint32_t packed = (std::uint32_t{p.color.r} << 16) |
                                   (std::uint32_t{p.color.g} << 8) | std::uint32_t{p.color.b};
      out << fmt::format("{} {} {} {}\n", coord(p.position.x), coord(p.position.y),
                         coord(p.position.z), packed);
    }
  }
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  }
  write_cloud(out, cloud, format);
  if (!out) {
    throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
  }
}

void write_shaded_ply(std::ostream& out, const PointCloud& cloud,
                      std::span<const ShadedPoint> shaded) {
  if (shaded.size() != cloud.size()) {
    throw std::invalid_argument("shaded points do not match the cloud");
  }
  const auto kept = std::count_if(shaded.begin(), shaded.end(), [](const ShadedPoint& s) { return s.keep; });
  out << "ply\nformat ascii 1.0\ncomment shaded snapshot\n";
  out << "element vertex " << kept << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\n";
  out << "property float size_px\nend_header\n";
  const auto points = cloud.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!shaded[i].keep) continue;
    const Rgba c = shaded[i].rgba;
    out << fmt::format("{} {} {} {} {} {} {} {:.9g}\n", coord(points[i].position.x),
                       coord(points[i].position.y), coord(points[i].position.z), c.r, c.g, c.b, c.a,
                       shaded[i].size_px);
  }
}

}  // namespace asab
