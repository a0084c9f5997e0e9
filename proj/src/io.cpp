#include "dynsdf/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>

namespace dynsdf {

namespace fs = std::filesystem;

namespace {

std::string at_path(const fs::path& path) { return " (" + path.string() + ")"; }

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("cannot open file for reading" + at_path(path));
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot open file for writing" + at_path(path));
  return out;
}

void finish_write(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error("write failed" + at_path(path));
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_double(const std::string& token, const fs::path& path, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (token.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": cannot parse number '" + token + "'" +
                      at_path(path));
  }
}

int parse_int(const std::string& token, const fs::path& path, std::size_t line_no) {
  const double v = parse_double(token, path, line_no);
  if (v != std::floor(v)) {
    throw FormatError("line " + std::to_string(line_no) + ": expected integer, got '" + token + "'" +
                      at_path(path));
  }
  return static_cast<int>(v);
}

}  // namespace

std::vector<Vec3> Scan::world_points() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

void validate_mesh(const Mesh& mesh) {
  const auto n = mesh.vertices.size();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (auto idx : tri) {
      if (idx >= n) {
        throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                              std::to_string(idx) + " but mesh has " + std::to_string(n));
      }
    }
    if (tri[0] == tri[1] && tri[1] == tri[2]) {
      throw ValidationError("triangle " + std::to_string(t) + " is degenerate");
    }
  }
}

std::vector<Vec3> read_scan_bin(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (size % 16 != 0) {
    throw FormatError("scan size " + std::to_string(size) + " is not a multiple of 16 bytes" +
                      at_path(path));
  }
  std::vector<float> raw(size / sizeof(float));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("short read" + at_path(path));

  std::vector<Vec3> points(size / 16);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float* r = &raw[4 * i];
    if (!std::isfinite(r[0]) || !std::isfinite(r[1]) || !std::isfinite(r[2])) {
      throw ValidationError("non-finite coordinate at point index " + std::to_string(i) + at_path(path));
    }
    points[i] = Vec3(r[0], r[1], r[2]);
  }
  return points;
}

void write_scan_bin(const fs::path& path, std::span<const Vec3> points) {
  auto out = open_out(path, std::ios::binary);
  for (const auto& p : points) {
    put_le(out, static_cast<float>(p.x()));
    put_le(out, static_cast<float>(p.y()));
    put_le(out, static_cast<float>(p.z()));
    put_le(out, 0.0f);
  }
  finish_write(out, path);
}

std::vector<RigidTransform> read_poses(const fs::path& path) {
  auto in = open_in(path);
  std::vector<RigidTransform> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 12) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 12 values, got " +
                        std::to_string(tokens.size()) + at_path(path));
    }
    RigidTransform pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        const double v = parse_double(tokens[4 * r + c], path, line_no);
        if (!std::isfinite(v)) {
          throw FormatError("line " + std::to_string(line_no) + ": non-finite value" + at_path(path));
        }
        if (c < 3) pose.R(r, c) = v; else pose.T(r) = v;
      }
    }
    if (!pose.is_orthonormal()) {
      throw ValidationError("line " + std::to_string(line_no) + ": rotation is not orthonormal" +
                            at_path(path));
    }
    poses.push_back(pose);
  }
  return poses;
}

void write_poses(const fs::path& path, std::span<const RigidTransform> poses) {
  auto out = open_out(path);
  out.precision(17);
  for (const auto& pose : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        out << (c < 3 ? pose.R(r, c) : pose.T(r)) << ((r == 2 && c == 3) ? '\n' : ' ');
      }
    }
  }
  finish_write(out, path);
}

std::vector<Box3D> read_box_tracks(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Box3D> boxes;
  std::set<std::pair<int, int>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (fields.size() != 8) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                        std::to_string(fields.size()) + at_path(path));
    }
    Box3D box;
    box.frame_id = parse_int(fields[0], path, line_no);
    box.track_id = parse_int(fields[1], path, line_no);
    for (int i = 0; i < 3; ++i) box.center[i] = parse_double(fields[2 + i], path, line_no);
    box.h = parse_double(fields[5], path, line_no);
    box.w = parse_double(fields[6], path, line_no);
    box.l = parse_double(fields[7], path, line_no);
    if (!box.center.allFinite()) {
      throw ValidationError("line " + std::to_string(line_no) + ": non-finite box center" + at_path(path));
    }
    if (!(box.h > 0.0 && box.w > 0.0 && box.l > 0.0)) {
      throw ValidationError("line " + std::to_string(line_no) + ": box dimensions must be positive" +
                            at_path(path));
    }
    if (!seen.emplace(box.frame_id, box.track_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate (frame " +
                            std::to_string(box.frame_id) + ", track " + std::to_string(box.track_id) +
                            ")" + at_path(path));
    }
    boxes.push_back(box);
  }
  std::stable_sort(boxes.begin(), boxes.end(), [](const Box3D& a, const Box3D& b) {
    return std::tie(a.frame_id, a.track_id) < std::tie(b.frame_id, b.track_id);
  });
  return boxes;
}

void write_box_tracks(const fs::path& path, std::span<const Box3D> boxes) {
  auto out = open_out(path);
  out.precision(17);
  for (const auto& b : boxes) {
    out << b.frame_id << ',' << b.track_id << ',' << b.center.x() << ',' << b.center.y() << ','
        << b.center.z() << ',' << b.h << ',' << b.w << ',' << b.l << '\n';
  }
  finish_write(out, path);
}

void write_mesh_ply(const Mesh& mesh, const fs::path& path, PlyFormat format) {
  validate_mesh(mesh);
  const bool binary = format == PlyFormat::BinaryLittleEndian;
  auto out = open_out(path, binary ? std::ios::binary : std::ios::out);
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\n"
      << "end_header\n";
  if (binary) {
    for (const auto& v : mesh.vertices) {
      put_le(out, v.x());
      put_le(out, v.y());
      put_le(out, v.z());
    }
    for (const auto& t : mesh.triangles) {
      put_le(out, std::uint8_t{3});
      for (auto idx : t) put_le(out, idx);
    }
  } else {
    out.precision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  finish_write(out, path);
}

void write_points_ply(const fs::path& path, std::span<const Vec3> points, std::span<const int> labels) {
  if (!labels.empty() && labels.size() != points.size()) {
    throw ValidationError("label count does not match point count");
  }
  auto out = open_out(path, std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (!labels.empty()) out << "property int label\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    put_le(out, points[i].x());
    put_le(out, points[i].y());
    put_le(out, points[i].z());
    if (!labels.empty()) put_le(out, static_cast<std::int32_t>(labels[i]));
  }
  finish_write(out, path);
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1}, {"uchar", 1}, {"int8", 1}, {"uint8", 1}, {"short", 2}, {"ushort", 2},
      {"int16", 2}, {"uint16", 2}, {"int", 4}, {"uint", 4}, {"int32", 4}, {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw FormatError("unsupported PLY type '" + t + "'");
  return it->second;
}

double read_binary_scalar(std::istream& in, const std::string& t) {
  if (t == "char" || t == "int8") return get_le<std::int8_t>(in);
  if (t == "uchar" || t == "uint8") return get_le<std::uint8_t>(in);
  if (t == "short" || t == "int16") return get_le<std::int16_t>(in);
  if (t == "ushort" || t == "uint16") return get_le<std::uint16_t>(in);
  if (t == "int" || t == "int32") return get_le<std::int32_t>(in);
  if (t == "uint" || t == "uint32") return get_le<std::uint32_t>(in);
  if (t == "float" || t == "float32") return get_le<float>(in);
  if (t == "double" || t == "float64") return get_le<double>(in);
  throw FormatError("unsupported PLY type '" + t + "'");
}

}  // namespace

Mesh read_mesh_ply(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw FormatError("missing 'ply' magic" + at_path(path));

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw FormatError("unsupported PLY format '" + fmt + "'" + at_path(path));
    } else if (kw == "element") {
      PlyElement e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw FormatError("property before element" + at_path(path));
      PlyProperty p;
      std::string type;
      ss >> type;
      if (type == "list") {
        p.is_list = true;
        ss >> p.count_type >> p.type >> p.name;
      } else {
        p.type = type;
        ss >> p.name;
      }
      ply_type_size(p.type);
      elements.back().props.push_back(p);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!in) throw FormatError("truncated PLY header" + at_path(path));

  Mesh mesh;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    int ix = -1, iy = -1, iz = -1;
    for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
      if (e.props[i].name == "x") ix = i;
      if (e.props[i].name == "y") iy = i;
      if (e.props[i].name == "z") iz = i;
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw FormatError("vertex without x/y/z" + at_path(path));

    for (std::size_t r = 0; r < e.count; ++r) {
      Vec3 v = Vec3::Zero();
      std::istringstream row;
      if (!binary) {
        if (!std::getline(in, line)) throw FormatError("truncated PLY body" + at_path(path));
        row.str(line);
      }
      auto scalar = [&](const std::string& type) -> double {
        if (binary) return read_binary_scalar(in, type);
        double x;
        if (!(row >> x)) throw FormatError("malformed PLY row" + at_path(path));
        return x;
      };
      for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
        const auto& p = e.props[i];
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(scalar(p.count_type));
          std::vector<std::uint32_t> idx(n);
          for (auto& k : idx) k = static_cast<std::uint32_t>(scalar(p.type));
          if (is_face && p.name.starts_with("vertex_ind")) {
            for (std::size_t k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
          }
        } else {
          const double x = scalar(p.type);
          if (i == ix) v.x() = x;
          if (i == iy) v.y() = x;
          if (i == iz) v.z() = x;
        }
      }
      if (binary && !in) throw FormatError("truncated PLY body" + at_path(path));
      if (is_vertex) mesh.vertices.push_back(v);
    }
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace dynsdf
