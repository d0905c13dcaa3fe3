#include "meshseq/obj.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "meshseq/error.hpp"

namespace meshseq {

void validate(const Mesh& mesh) {
  if (mesh.faces.empty()) throw Error(ErrorCode::kEmptyMesh, "mesh has no faces");
  for (const auto& v : mesh.vertices) {
    for (double c : v) {
      if (!std::isfinite(c)) {
        throw Error(ErrorCode::kInvalidMesh, "non-finite vertex coordinate");
      }
    }
  }
  const auto n = mesh.vertices.size();
  for (const auto& f : mesh.faces) {
    for (auto i : f) {
      if (i >= n) {
        throw Error(ErrorCode::kInvalidMesh,
                    "face index " + std::to_string(i) + " >= vertex count " +
                        std::to_string(n));
      }
    }
  }
}

BoundingBox bounding_box(const Mesh& mesh) {
  BoundingBox box{{HUGE_VAL, HUGE_VAL, HUGE_VAL}, {-HUGE_VAL, -HUGE_VAL, -HUGE_VAL}};
  for (const auto& f : mesh.faces) {
    for (auto i : f) {
      const auto& v = mesh.vertices[i];
      for (int a = 0; a < 3; ++a) {
        box.lo[a] = std::min(box.lo[a], v[a]);
        box.hi[a] = std::max(box.hi[a], v[a]);
      }
    }
  }
  return box;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Vec3 w{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  const Vec3 n{u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2],
               u[0] * w[1] - u[1] * w[0]};
  return 0.5 * std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::kMalformedRecord,
              "line " + std::to_string(line_no) + ": " + why);
}

double parse_real(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  // from_chars rejects a leading '+', which OBJ writers occasionally emit.
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    malformed(line_no, "bad coordinate '" + std::string(field) + "'");
  }
  return value;
}

std::uint32_t parse_index(std::string_view field, std::size_t vertex_count,
                          std::size_t line_no) {
  // Only the position index matters; `i/t/n` attributes are ignored.
  const auto slash = field.find('/');
  if (slash != std::string_view::npos) field = field.substr(0, slash);
  long long value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    malformed(line_no, "bad face index '" + std::string(field) + "'");
  }
  // Negative indices are relative to the vertices defined so far.
  if (value < 0) value += static_cast<long long>(vertex_count) + 1;
  if (value <= 0 || value > static_cast<long long>(vertex_count)) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "line " + std::to_string(line_no) + ": face index " +
                    std::string(field) + " out of range (" +
                    std::to_string(vertex_count) + " vertices)");
  }
  return static_cast<std::uint32_t>(value - 1);
}

}  // namespace

Mesh parse_obj(std::string_view text, const ObjOptions& options) {
  Mesh mesh;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::uint32_t> polygon;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields[0] == "v") {
      // x y z, optionally followed by w or an rgb triple.
      if (fields.size() < 4 || fields.size() > 8) {
        malformed(line_no, "vertex record needs 3 coordinates");
      }
      Vec3 v{};
      for (std::size_t a = 0; a < 3; ++a) v[a] = parse_real(fields[a + 1], line_no);
      for (std::size_t a = 4; a < fields.size(); ++a) parse_real(fields[a], line_no);
      mesh.vertices.push_back(v);
    } else if (fields[0] == "f") {
      if (fields.size() < 4) malformed(line_no, "face record needs >= 3 indices");
      polygon.clear();
      for (std::size_t k = 1; k < fields.size(); ++k) {
        polygon.push_back(parse_index(fields[k], mesh.vertices.size(), line_no));
      }
      if (polygon.size() > 3 && !options.triangulate) {
        malformed(line_no, std::to_string(polygon.size()) +
                               "-gon rejected (triangulation disabled)");
      }
      for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
        mesh.faces.push_back({polygon[0], polygon[k], polygon[k + 1]});
      }
    }
    if (nl == text.size()) break;
  }
  validate(mesh);
  return mesh;
}

namespace {

void append_fixed6(std::string& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::fixed, 6);
  if (ec != std::errc()) throw Error(ErrorCode::kIo, "coordinate formatting failed");
  out.append(buf, ptr);
}

}  // namespace

std::string write_obj(const Mesh& mesh) {
  validate(mesh);
  std::string out;
  out.reserve(mesh.vertices.size() * 32 + mesh.faces.size() * 20);
  for (const auto& v : mesh.vertices) {
    out += 'v';
    for (double c : v) {
      out += ' ';
      append_fixed6(out, c);
    }
    out += '\n';
  }
  for (const auto& f : mesh.faces) {
    out += 'f';
    for (auto i : f) {
      out += ' ';
      out += std::to_string(i + 1);
    }
    out += '\n';
  }
  return out;
}

Mesh read_obj_file(const std::filesystem::path& path, const ObjOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Mesh mesh = parse_obj(buffer.str(), options);
  mesh.source_id = path.stem().string();
  return mesh;
}

void write_obj_file(const std::filesystem::path& path, const Mesh& mesh) {
  const auto text = write_obj(mesh);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace meshseq
