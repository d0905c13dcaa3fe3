#include "meshseq/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "meshseq/error.hpp"

namespace meshseq {

GridSpec::GridSpec(int n) : resolution(n) {
  if (n < 2 || n > 65535) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid resolution must be in [2, 65535], got " + std::to_string(n));
  }
}

bool QFace::operator==(const QFace& other) const {
  if (arity != other.arity) return false;
  return std::equal(v.begin(), v.begin() + arity, other.v.begin());
}

NormalizedMesh normalize(const Mesh& mesh) {
  validate(mesh);
  const auto box = bounding_box(mesh);
  const auto ext = box.extent();
  const double longest = std::max({ext[0], ext[1], ext[2]});
  if (!(longest > 0.0)) {
    throw Error(ErrorCode::kDegenerateBounds, "all vertices coincide");
  }
  NormalizationTransform t{box.center(), 1.0 / longest};
  return {apply_transform(mesh, t), t};
}

Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& transform) {
  Mesh out = mesh;
  for (auto& v : out.vertices) v = transform.apply(v);
  return out;
}

std::uint16_t quantize_coordinate(double c, const GridSpec& grid) {
  if (!(c >= -0.5 - kQuantizeSlack && c <= 0.5 + kQuantizeSlack)) {
    throw Error(ErrorCode::kOutOfRange,
                "coordinate " + std::to_string(c) + " outside the unit cube; normalize first");
  }
  const auto n = grid.resolution;
  const double bin = std::floor((c + 0.5) * n);
  return static_cast<std::uint16_t>(std::clamp(bin, 0.0, static_cast<double>(n - 1)));
}

double dequantize_coordinate(std::uint16_t i, const GridSpec& grid) {
  return (static_cast<double>(i) + 0.5) / grid.resolution - 0.5;
}

QuantizedMesh quantize(const Mesh& normalized, const GridSpec& grid) {
  validate(normalized);
  // Only referenced vertices: unreferenced ones lie outside the normalized box.
  auto point = [&](std::uint32_t i) {
    const auto& v = normalized.vertices[i];
    return GridPoint{quantize_coordinate(v[0], grid), quantize_coordinate(v[1], grid),
                     quantize_coordinate(v[2], grid)};
  };
  QuantizedMesh q{grid, {}};
  q.faces.reserve(normalized.faces.size());
  for (const auto& f : normalized.faces) {
    QFace face;
    face.arity = 3;
    for (int k = 0; k < 3; ++k) face.v[k] = point(f[k]);
    q.faces.push_back(face);
  }
  return q;
}

Mesh dequantize(const QuantizedMesh& qmesh) {
  Mesh mesh;
  std::map<std::array<std::uint16_t, 3>, std::uint32_t> index;
  auto vertex_id = [&](const GridPoint& p) {
    auto [it, inserted] =
        index.try_emplace({p.x, p.y, p.z}, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      mesh.vertices.push_back({dequantize_coordinate(p.x, qmesh.grid),
                               dequantize_coordinate(p.y, qmesh.grid),
                               dequantize_coordinate(p.z, qmesh.grid)});
    }
    return it->second;
  };
  for (const auto& f : qmesh.faces) {
    std::array<std::uint32_t, 4> ids{};
    for (int k = 0; k < f.arity; ++k) ids[k] = vertex_id(f.v[k]);
    for (int k = 1; k + 1 < f.arity; ++k) mesh.faces.push_back({ids[0], ids[k], ids[k + 1]});
  }
  return mesh;
}

namespace {

int distinct_vertices(const QFace& f) {
  int distinct = 0;
  for (int i = 0; i < f.arity; ++i) {
    bool seen = false;
    for (int j = 0; j < i; ++j) seen = seen || f.v[j] == f.v[i];
    if (!seen) ++distinct;
  }
  return distinct;
}

QFace rotated(const QFace& f, int shift) {
  QFace out;
  out.arity = f.arity;
  for (int k = 0; k < f.arity; ++k) out.v[k] = f.v[(k + shift) % f.arity];
  return out;
}

// Among all cyclic rotations, pick the one with the lexicographically
// smallest key tuple. Its leading vertex is the z-y-x minimum; for faces with
// a repeated minimal vertex the full tuple decides, so the result does not
// depend on the input rotation.
QFace rotate_to_min(const QFace& f) {
  QFace best = f;
  for (int s = 1; s < f.arity; ++s) {
    QFace cand = rotated(f, s);
    if (compare_faces(cand, best) < 0) best = cand;
  }
  return best;
}

}  // namespace

std::strong_ordering compare_faces(const QFace& a, const QFace& b) {
  const int n = std::min(a.arity, b.arity);
  for (int k = 0; k < n; ++k) {
    if (auto c = zyx_key(a.v[k]) <=> zyx_key(b.v[k]); c != 0) return c;
  }
  return a.arity <=> b.arity;
}

QuantizedMesh canonicalize(const QuantizedMesh& qmesh, CanonicalStats* stats) {
  CanonicalStats local;
  QuantizedMesh out{qmesh.grid, {}};
  out.faces.reserve(qmesh.faces.size());
  for (const auto& f : qmesh.faces) {
    if (f.arity < 3 || f.arity > 4) {
      throw Error(ErrorCode::kUnsupportedFace, "face arity must be 3 or 4");
    }
    if (distinct_vertices(f) < 3) {
      ++local.degenerate_dropped;
      continue;
    }
    out.faces.push_back(rotate_to_min(f));
  }
  // zyx keys are a bijection on grid points, so equal key tuples mean equal
  // faces; stable sort keeps input order among exact duplicates.
  std::stable_sort(out.faces.begin(), out.faces.end(),
                   [](const QFace& a, const QFace& b) { return compare_faces(a, b) < 0; });
  const auto before = out.faces.size();
  out.faces.erase(std::unique(out.faces.begin(), out.faces.end()), out.faces.end());
  local.duplicates_dropped = before - out.faces.size();
  if (stats) *stats = local;
  if (out.faces.empty()) {
    throw Error(ErrorCode::kAllFacesDegenerate, "no face survives canonicalization");
  }
  return out;
}

bool is_canonical(const QuantizedMesh& qmesh) {
  if (qmesh.faces.empty()) return false;
  const auto n = qmesh.grid.resolution;
  const QFace* prev = nullptr;
  for (const auto& f : qmesh.faces) {
    if (f.arity < 3 || f.arity > 4) return false;
    for (int k = 0; k < f.arity; ++k) {
      if (f.v[k].x >= n || f.v[k].y >= n || f.v[k].z >= n) return false;
    }
    if (distinct_vertices(f) < 3) return false;
    if (!(rotate_to_min(f) == f)) return false;
    if (prev && compare_faces(*prev, f) >= 0) return false;
    prev = &f;
  }
  return true;
}

}  // namespace meshseq
