#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

#include "meshseq/geometry.hpp"

namespace meshseq {

// N^3 lattice over the normalized interval [-0.5, +0.5].
struct GridSpec {
  int resolution = 128;

  explicit GridSpec(int n = 128);
  bool operator==(const GridSpec&) const = default;
};

struct GridPoint {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint16_t z = 0;

  bool operator==(const GridPoint&) const = default;
};

// Ordering key used by canonicalization: z first, then y, then x.
inline std::array<std::uint16_t, 3> zyx_key(const GridPoint& p) { return {p.z, p.y, p.x}; }

// A polygon on the grid; arity 3 (triangle) or 4 (quad).
struct QFace {
  std::array<GridPoint, 4> v{};
  std::uint8_t arity = 3;

  bool operator==(const QFace& other) const;
};

struct QuantizedMesh {
  GridSpec grid;
  std::vector<QFace> faces;

  bool operator==(const QuantizedMesh&) const = default;
};

struct NormalizationTransform {
  Vec3 center{0, 0, 0};
  double scale = 1.0;  // reciprocal of the longest bounding-box extent

  Vec3 apply(const Vec3& p) const {
    return {(p[0] - center[0]) * scale, (p[1] - center[1]) * scale,
            (p[2] - center[2]) * scale};
  }
  Vec3 invert(const Vec3& p) const {
    return {p[0] / scale + center[0], p[1] / scale + center[1], p[2] / scale + center[2]};
  }
};

struct NormalizedMesh {
  Mesh mesh;
  NormalizationTransform transform;
};

// Centers the bounding box at the origin and scales the longest extent to 1.
NormalizedMesh normalize(const Mesh& mesh);

// Applies a transform computed for another mesh.
Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& transform);

inline constexpr double kQuantizeSlack = 1e-6;

// floor((c + 0.5) * N) clamped to [0, N-1]. Rejects coordinates outside
// [-0.5 - 1e-6, 0.5 + 1e-6].
std::uint16_t quantize_coordinate(double c, const GridSpec& grid);
double dequantize_coordinate(std::uint16_t i, const GridSpec& grid);

// Non-canonical: face structure and vertex order are preserved.
QuantizedMesh quantize(const Mesh& normalized, const GridSpec& grid);

// Bin centers; quads are fan-split into two triangles. Shared grid points
// become shared vertices.
Mesh dequantize(const QuantizedMesh& qmesh);

struct CanonicalStats {
  std::size_t degenerate_dropped = 0;
  std::size_t duplicates_dropped = 0;

  std::size_t dropped() const { return degenerate_dropped + duplicates_dropped; }
};

// Cyclic rotation so the z-y-x minimal vertex leads, degenerate and
// duplicate faces removed, faces sorted by their rotated key tuples.
// Throws Error(kAllFacesDegenerate) when nothing survives.
QuantizedMesh canonicalize(const QuantizedMesh& qmesh, CanonicalStats* stats = nullptr);

bool is_canonical(const QuantizedMesh& qmesh);

// Lexicographic comparison of two faces by their z-y-x key tuples.
std::strong_ordering compare_faces(const QFace& a, const QFace& b);

}  // namespace meshseq
