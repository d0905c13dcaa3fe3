#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshseq/geometry.hpp"

namespace meshseq {

struct PointCloud {
  std::vector<Vec3> points;
  std::string source_id;
};

// Area-weighted uniform surface samples. Deterministic in (seed, stream).
// Throws Error(kInvalidMesh) when the total area is zero.
PointCloud sample_points(const Mesh& mesh, std::size_t count, std::uint64_t seed,
                         std::uint64_t stream = 0,
                         std::vector<std::uint32_t>* face_ids = nullptr);

// Static 3-d tree for exact nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  // Squared Euclidean distance to the nearest stored point.
  double nearest_squared(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // leaf range in points_
    std::int32_t left = -1, right = -1;
    double split = 0;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, double& best) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Mean squared nearest-neighbor distance a->b plus b->a.
double chamfer(const PointCloud& a, const PointCloud& b);
double chamfer(const PointCloud& a, const KdTree& a_tree, const PointCloud& b,
               const KdTree& b_tree);

// Symmetric Hausdorff distance (Euclidean, not squared).
double hausdorff(const PointCloud& a, const PointCloud& b);

// Row-major dense matrix of pairwise distances.
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// Chamfer distances between every pair in `clouds` (symmetric, zero diagonal).
DistanceMatrix pairwise_chamfer(std::span<const PointCloud> clouds);
// Chamfer distances gen x ref.
DistanceMatrix cross_chamfer(std::span<const PointCloud> gen, std::span<const PointCloud> ref);

// Set metrics over a |gen| x |ref| chamfer matrix.
double mmd_from_matrix(const DistanceMatrix& gen_by_ref);
double cov_from_matrix(const DistanceMatrix& gen_by_ref);
// `all` is the (|gen|+|ref|)^2 matrix over gen followed by ref.
double one_nna_from_matrix(const DistanceMatrix& all, std::size_t n_gen);

double mmd(std::span<const PointCloud> gen, std::span<const PointCloud> ref);
double cov(std::span<const PointCloud> gen, std::span<const PointCloud> ref);
double one_nna(std::span<const PointCloud> gen, std::span<const PointCloud> ref);

inline constexpr double kJsdSmoothing = 1e-12;

// Pooled occupancy histogram over grid^3 voxels covering [-0.5, 0.5]^3.
std::vector<double> voxel_histogram(std::span<const PointCloud> clouds, int grid);

// Jensen-Shannon divergence (natural log) between two count histograms.
double jsd_from_histograms(std::span<const double> p_counts, std::span<const double> q_counts);

double jsd(std::span<const PointCloud> gen, std::span<const PointCloud> ref, int grid = 28);

struct EvalParams {
  std::size_t points = 2048;
  int jsd_grid = 28;
  std::uint64_t seed = 0;
  bool normalize = true;
};

struct EvalReport {
  double cov = 0;      // percent
  double mmd = 0;      // x 10^3
  double one_nna = 0;  // percent
  double jsd = 0;      // x 10^3
  std::size_t n_gen = 0;
  std::size_t n_ref = 0;
  std::vector<std::string> excluded;
  EvalParams params;
  std::vector<std::string> ids;  // gen ids then ref ids, matching `distances`
  std::shared_ptr<const DistanceMatrix> distances;

  std::string to_json() const;
};

// Samples every mesh, computes COV, MMD, 1-NNA and JSD. Meshes that cannot be
// sampled are listed in `excluded`. Throws Error(kEmptyInput) when either set
// ends up empty.
EvalReport evaluate(std::span<const Mesh> gen, std::span<const Mesh> ref,
                    const EvalParams& params = {});

// Little-endian float32 matrix plus a JSON sidecar with shape and ids.
void dump_distance_matrix(const EvalReport& report, const std::string& path);

}  // namespace meshseq
