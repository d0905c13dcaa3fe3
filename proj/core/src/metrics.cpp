#include "meshseq/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <nlohmann/json.hpp>

#include "meshseq/canonical.hpp"
#include "meshseq/error.hpp"
#include "meshseq/parallel.hpp"
#include "meshseq/rng.hpp"

namespace meshseq {

PointCloud sample_points(const Mesh& mesh, std::size_t count, std::uint64_t seed,
                         std::uint64_t stream, std::vector<std::uint32_t>* face_ids) {
  validate(mesh);
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "point count must be positive");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidMesh, "mesh has zero surface area");

  RandomStream rng(seed, stream);
  PointCloud cloud;
  cloud.source_id = mesh.source_id;
  cloud.points.reserve(count);
  if (face_ids) face_ids->clear();
  for (std::size_t i = 0; i < count; ++i) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    // upper_bound never lands on a zero-area face.
    const auto f = static_cast<std::size_t>(it - cumulative.begin());
    const auto& t = mesh.faces[f];
    const auto& a = mesh.vertices[t[0]];
    const auto& b = mesh.vertices[t[1]];
    const auto& c = mesh.vertices[t[2]];
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - s, wb = s * (1.0 - r2), wc = s * r2;
    cloud.points.push_back({wa * a[0] + wb * b[0] + wc * c[0], wa * a[1] + wb * b[1] + wc * c[1],
                            wa * a[2] + wb * b[2] + wc * c[2]});
    if (face_ids) face_ids->push_back(static_cast<std::uint32_t>(f));
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// KdTree

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty point set");
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  // Split on the widest axis of this node's bounds.
  Vec3 lo = points_[begin], hi = points_[begin];
  for (auto i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], points_[i][a]);
      hi[a] = std::max(hi[a], points_[i][a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                   [axis](const Vec3& p, const Vec3& q) { return p[axis] < q[axis]; });
  const double split = points_[mid][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].split = split;
  nodes_[id].axis = static_cast<std::uint8_t>(axis);
  return id;
}

void KdTree::search(std::int32_t node_id, const Vec3& q, double& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (auto i = node.begin; i < node.end; ++i) best = std::min(best, squared_distance(q, points_[i]));
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double delta = q[node.axis] - node.split;
  const auto near = delta < 0 ? node.left : node.right;
  const auto far = delta < 0 ? node.right : node.left;
  search(near, q, best);
  if (delta * delta <= best) search(far, q, best);
}

double KdTree::nearest_squared(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  search(0, q, best);
  return best;
}

// ---------------------------------------------------------------------------
// Pairwise distances

namespace {

double mean_nearest(const PointCloud& from, const KdTree& to) {
  double sum = 0;
  for (const auto& p : from.points) sum += to.nearest_squared(p);
  return sum / static_cast<double>(from.points.size());
}

double max_nearest(const PointCloud& from, const KdTree& to) {
  double worst = 0;
  for (const auto& p : from.points) worst = std::max(worst, to.nearest_squared(p));
  return std::sqrt(worst);
}

void require_points(const PointCloud& c) {
  if (c.points.empty()) throw Error(ErrorCode::kInvalidArgument, "empty point cloud");
}

}  // namespace

double chamfer(const PointCloud& a, const KdTree& a_tree, const PointCloud& b,
               const KdTree& b_tree) {
  return mean_nearest(a, b_tree) + mean_nearest(b, a_tree);
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  require_points(a);
  require_points(b);
  const KdTree ta(a.points), tb(b.points);
  return chamfer(a, ta, b, tb);
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
  require_points(a);
  require_points(b);
  const KdTree ta(a.points), tb(b.points);
  return std::max(max_nearest(a, tb), max_nearest(b, ta));
}

namespace {

std::vector<KdTree> build_trees(std::span<const PointCloud> clouds) {
  std::vector<std::unique_ptr<KdTree>> slots(clouds.size());
  parallel_for(clouds.size(), [&](std::size_t i) {
    require_points(clouds[i]);
    slots[i] = std::make_unique<KdTree>(clouds[i].points);
  });
  std::vector<KdTree> trees;
  trees.reserve(clouds.size());
  for (auto& s : slots) trees.push_back(std::move(*s));
  return trees;
}

}  // namespace

DistanceMatrix pairwise_chamfer(std::span<const PointCloud> clouds) {
  const auto n = clouds.size();
  const auto trees = build_trees(clouds);
  DistanceMatrix d{n, n, std::vector<double>(n * n, 0.0)};
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const double v = chamfer(clouds[i], trees[i], clouds[j], trees[j]);
    d(i, j) = v;
    d(j, i) = v;
  });
  return d;
}

DistanceMatrix cross_chamfer(std::span<const PointCloud> gen, std::span<const PointCloud> ref) {
  const auto gt = build_trees(gen);
  const auto rt = build_trees(ref);
  DistanceMatrix d{gen.size(), ref.size(), std::vector<double>(gen.size() * ref.size(), 0.0)};
  parallel_for(gen.size() * ref.size(), [&](std::size_t k) {
    const auto i = k / ref.size(), j = k % ref.size();
    d(i, j) = chamfer(gen[i], gt[i], ref[j], rt[j]);
  });
  return d;
}

double mmd_from_matrix(const DistanceMatrix& d) {
  if (d.rows == 0 || d.cols == 0) throw Error(ErrorCode::kEmptyInput, "mmd needs non-empty sets");
  double sum = 0;
  for (std::size_t r = 0; r < d.cols; ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < d.rows; ++g) best = std::min(best, d(g, r));
    sum += best;
  }
  return sum / static_cast<double>(d.cols);
}

double cov_from_matrix(const DistanceMatrix& d) {
  if (d.rows == 0 || d.cols == 0) throw Error(ErrorCode::kEmptyInput, "cov needs non-empty sets");
  std::vector<std::uint8_t> matched(d.cols, 0);
  for (std::size_t g = 0; g < d.rows; ++g) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < d.cols; ++r) {
      if (d(g, r) < d(g, best)) best = r;  // ties keep the lower index
    }
    matched[best] = 1;
  }
  const auto hits = std::accumulate(matched.begin(), matched.end(), std::size_t{0});
  return 100.0 * static_cast<double>(hits) / static_cast<double>(d.cols);
}

double one_nna_from_matrix(const DistanceMatrix& all, std::size_t n_gen) {
  const auto n = all.rows;
  if (n_gen == 0 || n_gen >= n) throw Error(ErrorCode::kEmptyInput, "1-NNA needs non-empty sets");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (best == n || all(i, j) < all(i, best)) best = j;
    }
    if ((i < n_gen) == (best < n_gen)) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

double mmd(std::span<const PointCloud> gen, std::span<const PointCloud> ref) {
  return mmd_from_matrix(cross_chamfer(gen, ref));
}

double cov(std::span<const PointCloud> gen, std::span<const PointCloud> ref) {
  return cov_from_matrix(cross_chamfer(gen, ref));
}

double one_nna(std::span<const PointCloud> gen, std::span<const PointCloud> ref) {
  std::vector<PointCloud> all(gen.begin(), gen.end());
  all.insert(all.end(), ref.begin(), ref.end());
  return one_nna_from_matrix(pairwise_chamfer(all), gen.size());
}

// ---------------------------------------------------------------------------
// JSD

std::vector<double> voxel_histogram(std::span<const PointCloud> clouds, int grid) {
  if (grid < 1) throw Error(ErrorCode::kInvalidArgument, "JSD grid must be positive");
  const auto g = static_cast<std::size_t>(grid);
  std::vector<double> hist(g * g * g, 0.0);
  auto bin = [grid](double c) {
    const double b = std::floor((c + 0.5) * grid);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(grid - 1)));
  };
  for (const auto& cloud : clouds) {
    for (const auto& p : cloud.points) hist[(bin(p[0]) * g + bin(p[1])) * g + bin(p[2])] += 1.0;
  }
  return hist;
}

double jsd_from_histograms(std::span<const double> p_counts, std::span<const double> q_counts) {
  if (p_counts.size() != q_counts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "histogram sizes differ");
  }
  const double p_total = std::accumulate(p_counts.begin(), p_counts.end(), 0.0);
  const double q_total = std::accumulate(q_counts.begin(), q_counts.end(), 0.0);
  if (!(p_total > 0) || !(q_total > 0)) throw Error(ErrorCode::kEmptyInput, "empty histogram");
  // KL terms with zero mass contribute nothing; the smoothing constant floors
  // the log arguments and never binds for count histograms.
  double kl_p = 0, kl_q = 0;
  for (std::size_t i = 0; i < p_counts.size(); ++i) {
    const double p = p_counts[i] / p_total;
    const double q = q_counts[i] / q_total;
    const double m = 0.5 * (p + q);
    const double log_m = std::log(std::max(m, kJsdSmoothing));
    if (p > 0) kl_p += p * (std::log(std::max(p, kJsdSmoothing)) - log_m);
    if (q > 0) kl_q += q * (std::log(std::max(q, kJsdSmoothing)) - log_m);
  }
  return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

double jsd(std::span<const PointCloud> gen, std::span<const PointCloud> ref, int grid) {
  if (gen.empty() || ref.empty()) throw Error(ErrorCode::kEmptyInput, "jsd needs non-empty sets");
  return jsd_from_histograms(voxel_histogram(gen, grid), voxel_histogram(ref, grid));
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::uint64_t content_hash(const Mesh& mesh) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& v : mesh.vertices) {
    for (double c : v) feed(std::bit_cast<std::uint64_t>(c));
  }
  for (const auto& f : mesh.faces) {
    for (auto i : f) feed(i);
  }
  return h;
}

std::vector<PointCloud> sample_set(std::span<const Mesh> meshes, const EvalParams& params,
                                   std::vector<std::string>& excluded, std::vector<std::string>& ids) {
  std::vector<std::optional<PointCloud>> slots(meshes.size());
  std::vector<std::string> errors(meshes.size());
  parallel_for(meshes.size(), [&](std::size_t i) {
    try {
      const Mesh m = params.normalize ? normalize(meshes[i]).mesh : meshes[i];
      // The stream depends on content only, so identical meshes get
      // identical samples regardless of their position in a set.
      slots[i] = sample_points(m, params.points, params.seed, content_hash(m));
      slots[i]->source_id = meshes[i].source_id;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<PointCloud> clouds;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    const auto& id = meshes[i].source_id.empty() ? std::to_string(i) : meshes[i].source_id;
    if (slots[i]) {
      clouds.push_back(std::move(*slots[i]));
      ids.push_back(id);
    } else {
      excluded.push_back(id + ": " + errors[i]);
    }
  }
  return clouds;
}

}  // namespace

EvalReport evaluate(std::span<const Mesh> gen, std::span<const Mesh> ref, const EvalParams& params) {
  EvalReport report;
  report.params = params;
  if (gen.empty()) throw Error(ErrorCode::kEmptyInput, "generated set is empty");
  if (ref.empty()) throw Error(ErrorCode::kEmptyInput, "reference set is empty");
  auto gen_clouds = sample_set(gen, params, report.excluded, report.ids);
  auto ref_clouds = sample_set(ref, params, report.excluded, report.ids);
  if (gen_clouds.empty() || ref_clouds.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no usable mesh left after exclusions");
  }
  report.n_gen = gen_clouds.size();
  report.n_ref = ref_clouds.size();

  std::vector<PointCloud> all = gen_clouds;
  all.insert(all.end(), ref_clouds.begin(), ref_clouds.end());
  auto distances = std::make_shared<DistanceMatrix>(pairwise_chamfer(all));
  DistanceMatrix cross{report.n_gen, report.n_ref, {}};
  cross.values.reserve(report.n_gen * report.n_ref);
  for (std::size_t g = 0; g < report.n_gen; ++g) {
    for (std::size_t r = 0; r < report.n_ref; ++r) cross.values.push_back((*distances)(g, report.n_gen + r));
  }
  report.cov = cov_from_matrix(cross);
  report.mmd = mmd_from_matrix(cross) * 1e3;
  report.one_nna = one_nna_from_matrix(*distances, report.n_gen);
  report.jsd = jsd(gen_clouds, ref_clouds, params.jsd_grid) * 1e3;
  report.distances = std::move(distances);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["cov"] = cov;
  j["mmd"] = mmd;
  j["one_nna"] = one_nna;
  j["jsd"] = jsd;
  j["n_gen"] = n_gen;
  j["n_ref"] = n_ref;
  j["excluded"] = excluded;
  j["points"] = params.points;
  j["jsd_grid"] = params.jsd_grid;
  j["seed"] = params.seed;
  j["normalized"] = params.normalize;
  j["chamfer"] = "mean squared nearest-neighbor distance, both directions summed";
  j["scale"] = {{"mmd", 1e3}, {"jsd", 1e3}};
  return j.dump(2);
}

void dump_distance_matrix(const EvalReport& report, const std::string& path) {
  if (!report.distances) throw Error(ErrorCode::kInvalidArgument, "report has no distance matrix");
  const auto& d = *report.distances;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (double v : d.values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                        static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
    out.write(le, 4);
  }
  nlohmann::ordered_json sidecar;
  sidecar["shape"] = {d.rows, d.cols};
  sidecar["dtype"] = "float32-le";
  sidecar["ids"] = report.ids;
  sidecar["n_gen"] = report.n_gen;
  std::ofstream meta(path + ".json", std::ios::trunc);
  if (!meta) throw Error(ErrorCode::kIo, "cannot write " + path + ".json");
  meta << sidecar.dump(2) << '\n';
}

}  // namespace meshseq
