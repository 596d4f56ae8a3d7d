#include "dreampipe/bvh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace dreampipe {
namespace {

constexpr int kBins = 16;
constexpr std::size_t kLeafTriangles = 4;
constexpr double kTraversalCost = 1.0;
constexpr double kPacketCost = 1.0;

double surface_area(const Aabb& b) {
  if (!b.valid()) return 0.0;
  const Vec3 e = b.extent();
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

struct BuildItem {
  Aabb box;
  Vec3 centroid;
  std::uint32_t id;
};

}  // namespace

Bvh::Bvh(const TexturedMesh& mesh) { build(mesh.positions, mesh.position_indices); }

Bvh::Bvh(const std::vector<Vec3>& positions, const std::vector<IndexTriple>& triangles) {
  build(positions, triangles);
}

void Bvh::build(const std::vector<Vec3>& positions, const std::vector<IndexTriple>& triangles) {
  require(!triangles.empty(), ErrorKind::InvalidArgument, "cannot build a BVH over an empty mesh");
  triangle_count_ = triangles.size();

  std::vector<BuildItem> items(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    BuildItem& it = items[i];
    for (std::uint32_t v : triangles[i]) {
      require(v < positions.size(), ErrorKind::InvalidArgument, "BVH: vertex index out of range");
      it.box.extend(positions[v]);
    }
    it.centroid = it.box.center();
    it.id = static_cast<std::uint32_t>(i);
  }

  auto make_leaf = [&](Node& node, std::size_t begin, std::size_t end) {
    // Keep triangle order inside a leaf by index so packets are deterministic.
    std::sort(items.begin() + begin, items.begin() + end,
              [](const BuildItem& a, const BuildItem& b) { return a.id < b.id; });
    node.first_packet = static_cast<std::uint32_t>(packets_.size());
    for (std::size_t i = begin; i < end; i += 4) {
      simd::TrianglePacket4 pk;
      for (int lane = 0; lane < 4; ++lane) {
        if (i + lane >= end) {
          pk.ids[lane] = std::numeric_limits<std::uint32_t>::max();
          continue;
        }
        const std::uint32_t id = items[i + lane].id;
        const IndexTriple& t = triangles[id];
        const Vec3& a = positions[t[0]];
        const Vec3 e1 = positions[t[1]] - a;
        const Vec3 e2 = positions[t[2]] - a;
        for (int k = 0; k < 3; ++k) {
          pk.v0[k][lane] = a[k];
          pk.e1[k][lane] = e1[k];
          pk.e2[k][lane] = e2[k];
        }
        pk.ids[lane] = id;
      }
      packets_.push_back(pk);
    }
    node.packet_count = static_cast<std::uint32_t>(packets_.size() - node.first_packet);
  };

  struct Task {
    std::size_t node;
    std::size_t begin;
    std::size_t end;
  };
  nodes_.reserve(2 * triangles.size() / kLeafTriangles + 1);
  nodes_.emplace_back();
  std::vector<Task> stack{{0, 0, items.size()}};
  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    Aabb box;
    Aabb centroid_box;
    for (std::size_t i = task.begin; i < task.end; ++i) {
      box.extend(items[i].box);
      centroid_box.extend(items[i].centroid);
    }
    nodes_[task.node].lo = box.lo;
    nodes_[task.node].hi = box.hi;
    const std::size_t count = task.end - task.begin;
    if (count <= kLeafTriangles) {
      make_leaf(nodes_[task.node], task.begin, task.end);
      continue;
    }

    // Binned SAH over the widest centroid axis.
    const Vec3 extent = centroid_box.extent();
    int axis = 0;
    if (extent.y() > extent[axis]) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    std::size_t mid = task.begin + count / 2;
    if (extent[axis] > 0.0) {
      std::array<Aabb, kBins> bin_box;
      std::array<std::size_t, kBins> bin_count{};
      const double lo = centroid_box.lo[axis];
      const double scale = kBins / extent[axis];
      auto bin_of = [&](const BuildItem& it) {
        return std::min(kBins - 1, static_cast<int>((it.centroid[axis] - lo) * scale));
      };
      for (std::size_t i = task.begin; i < task.end; ++i) {
        const int b = bin_of(items[i]);
        bin_box[b].extend(items[i].box);
        ++bin_count[b];
      }
      std::array<double, kBins> right_cost{};
      Aabb acc;
      std::size_t acc_count = 0;
      for (int b = kBins - 1; b > 0; --b) {
        acc.extend(bin_box[b]);
        acc_count += bin_count[b];
        right_cost[b] = surface_area(acc) * std::ceil(acc_count / 4.0);
      }
      acc = Aabb();
      acc_count = 0;
      double best = std::numeric_limits<double>::infinity();
      int best_split = -1;
      for (int b = 0; b < kBins - 1; ++b) {
        acc.extend(bin_box[b]);
        acc_count += bin_count[b];
        if (acc_count == 0 || acc_count == count) continue;
        const double cost = surface_area(acc) * std::ceil(acc_count / 4.0) + right_cost[b + 1];
        if (cost < best) {
          best = cost;
          best_split = b;
        }
      }
      const double leaf_cost = surface_area(box) * std::ceil(count / 4.0) * kPacketCost;
      const double split_cost = kTraversalCost * surface_area(box) + kPacketCost * best;
      if (best_split >= 0 && (split_cost < leaf_cost || count > 16)) {
        auto it = std::partition(items.begin() + task.begin, items.begin() + task.end,
                                 [&](const BuildItem& item) { return bin_of(item) <= best_split; });
        mid = static_cast<std::size_t>(it - items.begin());
      } else if (count <= 16) {
        make_leaf(nodes_[task.node], task.begin, task.end);
        continue;
      } else {
        std::nth_element(items.begin() + task.begin, items.begin() + mid, items.begin() + task.end,
                         [&](const BuildItem& a, const BuildItem& b) {
                           return a.centroid[axis] < b.centroid[axis];
                         });
      }
    } else if (count <= 16) {
      make_leaf(nodes_[task.node], task.begin, task.end);
      continue;
    }
    const std::size_t left = nodes_.size();
    nodes_.emplace_back();
    const std::size_t right = nodes_.size();
    nodes_.emplace_back();
    nodes_[task.node].left = static_cast<std::uint32_t>(left);
    nodes_[task.node].right = static_cast<std::uint32_t>(right);
    nodes_[task.node].axis = static_cast<std::uint32_t>(axis);
    stack.push_back({right, mid, task.end});
    stack.push_back({left, task.begin, mid});
  }
}

namespace {

// Slab test; NaN slabs (origin on a face plane, parallel ray) are ignored.
inline bool hit_box(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& inv_dir,
                    double t_min, double t_max, double& t_enter) {
  double t0 = t_min;
  double t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    const double a = (lo[k] - origin[k]) * inv_dir[k];
    const double b = (hi[k] - origin[k]) * inv_dir[k];
    t0 = std::fmax(t0, std::fmin(a, b));
    t1 = std::fmin(t1, std::fmax(a, b));
  }
  t_enter = t0;
  // Small slack keeps grazing hits on box faces from being culled by rounding.
  return t0 <= t1 * (1.0 + 1e-12) + 1e-12;
}

}  // namespace

std::optional<RayHit> Bvh::intersect(const Ray& ray) const {
  const simd::KernelTable& k = simd::active();
  const double origin[3] = {ray.origin.x(), ray.origin.y(), ray.origin.z()};
  const double dir[3] = {ray.direction.x(), ray.direction.y(), ray.direction.z()};
  const Vec3 inv_dir = ray.direction.cwiseInverse();

  double best_t = ray.t_max;
  std::uint32_t best_id = std::numeric_limits<std::uint32_t>::max();
  double best_u = 0.0;
  double best_v = 0.0;

  std::uint32_t stack[256];
  int sp = 0;
  stack[sp++] = 0;
  simd::PacketHits4 hits;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    double t_enter = 0.0;
    if (!hit_box(node.lo, node.hi, ray.origin, inv_dir, ray.t_min, best_t, t_enter)) continue;
    if (node.packet_count == 0) {
      // Visit the child on the ray's near side first.
      const bool flip = dir[node.axis] < 0.0;
      stack[sp++] = flip ? node.left : node.right;
      stack[sp++] = flip ? node.right : node.left;
      continue;
    }
    for (std::uint32_t p = node.first_packet; p < node.first_packet + node.packet_count; ++p) {
      const simd::TrianglePacket4& pk = packets_[p];
      unsigned mask = k.intersect4(pk, origin, dir, ray.t_min, best_t, hits);
      while (mask) {
        const int lane = __builtin_ctz(mask);
        mask &= mask - 1;
        const double t = hits.t[lane];
        const std::uint32_t id = pk.ids[lane];
        if (t < best_t || (t == best_t && id < best_id)) {
          best_t = t;
          best_id = id;
          best_u = hits.u[lane];
          best_v = hits.v[lane];
        }
      }
    }
  }
  if (best_id == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  RayHit hit;
  hit.distance = best_t;
  hit.sample.triangle = best_id;
  hit.sample.weights = {1.0 - best_u - best_v, best_u, best_v};
  return hit;
}

}  // namespace dreampipe
