#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eans/params.hpp"

namespace eans {

/// Row-major n x dim matrix of points.
struct PointSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> point(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

struct ClusterResult {
  int k = 0;
  std::vector<int> labels;
  PointSet centroids;  // k x dim
  double inertia = 0;
  /// Inertia after each assignment pass; non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
};

namespace detail {
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    s += x * x;
  }
  return s;
}
}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops after `max_iters`
/// assignment passes or when no label changes. A cluster left empty by an
/// assignment pass takes over the point farthest from its own centroid.
inline ClusterResult kmeans(const PointSet& pts, int k, int max_iters,
                            std::uint64_t seed) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > pts.n)
    throw ConfigError("kmeans: k=" + std::to_string(k) +
                      " exceeds the number of points (" +
                      std::to_string(pts.n) + ")");
  const std::size_t n = pts.n, dim = pts.dim;
  auto rng = make_stream(seed, "kmeans++");

  ClusterResult res;
  res.k = k;
  res.centroids.n = k;
  res.centroids.dim = dim;
  res.centroids.data.assign(static_cast<std::size_t>(k) * dim, 0.0);
  auto set_centroid = [&](int c, std::size_t i) {
    std::copy_n(pts.data.begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                res.centroids.data.begin() + static_cast<std::ptrdiff_t>(c * dim));
  };

  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t first = pick(rng);
    set_centroid(0, first);
    chosen[first] = 1;
    for (int c = 1; c < k; ++c) {
      const auto prev = res.centroids.point(c - 1);
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = std::min(nearest[i], detail::sq_dist(pts.point(i), prev));
        if (!chosen[i]) total += nearest[i];
      }
      std::size_t next = n;
      if (total > 0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i]) continue;
          next = i;
          target -= nearest[i];
          if (target <= 0) break;
        }
      } else {
        // every remaining point coincides with a centroid; take any unused one
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i]) free.push_back(i);
        next = free[std::uniform_int_distribution<std::size_t>(
            0, free.size() - 1)(rng)];
      }
      chosen[next] = 1;
      set_centroid(c, next);
    }
  }

  res.labels.assign(n, -1);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(k);
  const int iters = std::max(1, max_iters);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dd = detail::sq_dist(pts.point(i), res.centroids.point(c));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    res.iterations = it + 1;

    // Repair empty clusters by stealing far-away points.
    std::fill(counts.begin(), counts.end(), 0);
    for (auto l : res.labels) ++counts[l];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[res.labels[i]] > 1 && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      --counts[res.labels[far]];
      res.labels[far] = c;
      ++counts[c];
      inertia -= dist[far];
      dist[far] = 0;
      set_centroid(c, far);
      changed = true;
    }
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    // Stop right after an assignment pass so labels match the centroids.
    if (!changed || it + 1 == iters) break;

    std::fill(res.centroids.data.begin(), res.centroids.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = pts.point(i);
      double* cdst = res.centroids.data.data() + res.labels[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) cdst[j] += p[j];
    }
    for (int c = 0; c < k; ++c)
      for (std::size_t j = 0; j < dim; ++j)
        res.centroids.data[c * dim + j] /= static_cast<double>(counts[c]);
  }
  return res;
}

/// Bijection between virtual (cluster-sorted) and real entity indices.
struct VirtualIndexMap {
  std::vector<EntityId> virt_to_real;
  std::vector<EntityId> real_to_virt;

  std::size_t size() const { return virt_to_real.size(); }

  static VirtualIndexMap identity(std::size_t n) {
    VirtualIndexMap m;
    m.virt_to_real.resize(n);
    std::iota(m.virt_to_real.begin(), m.virt_to_real.end(), 0);
    m.real_to_virt = m.virt_to_real;
    return m;
  }

  static VirtualIndexMap from_order(std::vector<EntityId> order) {
    VirtualIndexMap m;
    m.real_to_virt.assign(order.size(), -1);
    for (std::size_t v = 0; v < order.size(); ++v) m.real_to_virt[order[v]] = static_cast<EntityId>(v);
    m.virt_to_real = std::move(order);
    return m;
  }

  bool is_bijection() const {
    if (virt_to_real.size() != real_to_virt.size()) return false;
    const auto n = static_cast<EntityId>(virt_to_real.size());
    for (EntityId v = 0; v < n; ++v) {
      const auto r = virt_to_real[v];
      if (r < 0 || r >= n || real_to_virt[r] != v) return false;
    }
    return true;
  }

  friend bool operator==(const VirtualIndexMap&, const VirtualIndexMap&) = default;
};

/// Visits clusters starting at `first_cluster`, then repeatedly the unvisited
/// cluster whose centroid is nearest (L2) to the current one, ties to the
/// lowest id. Members of a cluster get consecutive virtual indices in
/// ascending real-index order.
inline VirtualIndexMap reorder_from(const ClusterResult& cl, int first_cluster) {
  const int k = cl.k;
  std::vector<std::vector<EntityId>> members(k);
  for (std::size_t e = 0; e < cl.labels.size(); ++e)
    members[cl.labels[e]].push_back(static_cast<EntityId>(e));

  std::vector<EntityId> order;
  order.reserve(cl.labels.size());
  std::vector<char> visited(k, 0);
  int cur = first_cluster;
  for (int step = 0; step < k; ++step) {
    visited[cur] = 1;
    order.insert(order.end(), members[cur].begin(), members[cur].end());
    int next = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (visited[c]) continue;
      const double d = detail::sq_dist(cl.centroids.point(cur), cl.centroids.point(c));
      if (d < best) {
        best = d;
        next = c;
      }
    }
    if (next < 0) break;
    cur = next;
  }
  return VirtualIndexMap::from_order(std::move(order));
}

/// reorder_from with the starting cluster drawn uniformly from `seed`.
inline VirtualIndexMap reorder(const ClusterResult& cl, std::uint64_t seed) {
  auto rng = make_stream(seed, "reorder");
  const int first = std::uniform_int_distribution<int>(0, cl.k - 1)(rng);
  return reorder_from(cl, first);
}

/// floor(x + z * sigma) wrapped onto [0, n).
inline EntityId gaussian_virtual_index(EntityId x, double z, double sigma,
                                       std::int64_t n) {
  auto v = static_cast<std::int64_t>(std::floor(static_cast<double>(x) + z * sigma));
  v %= n;
  if (v < 0) v += n;
  return static_cast<EntityId>(v);
}

inline constexpr int kEansMaxRedraws = 16;

/// Draws a negative for `pos_real` from a Gaussian centred on its virtual
/// index. Never returns `pos_real`: collisions are redrawn up to
/// kEansMaxRedraws times before falling back to a uniform pick.
template <typename Urbg>
EntityId sample_eans(const VirtualIndexMap& map, EntityId pos_real,
                     double sigma, Urbg& rng) {
  const auto n = static_cast<std::int64_t>(map.size());
  const EntityId x = map.real_to_virt[pos_real];
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < kEansMaxRedraws; ++attempt) {
    const EntityId xp = gaussian_virtual_index(x, normal(rng), sigma, n);
    if (xp != x) return map.virt_to_real[xp];
  }
  auto u = std::uniform_int_distribution<std::int64_t>(0, n - 2)(rng);
  if (u >= x) ++u;
  return map.virt_to_real[static_cast<std::size_t>(u)];
}

/// Entity representations of every entity as a point set.
template <typename Real>
PointSet entity_points(const ModelParams<Real>& p) {
  PointSet pts;
  pts.n = static_cast<std::size_t>(p.spec.num_entities);
  pts.dim = entity_repr_dim(p);
  pts.data.reserve(pts.n * pts.dim);
  for (EntityId e = 0; e < p.spec.num_entities; ++e) {
    const auto r = entity_repr(p, e);
    pts.data.insert(pts.data.end(), r.begin(), r.end());
  }
  return pts;
}

struct RefreshResult {
  VirtualIndexMap map;
  ClusterResult clusters;
};

/// Cluster current entity representations and rebuild the virtual order.
template <typename Real>
RefreshResult refresh_detailed(const ModelParams<Real>& p, int k,
                               std::uint64_t seed, int kmeans_iters) {
  RefreshResult out;
  out.clusters = kmeans(entity_points(p), k, kmeans_iters, seed);
  out.map = reorder(out.clusters, seed);
  return out;
}

template <typename Real>
VirtualIndexMap refresh(const ModelParams<Real>& p, int k, std::uint64_t seed,
                        int kmeans_iters) {
  return refresh_detailed(p, k, seed, kmeans_iters).map;
}

/// Two-column audit dump: "real_index<TAB>virtual_index" per entity, with an
/// optional cluster label column.
inline void write_index_map(const std::filesystem::path& path,
                            const VirtualIndexMap& map,
                            const std::vector<int>* labels = nullptr) {
  std::ofstream out(path);
  if (!out) throw UserError("eans_index", "cannot write " + path.string());
  out << "# real_index\tvirtual_index" << (labels ? "\tcluster" : "") << "\n";
  for (std::size_t r = 0; r < map.real_to_virt.size(); ++r) {
    out << r << '\t' << map.real_to_virt[r];
    if (labels) out << '\t' << (*labels)[r];
    out << '\n';
  }
}

inline VirtualIndexMap read_index_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read index map " + path.string());
  std::vector<EntityId> r2v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::size_t pos = 0;
    const long real = std::stol(line, &pos);
    const long virt = std::stol(line.substr(pos));
    if (real != static_cast<long>(r2v.size()))
      throw CheckpointError("index map rows out of order in " + path.string());
    r2v.push_back(static_cast<EntityId>(virt));
  }
  VirtualIndexMap m;
  m.real_to_virt = r2v;
  m.virt_to_real.assign(r2v.size(), -1);
  for (std::size_t r = 0; r < r2v.size(); ++r) {
    if (r2v[r] < 0 || static_cast<std::size_t>(r2v[r]) >= r2v.size())
      throw CheckpointError("index map entry out of range in " + path.string());
    m.virt_to_real[r2v[r]] = static_cast<EntityId>(r);
  }
  if (!m.is_bijection())
    throw CheckpointError("index map is not a bijection: " + path.string());
  return m;
}

}  // namespace eans
