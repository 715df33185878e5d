#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "percolab/clusters.hpp"
#include "percolab/error.hpp"

namespace percolab {

/// Marked sites and a partition of their indices into blocks.
struct PartitionSpec {
  std::vector<SiteCoord> points;
  std::vector<std::vector<size_t>> blocks;
  /// Throws InvalidArgument unless the blocks are disjoint and cover every
  /// index; with `require_even`, every block must have even size.
  void validate(bool require_even = false) const;
};

struct AnnulusSpec {
  Point center;
  double r = 0.0;
  double R = 0.0;
  void validate() const;
};

/// Site classification for an annulus A(r, R) about a point.
///   core: hexagon inside the open disk B_r
///   band: hexagon meets the closed annulus
///   outside: hexagon misses the closed disk B_R
/// Inner (outer) boundary sites are band sites adjacent to the core (outside).
class AnnulusGeometry {
 public:
  enum Zone : uint8_t { outside = 0, band = 1, core = 2 };

  /// Throws GeometryError when the annulus does not fit the region with a
  /// margin of two lattice steps, or when the core or a boundary is empty.
  AnnulusGeometry(RegionPtr region, const AnnulusSpec& ann);

  const AnnulusSpec& spec() const { return spec_; }
  const LatticeRegion& region() const { return *region_; }
  const RegionPtr& region_ptr() const { return region_; }

  Zone zone(size_t i) const { return static_cast<Zone>(flags_[i] & 3u); }
  bool in_band(size_t i) const { return (flags_[i] & 3u) == band; }
  bool inner_touch(size_t i) const { return flags_[i] & kInner; }
  bool outer_touch(size_t i) const { return flags_[i] & kOuter; }

  const std::vector<size_t>& core_sites() const { return core_; }
  const std::vector<size_t>& band_sites() const { return band_; }
  const std::vector<size_t>& inner_sites() const { return inner_; }
  const std::vector<size_t>& outer_sites() const { return outer_; }

 private:
  static constexpr uint8_t kInner = 4;
  static constexpr uint8_t kOuter = 8;
  RegionPtr region_;
  AnnulusSpec spec_;
  std::vector<uint8_t> flags_;
  std::vector<size_t> core_, band_, inner_, outer_;
};

/// Four disks; the pairs (0,1) and (2,3) are to be connected disjointly.
struct DisjointSpec {
  std::array<Disk, 4> holes;
  /// Throws InvalidArgument when two holes overlap.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Detectors on labeled configurations.

/// All points open and in one cluster.
bool connection_event(const ClusterLabels& labels, const std::vector<SiteCoord>& points);
/// Each block in one cluster, distinct blocks in distinct clusters.
bool partition_event(const ClusterLabels& labels, const PartitionSpec& spec);
/// x open and its cluster has a site reaching distance r from x.
bool one_arm(const ClusterLabels& labels, SiteCoord x, double r,
             BoundaryConvention conv = BoundaryConvention::hexagon);
/// Some cluster has a site meeting the closed disk B_r and a site reaching
/// the circle of radius R.
bool annulus_crossing(const ClusterLabels& labels, const AnnulusSpec& ann,
                      BoundaryConvention conv = BoundaryConvention::hexagon);
/// At least two distinct open clusters of the band-restricted configuration
/// join the inner and outer boundaries. `closed` must be the complement
/// labeling of the same configuration.
bool four_arm(const ClusterLabels& open, const ClusterLabels& closed, const AnnulusSpec& ann);

bool four_arm(const Configuration& config, const AnnulusSpec& ann);
/// Open circuit in the band separating core from outside. Computed as the
/// absence of a closed band path between the two boundaries.
bool open_circuit_in_annulus(const Configuration& config, const AnnulusSpec& ann);
/// Sites whose center lies in a hole are treated as closed.
bool disjoint_connections(const Configuration& config, const DisjointSpec& spec);
/// Left-right open crossing of a rhombus region (columns q = 0 and q = side-1).
bool rhombus_crossing(const Configuration& config);

// ---------------------------------------------------------------------------
// Local detectors. `State` is anything with `bool open(size_t) const` over
// the explorer's region (Configuration, LazySample). They read only the
// sites they need.

namespace detail {

inline double hex_max_sq(const LatticeRegion& reg, SiteCoord s, Point p) {
  const Point c = reg.embed(s);
  const double a = reg.spacing();
  const double dx = c.x - p.x;
  const double dy = c.y - p.y;
  const double h = a / kSqrt3;
  // Hexagon vertices at angles 30 + 60k degrees.
  const double vx = 0.5 * a;
  const double vy = 0.5 * h;
  double best = 0.0;
  const double xs[6] = {vx, 0.0, -vx, -vx, 0.0, vx};
  const double ys[6] = {vy, h, vy, -vy, -h, -vy};
  for (int k = 0; k < 6; ++k) {
    const double ex = dx + xs[k];
    const double ey = dy + ys[k];
    best = std::max(best, ex * ex + ey * ey);
  }
  return best;
}

}  // namespace detail

/// Largest distance from `p` reached by the cluster of site `x`, measured
/// by hexagons (or centers). Exploration stops once `stop_at` is reached.
/// Returns -1 when `x` is closed.
template <class State>
double cluster_reach(const State& state, ClusterExplorer& ex, size_t x, Point p, double stop_at,
                     BoundaryConvention conv = BoundaryConvention::hexagon) {
  if (!state.open(x)) return -1.0;
  const LatticeRegion& reg = ex.region();
  double best_sq = 0.0;
  const double stop_sq = stop_at * stop_at;
  ex.explore(
      [&](size_t i) { return state.open(i); }, x,
      [&](size_t, SiteCoord s) {
        double d2;
        if (conv == BoundaryConvention::hexagon) {
          d2 = detail::hex_max_sq(reg, s, p);
        } else {
          const Point c = reg.embed(s);
          d2 = (c.x - p.x) * (c.x - p.x) + (c.y - p.y) * (c.y - p.y);
        }
        best_sq = std::max(best_sq, d2);
        return best_sq < stop_sq;
      });
  return std::sqrt(best_sq);
}

template <class State>
bool four_arm(const State& state, const AnnulusGeometry& geom, ClusterExplorer& ex) {
  ex.clear();
  int crossing = 0;
  const auto open_band = [&](size_t i) { return geom.in_band(i) && state.open(i); };
  for (size_t s : geom.inner_sites()) {
    bool reach = false;
    ex.explore_more(open_band, s, [&](size_t i, SiteCoord) {
      reach = reach || geom.outer_touch(i);
      return true;
    });
    if (reach && ++crossing >= 2) return true;
  }
  return false;
}

/// Closed band path from the inner to the outer boundary.
template <class State>
bool closed_crossing(const State& state, const AnnulusGeometry& geom, ClusterExplorer& ex) {
  ex.clear();
  bool reach = false;
  const auto closed_band = [&](size_t i) { return geom.in_band(i) && !state.open(i); };
  for (size_t s : geom.inner_sites()) {
    ex.explore_more(closed_band, s, [&](size_t i, SiteCoord) {
      reach = geom.outer_touch(i);
      return !reach;
    });
    if (reach) return true;
  }
  return false;
}

template <class State>
bool open_circuit(const State& state, const AnnulusGeometry& geom, ClusterExplorer& ex) {
  return !closed_crossing(state, geom, ex);
}

/// Cluster of each point: points sharing an open cluster get the same
/// nonnegative id (ids in order of first appearance), closed points get -1.
template <class State>
std::vector<int> cluster_pattern(const State& state, ClusterExplorer& ex,
                                 const std::vector<size_t>& points) {
  std::vector<int> id(points.size(), -2);
  int next = 0;
  for (size_t k = 0; k < points.size(); ++k) {
    if (id[k] != -2) continue;
    if (!state.open(points[k])) {
      id[k] = -1;
      continue;
    }
    id[k] = next;
    size_t pending = 0;
    for (size_t j = k + 1; j < points.size(); ++j) pending += id[j] == -2;
    if (pending > 0) {
      ex.explore(
          [&](size_t i) { return state.open(i); }, points[k],
          [&](size_t i, SiteCoord) {
            for (size_t j = k + 1; j < points.size(); ++j)
              if (id[j] == -2 && points[j] == i) {
                id[j] = next;
                --pending;
              }
            return pending > 0;
          });
    }
    ++next;
  }
  return id;
}

/// Same result as `cluster_pattern`, but explores the clusters of all
/// points in lockstep, one site per front in turn. A group of fronts stops
/// as soon as it is exhausted, so two distinct clusters cost about twice
/// the smaller one instead of the whole first cluster.
class PatternFinder {
 public:
  explicit PatternFinder(RegionPtr region)
      : region_(std::move(region)), stamp_(region_->size(), 0), who_(region_->size(), 0) {}

  template <class State>
  std::vector<int> find(const State& state, const std::vector<size_t>& points);

 private:
  uint32_t root(uint32_t f) {
    while (group_[f] != f) f = group_[f] = group_[group_[f]];
    return f;
  }

  RegionPtr region_;
  std::vector<uint32_t> stamp_;
  std::vector<uint32_t> who_;
  uint32_t gen_ = 0;
  std::vector<std::vector<size_t>> queue_;
  std::vector<size_t> head_;
  std::vector<uint32_t> group_;
};

template <class State>
std::vector<int> PatternFinder::find(const State& state, const std::vector<size_t>& points) {
  const LatticeRegion& reg = *region_;
  if (++gen_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    gen_ = 1;
  }
  const size_t k = points.size();
  std::vector<int32_t> front_of(k, -1);
  queue_.resize(k);
  head_.assign(k, 0);
  group_.resize(k);
  uint32_t fronts = 0;
  for (size_t i = 0; i < k; ++i) {
    const size_t p = points[i];
    if (!state.open(p)) continue;
    if (stamp_[p] == gen_) {
      front_of[i] = static_cast<int32_t>(who_[p]);
      continue;
    }
    stamp_[p] = gen_;
    who_[p] = fronts;
    queue_[fronts].assign(1, p);
    head_[fronts] = 0;
    group_[fronts] = fronts;
    front_of[i] = static_cast<int32_t>(fronts);
    ++fronts;
  }
  // A group is live while one of its fronts has sites left. A group with
  // every front exhausted is a complete cluster. The search ends when at
  // most one live group remains.
  std::vector<uint8_t> exhausted(fronts, 0);
  const auto live_groups = [&]() {
    size_t live = 0;
    std::vector<uint32_t> seen;
    for (uint32_t f = 0; f < fronts; ++f) {
      if (exhausted[f]) continue;
      const uint32_t g = root(f);
      if (std::find(seen.begin(), seen.end(), g) == seen.end()) {
        seen.push_back(g);
        ++live;
      }
    }
    return live;
  };
  size_t live = live_groups();
  while (live >= 2) {
    bool changed = false;
    for (uint32_t f = 0; f < fronts; ++f) {
      if (exhausted[f]) continue;
      std::vector<size_t>& q = queue_[f];
      if (head_[f] == q.size()) {
        exhausted[f] = 1;
        changed = true;
        continue;
      }
      const size_t cur = q[head_[f]++];
      const SiteCoord s = reg.site(cur);
      for (const SiteCoord& d : kDirections) {
        const int64_t nb = reg.index_of(s + d);
        if (nb < 0) continue;
        const auto n = static_cast<size_t>(nb);
        if (stamp_[n] == gen_) {
          const uint32_t a = root(f);
          const uint32_t b = root(who_[n]);
          if (a != b) {
            group_[std::max(a, b)] = std::min(a, b);
            changed = true;
          }
          continue;
        }
        if (!state.open(n)) continue;
        stamp_[n] = gen_;
        who_[n] = f;
        q.push_back(n);
      }
    }
    if (changed) live = live_groups();
  }
  std::vector<int> id(k, -1);
  std::vector<uint32_t> order;
  for (size_t i = 0; i < k; ++i) {
    if (front_of[i] < 0) continue;
    const uint32_t g = root(static_cast<uint32_t>(front_of[i]));
    auto it = std::find(order.begin(), order.end(), g);
    if (it == order.end()) {
      order.push_back(g);
      it = order.end() - 1;
    }
    id[i] = static_cast<int>(it - order.begin());
  }
  return id;
}

/// Left-right open crossing of a rhombus region.
template <class State>
bool rhombus_crossing(const State& state, ClusterExplorer& ex) {
  const LatticeRegion& reg = ex.region();
  if (reg.shape() != RegionShape::rhombus) throw InvalidArgument("rhombus crossing needs a rhombus region");
  const int32_t last = reg.extent() - 1;
  ex.clear();
  bool reach = false;
  for (int32_t r = 0; r <= last && !reach; ++r) {
    const auto start = static_cast<size_t>(reg.index_of({0, r}));
    ex.explore_more([&](size_t i) { return state.open(i); }, start, [&](size_t, SiteCoord s) {
      reach = s.q == last;
      return !reach;
    });
  }
  return reach;
}

/// Four-arm events for one inner radius and an increasing list of outer
/// radii, from a single incremental union-find pass per configuration.
/// Agrees with `four_arm` on AnnulusGeometry(center, r, R) for each R.
class FourArmSweep {
 public:
  FourArmSweep(RegionPtr region, Point center, double r, std::vector<double> radii);

  const std::vector<double>& radii() const { return radii_; }

  template <class State>
  std::vector<bool> run(const State& state);

 private:
  uint32_t find(uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(uint32_t a, uint32_t b);

  RegionPtr region_;
  std::vector<double> radii_;
  // Band sites of the largest annulus, ordered by hex_min.
  std::vector<size_t> site_;
  std::vector<double> hex_min_;
  std::vector<double> nb_reach_;  // max hex_min over the site's neighbors
  std::vector<std::array<int32_t, 6>> nb_;  // local ids, -1 otherwise
  std::vector<uint32_t> inner_;             // local ids touching the core
  std::vector<size_t> stage_end_;           // sites with hex_min <= radii[k]
  std::vector<uint32_t> parent_, size_;
  std::vector<double> reach_;
  std::vector<uint8_t> open_;
  std::vector<uint32_t> seen_;
  uint32_t gen_ = 0;
};

template <class State>
std::vector<bool> FourArmSweep::run(const State& state) {
  const size_t m = site_.size();
  for (size_t i = 0; i < m; ++i) {
    parent_[i] = static_cast<uint32_t>(i);
    size_[i] = 1;
    reach_[i] = nb_reach_[i];
    open_[i] = 0;
  }
  std::vector<bool> out(radii_.size(), false);
  size_t added = 0;
  for (size_t k = 0; k < radii_.size(); ++k) {
    for (; added < stage_end_[k]; ++added) {
      if (!state.open(site_[added])) continue;
      open_[added] = 1;
      for (int32_t nb : nb_[added])
        if (nb >= 0 && static_cast<size_t>(nb) < added && open_[static_cast<size_t>(nb)])
          unite(static_cast<uint32_t>(added), static_cast<uint32_t>(nb));
    }
    if (++gen_ == 0) {
      std::fill(seen_.begin(), seen_.end(), 0);
      gen_ = 1;
    }
    int crossing = 0;
    for (uint32_t s : inner_) {
      if (s >= added || !open_[s]) continue;
      const uint32_t root = find(s);
      if (seen_[root] == gen_) continue;
      seen_[root] = gen_;
      if (reach_[root] > radii_[k] + 1e-12 && ++crossing >= 2) break;
    }
    out[k] = crossing >= 2;
  }
  return out;
}

}  // namespace percolab
