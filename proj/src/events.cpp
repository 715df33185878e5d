#include "percolab/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace percolab {

void PartitionSpec::validate(bool require_even) const {
  std::vector<int> seen(points.size(), 0);
  for (const auto& b : blocks) {
    if (b.empty()) throw InvalidArgument("empty partition block");
    if (require_even && b.size() % 2 != 0) throw InvalidArgument("partition block of odd size");
    for (size_t i : b) {
      if (i >= points.size()) throw InvalidArgument("partition index out of range");
      if (seen[i]++) throw InvalidArgument("partition blocks overlap");
    }
  }
  for (int s : seen)
    if (s == 0) throw InvalidArgument("partition does not cover every point");
}

void AnnulusSpec::validate() const {
  if (!(r > 0.0) || !(R > r)) throw InvalidArgument("annulus needs 0 < r < R");
}

AnnulusGeometry::AnnulusGeometry(RegionPtr region, const AnnulusSpec& ann)
    : region_(std::move(region)), spec_(ann) {
  spec_.validate();
  const LatticeRegion& reg = *region_;
  const double a = reg.spacing();
  if (reg.covered_radius(ann.center) < ann.R + 2.0 * a)
    throw GeometryError("annulus of outer radius " + std::to_string(ann.R) +
                        " does not fit the region with margin");
  flags_.assign(reg.size(), outside);
  const std::vector<size_t> near = reg.sites_within(ann.center, ann.R + a);
  for (size_t i : near) {
    const SiteCoord s = reg.site(i);
    if (!reaches_circle(reg, s, ann.center, ann.r))
      flags_[i] = core;
    else if (touches_disk(reg, s, ann.center, ann.R))
      flags_[i] = band;
  }
  for (size_t i : near) {
    if ((flags_[i] & 3u) == core) core_.push_back(i);
    if ((flags_[i] & 3u) != band) continue;
    band_.push_back(i);
    const SiteCoord s = reg.site(i);
    for (const SiteCoord& d : kDirections) {
      const auto j = static_cast<size_t>(reg.index_of(s + d));
      const auto z = flags_[j] & 3u;
      if (z == core) flags_[i] |= kInner;
      if (z == outside) flags_[i] |= kOuter;
    }
    if (flags_[i] & kInner) inner_.push_back(i);
    if (flags_[i] & kOuter) outer_.push_back(i);
  }
  if (core_.empty()) throw GeometryError("annulus inner disk contains no whole hexagon");
  if (inner_.empty() || outer_.empty()) throw GeometryError("annulus has an empty boundary");
}

void DisjointSpec::validate() const {
  for (size_t i = 0; i < holes.size(); ++i) {
    if (holes[i].radius < 0.0) throw InvalidArgument("hole radius must be nonnegative");
    for (size_t j = i + 1; j < holes.size(); ++j)
      if (distance(holes[i].center, holes[j].center) <= holes[i].radius + holes[j].radius)
        throw InvalidArgument("holes overlap");
  }
}

namespace {

size_t checked_index(const LatticeRegion& reg, SiteCoord s) {
  const int64_t i = reg.index_of(s);
  if (i < 0) throw InvalidArgument("site outside the region");
  return static_cast<size_t>(i);
}

// Open-state view of a labeling.
struct LabelState {
  const ClusterLabels& labels;
  bool open(size_t i) const { return labels.labeled(i); }
};

}  // namespace

bool connection_event(const ClusterLabels& labels, const std::vector<SiteCoord>& points) {
  if (points.size() < 2) throw InvalidArgument("connection event needs at least two points");
  int32_t c = -1;
  for (const SiteCoord& p : points) {
    const int32_t id = labels.cluster_id(checked_index(labels.region(), p));
    if (id < 0 || (c >= 0 && id != c)) return false;
    c = id;
  }
  return true;
}

bool partition_event(const ClusterLabels& labels, const PartitionSpec& spec) {
  spec.validate();
  std::vector<int32_t> used;
  for (const auto& b : spec.blocks) {
    int32_t c = -1;
    for (size_t k : b) {
      const int32_t id = labels.cluster_id(checked_index(labels.region(), spec.points[k]));
      if (id < 0 || (c >= 0 && id != c)) return false;
      c = id;
    }
    if (std::find(used.begin(), used.end(), c) != used.end()) return false;
    used.push_back(c);
  }
  return true;
}

bool one_arm(const ClusterLabels& labels, SiteCoord x, double r, BoundaryConvention conv) {
  const LatticeRegion& reg = labels.region();
  if (!(r > 0.0)) throw InvalidArgument("one-arm radius must be positive");
  const Point p = reg.embed(x);
  if (reg.covered_radius(p) < r + reg.spacing())
    throw GeometryError("one-arm disk does not fit the region");
  const int32_t c = labels.cluster_id(checked_index(reg, x));
  if (c < 0) return false;
  for (size_t i : labels.members(static_cast<size_t>(c)))
    if (reaches_circle(reg, reg.site(i), p, r, conv)) return true;
  return false;
}

bool annulus_crossing(const ClusterLabels& labels, const AnnulusSpec& ann, BoundaryConvention conv) {
  ann.validate();
  const LatticeRegion& reg = labels.region();
  if (reg.covered_radius(ann.center) < ann.R + reg.spacing())
    throw GeometryError("annulus does not fit the region");
  // A connected cluster reaching both boundaries has a site on the outer circle.
  std::vector<int32_t> outer_ids;
  for (size_t i : reg.sites_within(ann.center, ann.R + reg.spacing())) {
    const int32_t c = labels.cluster_id(i);
    if (c >= 0 && reaches_circle(reg, reg.site(i), ann.center, ann.R, conv)) outer_ids.push_back(c);
  }
  std::sort(outer_ids.begin(), outer_ids.end());
  for (size_t i : reg.sites_within(ann.center, ann.r + reg.spacing())) {
    const int32_t c = labels.cluster_id(i);
    if (c < 0 || !touches_disk(reg, reg.site(i), ann.center, ann.r, conv)) continue;
    if (std::binary_search(outer_ids.begin(), outer_ids.end(), c)) return true;
  }
  return false;
}

bool four_arm(const ClusterLabels& open, const ClusterLabels& closed, const AnnulusSpec& ann) {
  const LatticeRegion& reg = open.region();
  if (!(reg == closed.region())) throw InvalidArgument("labelings of different regions");
  for (size_t i = 0; i < reg.size(); ++i)
    if (open.labeled(i) == closed.labeled(i))
      throw InvalidArgument("closed labeling is not the complement of the open one");
  const AnnulusGeometry geom(open.region_ptr(), ann);
  ClusterExplorer ex(open.region_ptr());
  return four_arm(LabelState{open}, geom, ex);
}

bool four_arm(const Configuration& config, const AnnulusSpec& ann) {
  const AnnulusGeometry geom(config.region_ptr(), ann);
  ClusterExplorer ex(config.region_ptr());
  return four_arm(config, geom, ex);
}

bool open_circuit_in_annulus(const Configuration& config, const AnnulusSpec& ann) {
  const AnnulusGeometry geom(config.region_ptr(), ann);
  ClusterExplorer ex(config.region_ptr());
  return open_circuit(config, geom, ex);
}

bool disjoint_connections(const Configuration& config, const DisjointSpec& spec) {
  spec.validate();
  const LatticeRegion& reg = config.region();
  std::vector<int8_t> hole(reg.size(), -1);
  for (size_t h = 0; h < 4; ++h) {
    const Disk& d = spec.holes[h];
    if (reg.covered_radius(d.center) < d.radius + reg.spacing())
      throw GeometryError("hole does not fit the region");
    for (size_t i : reg.sites_within(d.center, d.radius)) hole[i] = static_cast<int8_t>(h);
  }
  const auto open = [&](size_t i) { return hole[i] < 0 && config.open(i); };
  ClusterExplorer ex(config.region_ptr());
  ex.clear();
  // Clusters touching both holes of a pair, as their first-visited site.
  std::array<std::vector<size_t>, 2> joined;
  for (size_t pair = 0; pair < 2; ++pair) {
    const size_t h0 = 2 * pair;
    std::vector<size_t> starts;
    for (size_t i = 0; i < reg.size(); ++i) {
      if (hole[i] != static_cast<int8_t>(h0)) continue;
      const SiteCoord s = reg.site(i);
      for (const SiteCoord& d : kDirections) {
        const int64_t j = reg.index_of(s + d);
        if (j >= 0 && open(static_cast<size_t>(j))) starts.push_back(static_cast<size_t>(j));
      }
    }
    ex.clear();
    for (size_t st : starts) {
      if (ex.visited(st)) continue;
      bool t0 = false;
      bool t1 = false;
      ex.explore_more(open, st, [&](size_t, SiteCoord s) {
        for (const SiteCoord& d : kDirections) {
          const int64_t j = reg.index_of(s + d);
          if (j < 0) continue;
          t0 = t0 || hole[static_cast<size_t>(j)] == static_cast<int8_t>(h0);
          t1 = t1 || hole[static_cast<size_t>(j)] == static_cast<int8_t>(h0 + 1);
        }
        return true;
      });
      if (t0 && t1) joined[pair].push_back(st);
    }
  }
  if (joined[0].empty() || joined[1].empty()) return false;
  if (joined[0].size() > 1 || joined[1].size() > 1) return true;
  // One candidate each: distinct iff the second is not in the first cluster.
  ex.explore(open, joined[0][0], [](size_t, SiteCoord) { return true; });
  return !ex.visited(joined[1][0]);
}

bool rhombus_crossing(const Configuration& config) {
  ClusterExplorer ex(config.region_ptr());
  return rhombus_crossing(config, ex);
}

FourArmSweep::FourArmSweep(RegionPtr region, Point center, double r, std::vector<double> radii)
    : region_(std::move(region)), radii_(std::move(radii)) {
  if (radii_.empty()) throw InvalidArgument("no outer radii");
  if (!std::is_sorted(radii_.begin(), radii_.end()))
    throw InvalidArgument("outer radii must be increasing");
  // Validates geometry for the largest annulus (and the smallest core).
  const AnnulusGeometry geom(region_, {center, r, radii_.back()});
  if (!(radii_.front() > r)) throw InvalidArgument("outer radii must exceed the inner radius");
  const LatticeRegion& reg = *region_;
  std::vector<size_t> band = geom.band_sites();
  std::vector<double> hm(band.size());
  for (size_t k = 0; k < band.size(); ++k) hm[k] = reg.hex_min_distance(reg.site(band[k]), center);
  std::vector<size_t> order(band.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return hm[x] < hm[y]; });
  const size_t m = band.size();
  site_.resize(m);
  hex_min_.resize(m);
  std::vector<int64_t> local(reg.size(), -1);
  for (size_t k = 0; k < m; ++k) {
    site_[k] = band[order[k]];
    hex_min_[k] = hm[order[k]];
    local[site_[k]] = static_cast<int64_t>(k);
  }
  nb_.resize(m);
  nb_reach_.assign(m, 0.0);
  for (size_t k = 0; k < m; ++k) {
    const SiteCoord s = reg.site(site_[k]);
    for (size_t d = 0; d < 6; ++d) {
      const SiteCoord t = s + kDirections[d];
      const auto j = static_cast<size_t>(reg.index_of(t));
      nb_[k][d] = static_cast<int32_t>(local[j]);
      nb_reach_[k] = std::max(nb_reach_[k], reg.hex_min_distance(t, center));
    }
    if (geom.inner_touch(site_[k])) inner_.push_back(static_cast<uint32_t>(k));
  }
  for (double R : radii_) {
    const auto it = std::upper_bound(hex_min_.begin(), hex_min_.end(), R + 1e-12);
    stage_end_.push_back(static_cast<size_t>(it - hex_min_.begin()));
  }
  parent_.resize(m);
  size_.resize(m);
  reach_.resize(m);
  open_.resize(m);
  seen_.assign(m, 0);
}

void FourArmSweep::unite(uint32_t a, uint32_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  reach_[a] = std::max(reach_[a], reach_[b]);
}

}  // namespace percolab
