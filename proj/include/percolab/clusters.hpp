#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "percolab/sampling.hpp"

namespace percolab {

struct ClusterInfo {
  size_t root = 0;  // minimal canonical site index in the cluster
  size_t size = 0;
  SiteCoord lo{};   // axial bounding box
  SiteCoord hi{};
};

/// Open clusters of one configuration (or of a restricted / complemented
/// view of it). Cluster ids are dense and ordered by minimal site index.
class ClusterLabels {
 public:
  ClusterLabels(RegionPtr region, std::vector<int32_t> cluster_of_site);

  const LatticeRegion& region() const { return *region_; }
  const RegionPtr& region_ptr() const { return region_; }
  size_t cluster_count() const { return clusters_.size(); }
  const ClusterInfo& info(size_t id) const { return clusters_.at(id); }
  const std::vector<ClusterInfo>& clusters() const { return clusters_; }

  /// Dense cluster id of a site, -1 if the site is closed (unlabeled).
  int32_t cluster_id(size_t index) const { return cluster_of_site_[index]; }
  int32_t cluster_id_at(SiteCoord s) const;
  /// Canonical label (minimal site index of the cluster), -1 if closed.
  int64_t label(size_t index) const {
    const int32_t c = cluster_of_site_[index];
    return c < 0 ? -1 : static_cast<int64_t>(clusters_[static_cast<size_t>(c)].root);
  }
  bool labeled(size_t index) const { return cluster_of_site_[index] >= 0; }

  /// Canonical site indices of a cluster, increasing.
  std::span<const size_t> members(size_t id) const;

  /// Exact Euclidean diameter of the embedded sites of a cluster.
  double diameter(size_t id) const;
  std::vector<double> all_diameters() const;

 private:
  RegionPtr region_;
  std::vector<int32_t> cluster_of_site_;
  std::vector<ClusterInfo> clusters_;
  std::vector<size_t> member_offsets_;
  std::vector<size_t> members_;
};

/// Union-find (union by size, path halving) over the 6-neighbor open graph.
ClusterLabels label(const Configuration& config);
/// Closed clusters: labels of the complement configuration.
ClusterLabels label_closed(const Configuration& config);
/// Clusters of sites whose bit is set in `active` (bit-packed, canonical order).
ClusterLabels label_active(RegionPtr region, const std::vector<uint64_t>& active);

bool same_cluster(const ClusterLabels& labels, SiteCoord x, SiteCoord y);

/// Diameter of a point set: brute force up to 64 points, rotating calipers
/// on the convex hull above that.
double point_set_diameter(std::span<const Point> pts);

/// Normalized counting measure of one cluster: weight a^2 / pi_norm per site.
class ClusterMeasure {
 public:
  ClusterMeasure(size_t cluster, std::vector<Point> support, double weight, double pi_norm);
  size_t cluster() const { return cluster_; }
  const std::vector<Point>& support() const { return support_; }
  double weight() const { return weight_; }
  double pi_norm() const { return pi_norm_; }
  double total_mass() const { return weight_ * static_cast<double>(support_.size()); }
  double integrate(const std::function<double(Point)>& f) const;

 private:
  size_t cluster_;
  std::vector<Point> support_;
  double weight_;
  double pi_norm_;
};

ClusterMeasure cluster_measure(const ClusterLabels& labels, size_t id, double pi_norm);

/// Breadth-first exploration of single open clusters with reusable scratch
/// space, for probes that only need the cluster of a few sites.
class ClusterExplorer {
 public:
  explicit ClusterExplorer(RegionPtr region);

  const LatticeRegion& region() const { return *region_; }

  /// Explores the open cluster of `start` (nothing if `start` is closed).
  /// `visit(index, site)` is called once per cluster site in BFS order; returning
  /// false stops the exploration. Returns the number of sites visited.
  template <class IsOpen, class Visit>
  size_t explore(IsOpen&& is_open, size_t start, Visit&& visit);

  /// Marks left by the most recent exploration.
  bool visited(size_t index) const { return stamp_[index] == generation_; }

  /// Begins a new exploration generation without exploring.
  void clear();

  /// Continue-capable variant: explores from `start` unless it was already
  /// visited in the current generation (for multi-source searches).
  template <class IsOpen, class Visit>
  size_t explore_more(IsOpen&& is_open, size_t start, Visit&& visit);

 private:
  RegionPtr region_;
  std::vector<uint32_t> stamp_;
  uint32_t generation_ = 0;
  struct Entry {
    size_t index;
    SiteCoord site;
  };
  std::vector<Entry> queue_;
};

template <class IsOpen, class Visit>
size_t ClusterExplorer::explore(IsOpen&& is_open, size_t start, Visit&& visit) {
  clear();
  return explore_more(is_open, start, visit);
}

template <class IsOpen, class Visit>
size_t ClusterExplorer::explore_more(IsOpen&& is_open, size_t start, Visit&& visit) {
  if (stamp_[start] == generation_ || !is_open(start)) return 0;
  const LatticeRegion& reg = *region_;
  queue_.clear();
  queue_.push_back({start, reg.site(start)});
  stamp_[start] = generation_;
  size_t head = 0;
  while (head < queue_.size()) {
    const Entry cur = queue_[head++];
    if (!visit(cur.index, cur.site)) return head;
    for (const SiteCoord& d : kDirections) {
      const SiteCoord t = cur.site + d;
      const int64_t nb = reg.index_of(t);
      if (nb < 0) continue;
      const auto n = static_cast<size_t>(nb);
      if (stamp_[n] == generation_) continue;
      if (!is_open(n)) continue;
      stamp_[n] = generation_;
      queue_.push_back({n, t});
    }
  }
  return head;
}

}  // namespace percolab
