#include "percolab/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "percolab/error.hpp"

namespace percolab {

namespace {

class UnionFind {
 public:
  explicit UnionFind(size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), uint32_t{0});
  }
  uint32_t find(uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(uint32_t a, uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<uint32_t> parent_;
  std::vector<uint32_t> size_;
};

inline bool bit(const std::vector<uint64_t>& w, size_t i) { return (w[i >> 6] >> (i & 63)) & 1u; }

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> h(2 * pts.size());
  size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace

double point_set_diameter(std::span<const Point> pts) {
  if (pts.size() < 2) return 0.0;
  if (pts.size() <= 64) {
    double best = 0.0;
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, distance(pts[i], pts[j]));
    return best;
  }
  const std::vector<Point> h = convex_hull(std::vector<Point>(pts.begin(), pts.end()));
  const size_t m = h.size();
  if (m < 3) return m == 2 ? distance(h[0], h[1]) : 0.0;
  // Rotating calipers over antipodal pairs.
  double best = 0.0;
  size_t j = 1;
  for (size_t i = 0; i < m; ++i) {
    const size_t ni = (i + 1) % m;
    while (std::abs(cross(h[i], h[ni], h[(j + 1) % m])) > std::abs(cross(h[i], h[ni], h[j])))
      j = (j + 1) % m;
    best = std::max({best, distance(h[i], h[j]), distance(h[ni], h[j])});
  }
  return best;
}

ClusterLabels::ClusterLabels(RegionPtr region, std::vector<int32_t> cluster_of_site)
    : region_(std::move(region)), cluster_of_site_(std::move(cluster_of_site)) {
  if (cluster_of_site_.size() != region_->size())
    throw InvalidArgument("label array length does not match the region size");
  int32_t max_id = -1;
  for (int32_t c : cluster_of_site_) max_id = std::max(max_id, c);
  clusters_.resize(static_cast<size_t>(max_id + 1));
  std::vector<bool> seen(clusters_.size(), false);
  member_offsets_.assign(clusters_.size() + 1, 0);
  for (size_t i = 0; i < cluster_of_site_.size(); ++i) {
    const int32_t c = cluster_of_site_[i];
    if (c < 0) continue;
    ClusterInfo& ci = clusters_[static_cast<size_t>(c)];
    const SiteCoord s = region_->site(i);
    if (!seen[static_cast<size_t>(c)]) {
      seen[static_cast<size_t>(c)] = true;
      ci.root = i;
      ci.lo = ci.hi = s;
    } else {
      ci.lo = {std::min(ci.lo.q, s.q), std::min(ci.lo.r, s.r)};
      ci.hi = {std::max(ci.hi.q, s.q), std::max(ci.hi.r, s.r)};
    }
    ++ci.size;
    ++member_offsets_[static_cast<size_t>(c) + 1];
  }
  for (size_t c = 0; c < clusters_.size(); ++c) {
    if (!seen[c]) throw InvalidArgument("cluster ids must be dense");
    member_offsets_[c + 1] += member_offsets_[c];
  }
  members_.resize(member_offsets_.back());
  std::vector<size_t> fill(member_offsets_.begin(), member_offsets_.end() - 1);
  for (size_t i = 0; i < cluster_of_site_.size(); ++i) {
    const int32_t c = cluster_of_site_[i];
    if (c >= 0) members_[fill[static_cast<size_t>(c)]++] = i;
  }
}

int32_t ClusterLabels::cluster_id_at(SiteCoord s) const {
  const int64_t i = region_->index_of(s);
  return i < 0 ? -1 : cluster_of_site_[static_cast<size_t>(i)];
}

std::span<const size_t> ClusterLabels::members(size_t id) const {
  if (id >= clusters_.size()) throw InvalidArgument("unknown cluster id");
  return {members_.data() + member_offsets_[id], member_offsets_[id + 1] - member_offsets_[id]};
}

double ClusterLabels::diameter(size_t id) const {
  const auto m = members(id);
  std::vector<Point> pts;
  pts.reserve(m.size());
  for (size_t i : m) pts.push_back(region_->embed_index(i));
  return point_set_diameter(pts);
}

std::vector<double> ClusterLabels::all_diameters() const {
  std::vector<double> out(clusters_.size());
  for (size_t c = 0; c < clusters_.size(); ++c) out[c] = diameter(c);
  return out;
}

ClusterLabels label_active(RegionPtr region, const std::vector<uint64_t>& active) {
  const LatticeRegion& reg = *region;
  const size_t n = reg.size();
  if (active.size() != reg.word_count()) throw InvalidArgument("active bit array length mismatch");
  UnionFind uf(n);
  const auto& rows = reg.rows();
  for (size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& row = rows[ri];
    const auto r = static_cast<int32_t>(ri) + reg.row_min();
    for (int32_t q = row.q_lo; q <= row.q_hi; ++q) {
      const size_t i = row.offset + static_cast<size_t>(q - row.q_lo);
      if (!bit(active, i)) continue;
      if (q > row.q_lo && bit(active, i - 1)) uf.unite(static_cast<uint32_t>(i), static_cast<uint32_t>(i - 1));
      if (ri == 0) continue;
      // Backward neighbors in the previous row: (q, r-1) and (q+1, r-1).
      for (int32_t dq = 0; dq <= 1; ++dq) {
        const int64_t j = reg.index_of({q + dq, r - 1});
        if (j >= 0 && bit(active, static_cast<size_t>(j)))
          uf.unite(static_cast<uint32_t>(i), static_cast<uint32_t>(j));
      }
    }
  }
  std::vector<int32_t> ids(n, -1);
  std::vector<int32_t> root_id(n, -1);
  int32_t next = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!bit(active, i)) continue;
    const uint32_t root = uf.find(static_cast<uint32_t>(i));
    if (root_id[root] < 0) root_id[root] = next++;
    ids[i] = root_id[root];
  }
  return ClusterLabels(std::move(region), std::move(ids));
}

ClusterLabels label(const Configuration& config) {
  return label_active(config.region_ptr(), config.words());
}

ClusterLabels label_closed(const Configuration& config) {
  return label_active(config.region_ptr(), config.complement().words());
}

bool same_cluster(const ClusterLabels& labels, SiteCoord x, SiteCoord y) {
  const int64_t ix = labels.region().index_of(x);
  const int64_t iy = labels.region().index_of(y);
  if (ix < 0 || iy < 0) throw InvalidArgument("site outside the region");
  const int32_t cx = labels.cluster_id(static_cast<size_t>(ix));
  return cx >= 0 && cx == labels.cluster_id(static_cast<size_t>(iy));
}

ClusterMeasure::ClusterMeasure(size_t cluster, std::vector<Point> support, double weight,
                               double pi_norm)
    : cluster_(cluster), support_(std::move(support)), weight_(weight), pi_norm_(pi_norm) {}

double ClusterMeasure::integrate(const std::function<double(Point)>& f) const {
  double s = 0.0;
  for (const Point& p : support_) s += f(p);
  return weight_ * s;
}

ClusterMeasure cluster_measure(const ClusterLabels& labels, size_t id, double pi_norm) {
  if (!(pi_norm > 0.0)) throw InvalidArgument("pi_norm must be positive");
  if (id >= labels.cluster_count()) throw InvalidArgument("unknown cluster id");
  std::vector<Point> pts;
  for (size_t i : labels.members(id)) pts.push_back(labels.region().embed_index(i));
  const double a = labels.region().spacing();
  return ClusterMeasure(id, std::move(pts), a * a / pi_norm, pi_norm);
}

ClusterExplorer::ClusterExplorer(RegionPtr region)
    : region_(std::move(region)), stamp_(region_->size(), 0) {}

void ClusterExplorer::clear() {
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
}

}  // namespace percolab
