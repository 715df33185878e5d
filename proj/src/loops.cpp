#include "percolab/loops.hpp"

#include <cmath>
#include <ostream>

#include "percolab/serialization.hpp"

namespace percolab {

namespace {

double polygon_area(const std::vector<Point>& v) {
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    s += a.x * b.y - a.y * b.x;
  }
  return 0.5 * s;
}

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

inline uint8_t dir_add(int k, int delta) { return static_cast<uint8_t>(((k + delta) % 6 + 6) % 6); }

}  // namespace

double LoopPath::signed_area() const { return polygon_area(vertices); }

size_t LoopEnsemble::edge_count() const {
  size_t n = 0;
  for (const LoopPath& l : loops) n += l.edges.size();
  return n;
}

size_t interface_pair_count(const Configuration& config) {
  const LatticeRegion& reg = config.region();
  size_t n = 0;
  for (size_t i = 0; i < reg.size(); ++i) {
    if (!config.open(i)) continue;
    const SiteCoord s = reg.site(i);
    for (const SiteCoord& d : kDirections) {
      const int64_t j = reg.index_of(s + d);
      if (j >= 0 && !config.open(static_cast<size_t>(j))) ++n;
    }
  }
  return n;
}

LoopEnsemble trace_interfaces(const Configuration& config) {
  const LatticeRegion& reg = config.region();
  const size_t n = reg.size();
  std::vector<uint8_t> seen(6 * n, 0);
  LoopEnsemble out;
  const auto is_edge = [&](size_t s, int k) {
    if (!config.open(s)) return false;
    const int64_t t = reg.index_of(reg.site(s) + kDirections[static_cast<size_t>(k)]);
    return t >= 0 && !config.open(static_cast<size_t>(t));
  };
  std::vector<std::pair<size_t, uint8_t>> chain;
  for (size_t s0 = 0; s0 < n; ++s0) {
    if (!config.open(s0)) continue;
    for (int k0 = 0; k0 < 6; ++k0) {
      if (seen[6 * s0 + static_cast<size_t>(k0)] || !is_edge(s0, k0)) continue;
      chain.clear();
      size_t s = s0;
      uint8_t k = static_cast<uint8_t>(k0);
      bool closed = false;
      while (true) {
        seen[6 * s + k] = 1;
        chain.emplace_back(s, k);
        const SiteCoord sc = reg.site(s);
        const int64_t u = reg.index_of(sc + kDirections[dir_add(k, 1)]);
        if (u < 0) break;  // cut by the region boundary
        if (config.open(static_cast<size_t>(u))) {
          s = static_cast<size_t>(u);
          k = dir_add(k, -1);
        } else {
          k = dir_add(k, 1);
        }
        if (s == s0 && k == k0) {
          closed = true;
          break;
        }
        if (seen[6 * s + k]) break;  // joins a chain already cut
      }
      if (!closed) {
        out.discarded_edges += chain.size();
        continue;
      }
      LoopPath loop;
      loop.edges = chain;
      loop.vertices.reserve(chain.size());
      for (const auto& [es, ek] : chain) {
        const SiteCoord sc = reg.site(es);
        const Point ps = reg.embed(sc);
        const Point pt = reg.embed(sc + kDirections[ek]);
        const Point pu = reg.embed(sc + kDirections[dir_add(ek, 1)]);
        loop.vertices.push_back((1.0 / 3.0) * (ps + pt + pu));
      }
      loop.ccw = loop.signed_area() > 0.0;
      loop.encloses_open = loop.ccw;
      out.loops.push_back(std::move(loop));
    }
  }
  // Each loop is the outer boundary of the cluster just inside it; its
  // parent is the outer boundary of the cluster just outside it.
  const ClusterLabels open = label(config);
  const ClusterLabels closed = label_closed(config);
  const auto key = [&](size_t site) -> int64_t {
    return open.labeled(site) ? open.cluster_id(site)
                              : static_cast<int64_t>(open.cluster_count()) + closed.cluster_id(site);
  };
  std::vector<int64_t> outer_loop(open.cluster_count() + closed.cluster_count(), -1);
  std::vector<std::pair<int64_t, int64_t>> sides(out.loops.size());
  for (size_t l = 0; l < out.loops.size(); ++l) {
    const auto [s, k] = out.loops[l].edges.front();
    const auto t = static_cast<size_t>(reg.index_of(reg.site(s) + kDirections[k]));
    const size_t in = out.loops[l].ccw ? s : t;
    const size_t outside = out.loops[l].ccw ? t : s;
    sides[l] = {key(in), key(outside)};
    outer_loop[static_cast<size_t>(sides[l].first)] = static_cast<int64_t>(l);
  }
  out.parent.resize(out.loops.size());
  for (size_t l = 0; l < out.loops.size(); ++l)
    out.parent[l] = outer_loop[static_cast<size_t>(sides[l].second)];
  return out;
}

int winding_number(const std::vector<Point>& polygon, Point p) {
  int wn = 0;
  const size_t m = polygon.size();
  for (size_t i = 0; i < m; ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % m];
    if (segment_distance(p, a, b) < 1e-12) throw InvalidArgument("point lies on the loop");
    const double cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && cross > 0.0) ++wn;
    } else if (b.y <= p.y && cross < 0.0) {
      --wn;
    }
  }
  return wn;
}

int winding_number(const LoopPath& loop, Point p) { return winding_number(loop.vertices, p); }

bool separates(const LoopPath& loop, Point p1, Point p2) {
  return (winding_number(loop, p1) != 0) != (winding_number(loop, p2) != 0);
}

namespace detail {

std::vector<size_t> trace_outer_boundary(const LatticeRegion& reg, const std::vector<uint32_t>& mark,
                                         uint32_t value, size_t start, Point inside) {
  const auto in_set = [&](SiteCoord c) {
    const int64_t i = reg.index_of(c);
    return i >= 0 && mark[static_cast<size_t>(i)] == value;
  };
  const auto index = [&](SiteCoord c) {
    const int64_t i = reg.index_of(c);
    if (i < 0) throw GeometryError("boundary walk left the region");
    return static_cast<size_t>(i);
  };
  std::vector<size_t> walk;
  const SiteCoord s0 = reg.site(start);
  SiteCoord s = s0;
  uint8_t k = 0;
  do {
    const size_t t = index(s + kDirections[k]);
    if (walk.empty() || walk.back() != t) walk.push_back(t);
    const SiteCoord u = s + kDirections[dir_add(k, 1)];
    if (in_set(u)) {
      s = u;
      k = dir_add(k, -1);
    } else {
      k = dir_add(k, 1);
    }
  } while (!(s == s0 && k == 0));
  while (walk.size() > 1 && walk.front() == walk.back()) walk.pop_back();
  // Loop erasure: at a repeated site keep the arc that still surrounds `inside`.
  const auto winds = [&](const std::vector<size_t>& cyc) {
    std::vector<Point> poly;
    poly.reserve(cyc.size());
    for (size_t i : cyc) poly.push_back(reg.embed_index(i));
    return winding_number(poly, inside) != 0;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < walk.size() && !changed; ++i) {
      for (size_t j = i + 1; j < walk.size(); ++j) {
        if (walk[i] != walk[j]) continue;
        std::vector<size_t> a(walk.begin() + static_cast<std::ptrdiff_t>(i),
                              walk.begin() + static_cast<std::ptrdiff_t>(j));
        std::vector<size_t> b(walk.begin() + static_cast<std::ptrdiff_t>(j), walk.end());
        b.insert(b.end(), walk.begin(), walk.begin() + static_cast<std::ptrdiff_t>(i));
        walk = winds(a) ? std::move(a) : std::move(b);
        changed = true;
        break;
      }
    }
  }
  // Canonical start: smallest site index.
  const auto it = std::min_element(walk.begin(), walk.end());
  std::rotate(walk.begin(), it, walk.end());
  return walk;
}

}  // namespace detail

CircuitSearch innermost_open_circuit(const Configuration& config, const AnnulusSpec& ann,
                                     std::optional<uint64_t> start_seed) {
  const AnnulusGeometry geom(config.region_ptr(), ann);
  return innermost_open_circuit(config, geom, start_seed);
}

double sphere_distance(Point u, Point v) {
  const double num = distance(u, v);
  const double den = std::sqrt((1.0 + u.x * u.x + u.y * u.y) * (1.0 + v.x * v.x + v.y * v.y));
  return std::asin(std::min(1.0, num / den));
}

std::vector<Point> resample_closed(const std::vector<Point>& polygon, size_t n) {
  if (polygon.empty() || n == 0) throw InvalidArgument("cannot resample an empty loop");
  const size_t m = polygon.size();
  std::vector<double> cum(m + 1, 0.0);
  for (size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + distance(polygon[i], polygon[(i + 1) % m]);
  const double total = cum[m];
  std::vector<Point> out(n);
  if (total == 0.0) {
    std::fill(out.begin(), out.end(), polygon.front());
    return out;
  }
  size_t seg = 0;
  for (size_t i = 0; i < n; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(n);
    while (seg + 1 < m && cum[seg + 1] <= target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    const Point a = polygon[seg];
    const Point b = polygon[(seg + 1) % m];
    out[i] = a + t * (b - a);
  }
  return out;
}

double loop_distance(const std::vector<Point>& a, const std::vector<Point>& b, size_t n) {
  const std::vector<Point> A = resample_closed(a, n);
  const std::vector<Point> B = resample_closed(b, n);
  std::vector<double> D(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) D[i * n + j] = sphere_distance(A[i], B[j]);
  // Closed curves: both sequences return to their first vertex.
  const size_t L = n + 1;
  std::vector<double> prev(L), cur(L);
  double best = std::numeric_limits<double>::infinity();
  for (size_t shift = 0; shift < n; ++shift) {
    const auto d = [&](size_t i, size_t j) { return D[(i % n) * n + (j + shift) % n]; };
    for (size_t i = 0; i < L; ++i) {
      double row_min = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < L; ++j) {
        const double c = d(i, j);
        double v;
        if (i == 0 && j == 0)
          v = c;
        else if (i == 0)
          v = std::max(cur[j - 1], c);
        else if (j == 0)
          v = std::max(prev[0], c);
        else
          v = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), c);
        cur[j] = v;
        row_min = std::min(row_min, v);
      }
      std::swap(prev, cur);
      if (row_min >= best) break;  // later rows cannot go lower
    }
    best = std::min(best, prev[L - 1]);
  }
  return best;
}

double loop_distance(const LoopPath& a, const LoopPath& b, size_t n) {
  return loop_distance(a.vertices, b.vertices, n);
}

double ensemble_distance(const std::vector<std::vector<Point>>& a,
                         const std::vector<std::vector<Point>>& b, size_t n) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  std::vector<double> d(a.size() * b.size());
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) d[i * b.size() + j] = loop_distance(a[i], b[j], n);
  double h = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < b.size(); ++j) m = std::min(m, d[i * b.size() + j]);
    h = std::max(h, m);
  }
  for (size_t j = 0; j < b.size(); ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < a.size(); ++i) m = std::min(m, d[i * b.size() + j]);
    h = std::max(h, m);
  }
  return h;
}

double ensemble_distance(const LoopEnsemble& a, const LoopEnsemble& b, size_t n) {
  std::vector<std::vector<Point>> va, vb;
  for (const LoopPath& l : a.loops) va.push_back(l.vertices);
  for (const LoopPath& l : b.loops) vb.push_back(l.vertices);
  return ensemble_distance(va, vb, n);
}

void write_loops_jsonl(std::ostream& out, const LoopEnsemble& loops) {
  for (const LoopPath& l : loops.loops) {
    json j;
    j["orientation"] = l.ccw ? "ccw" : "cw";
    json v = json::array();
    for (const Point& p : l.vertices) v.push_back(point_to_json(p));
    j["vertices"] = std::move(v);
    out << j.dump() << '\n';
  }
}

}  // namespace percolab
