#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "percolab/events.hpp"
#include "percolab/inference.hpp"
#include "percolab/loops.hpp"
#include "support.hpp"

using namespace percolab;

namespace {

std::array<Point, 6> hexagon(const LatticeRegion& reg, SiteCoord s) {
  const Point c = reg.embed(s);
  const double R = reg.spacing() / std::sqrt(3.0);
  std::array<Point, 6> v;
  for (int k = 0; k < 6; ++k) {
    const double a = std::acos(-1.0) / 6.0 + k * std::acos(-1.0) / 3.0;
    v[static_cast<size_t>(k)] = c + Point{R * std::cos(a), R * std::sin(a)};
  }
  return v;
}

double seg_dist(Point p, Point a, Point b) {
  const Point d = b - a;
  double t = ((p.x - a.x) * d.x + (p.y - a.y) * d.y) / (d.x * d.x + d.y * d.y);
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * d);
}

double hex_max(const LatticeRegion& reg, SiteCoord s, Point p) {
  double m = 0.0;
  for (const Point& v : hexagon(reg, s)) m = std::max(m, distance(v, p));
  return m;
}

double hex_min(const LatticeRegion& reg, SiteCoord s, Point p) {
  const auto v = hexagon(reg, s);
  if (distance(reg.embed(s), p) <= 0.5 * reg.spacing()) return 0.0;
  double m = 1e300;
  for (size_t k = 0; k < 6; ++k) m = std::min(m, seg_dist(p, v[k], v[(k + 1) % 6]));
  return m;
}

int winding(const std::vector<Point>& poly, Point p) {
  double total = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point a = poly[i] - p, b = poly[(i + 1) % poly.size()] - p;
    total += std::atan2(a.x * b.y - a.y * b.x, a.x * b.x + a.y * b.y);
  }
  return static_cast<int>(std::lround(total / (2 * std::acos(-1.0))));
}

// All simple cycles of open band sites winding around the center.
std::vector<std::vector<size_t>> enclosing_cycles(const Configuration& c, const AnnulusGeometry& g) {
  const LatticeRegion& reg = c.region();
  const Point ctr = g.spec().center;
  std::vector<size_t> band;
  for (size_t i : g.band_sites())
    if (c.open(i)) band.push_back(i);
  std::vector<uint8_t> on(reg.size(), 0);
  for (size_t i : band) on[i] = 1;
  std::vector<size_t> path;
  std::vector<uint8_t> used(reg.size(), 0);
  std::vector<std::vector<size_t>> found;
  std::function<void(size_t, size_t)> dfs = [&](size_t start, size_t cur) {
    const SiteCoord s = reg.site(cur);
    for (int k = 0; k < 6; ++k) {
      const int64_t j = reg.index_of({s.q + testing::kDq[k], s.r + testing::kDr[k]});
      if (j < 0 || !on[static_cast<size_t>(j)]) continue;
      const auto u = static_cast<size_t>(j);
      if (u == start && path.size() >= 3) {
        std::vector<Point> poly;
        for (size_t x : path) poly.push_back(reg.embed(reg.site(x)));
        if (winding(poly, ctr) != 0) found.push_back(path);
        continue;
      }
      if (used[u] || u < start) continue;
      used[u] = 1;
      path.push_back(u);
      dfs(start, u);
      path.pop_back();
      used[u] = 0;
    }
  };
  for (size_t s : band) {
    used[s] = 1;
    path.assign(1, s);
    dfs(s, s);
    used[s] = 0;
  }
  return found;
}

double poly_area(const LatticeRegion& reg, const std::vector<size_t>& cyc) {
  double a = 0.0;
  for (size_t i = 0; i < cyc.size(); ++i) {
    const Point p = reg.embed(reg.site(cyc[i])), q = reg.embed(reg.site(cyc[(i + 1) % cyc.size()]));
    a += p.x * q.y - p.y * q.x;
  }
  return std::abs(a) / 2;
}

// Sites strictly enclosed by a cycle.
std::vector<size_t> interior(const LatticeRegion& reg, const std::vector<size_t>& cyc) {
  std::vector<Point> poly;
  for (size_t x : cyc) poly.push_back(reg.embed(reg.site(x)));
  std::vector<size_t> in;
  for (size_t i = 0; i < reg.size(); ++i)
    if (std::find(cyc.begin(), cyc.end(), i) == cyc.end() && winding(poly, reg.embed(reg.site(i))) != 0)
      in.push_back(i);
  return in;
}

// At least two open clusters of the band each touch the core and the outside.
bool four_arm_by_bfs(const Configuration& c, const AnnulusGeometry& g) {
  const LatticeRegion& reg = c.region();
  std::vector<int> comp(reg.size(), -1);
  int crossing = 0, next = 0;
  for (size_t s : g.band_sites()) {
    if (!c.open(s) || comp[s] >= 0) continue;
    std::vector<size_t> q{s};
    comp[s] = next;
    bool in = false, out = false;
    for (size_t h = 0; h < q.size(); ++h) {
      const SiteCoord x = reg.site(q[h]);
      for (int k = 0; k < 6; ++k) {
        const int64_t j = reg.index_of({x.q + testing::kDq[k], x.r + testing::kDr[k]});
        if (j < 0) continue;
        const auto u = static_cast<size_t>(j);
        in = in || g.zone(u) == AnnulusGeometry::core;
        out = out || g.zone(u) == AnnulusGeometry::outside;
        if (g.in_band(u) && c.open(u) && comp[u] < 0) {
          comp[u] = next;
          q.push_back(u);
        }
      }
    }
    crossing += in && out;
    ++next;
  }
  return crossing >= 2;
}

}  // namespace

TEST_CASE("annulus zones match hexagon geometry") {
  const RegionPtr reg = LatticeRegion::box(12, 0.7);
  const AnnulusSpec ann{{0.3, -0.2}, 2.2, 5.9};
  const AnnulusGeometry g(reg, ann);
  for (size_t i = 0; i < reg->size(); ++i) {
    const SiteCoord s = reg->site(i);
    AnnulusGeometry::Zone z = AnnulusGeometry::outside;
    if (hex_max(*reg, s, ann.center) < ann.r)
      z = AnnulusGeometry::core;
    else if (hex_min(*reg, s, ann.center) <= ann.R)
      z = AnnulusGeometry::band;
    CHECK(g.zone(i) == z);
  }
  CHECK_THROWS_AS(AnnulusGeometry(reg, {{0, 0}, 2.0, 7.5}), GeometryError);
}

TEST_CASE("connection probabilities by enumeration") {
  const RegionPtr fl = testing::flower();
  const auto p = [&](json j) { return brute_force_probability(fl, EventSpec::from_json(j)); };
  CHECK(p({{"event", "connection"}, {"points", {{0, 0}, {1, 0}}}}) == Rational::reduced(1, 4));
  CHECK(p({{"event", "connection"}, {"points", {{0, 0}, {1, 0}, {0, 1}}}}) == Rational::reduced(1, 8));
  CHECK_THROWS_AS(p({{"event", "connection"}, {"points", {{0, 0}}}}), InvalidArgument);
}

TEST_CASE("rhombus crossing is exactly one half") {
  const EventSpec ev = EventSpec::from_json({{"event", "rhombus_crossing"}});
  for (int L : {1, 2, 3, 4}) CHECK(brute_force_probability(LatticeRegion::rhombus(L), ev) == Rational::reduced(1, 2));
}

TEST_CASE("one-arm and annulus crossing against BFS") {
  const RegionPtr reg = LatticeRegion::box(14);
  const SiteCoord x{0, 0};
  const Point px = reg->embed(x);
  const AnnulusSpec ann{px, 1.5, 8.0};
  for (uint64_t rep = 0; rep < 80; ++rep) {
    const Configuration c = sample(reg, 31, rep);
    const ClusterLabels l = label(c);
    const std::vector<int> comp = testing::bfs_components(c);
    double reach = -1.0;
    std::vector<double> lo(reg->size(), 1e300), hi(reg->size(), -1.0);
    for (size_t i = 0; i < reg->size(); ++i) {
      if (comp[i] < 0) continue;
      const auto k = static_cast<size_t>(comp[i]);
      lo[k] = std::min(lo[k], hex_min(*reg, reg->site(i), px));
      hi[k] = std::max(hi[k], hex_max(*reg, reg->site(i), px));
    }
    const int64_t xi = reg->index_of(x);
    if (comp[static_cast<size_t>(xi)] >= 0) reach = hi[static_cast<size_t>(comp[static_cast<size_t>(xi)])];
    CHECK(one_arm(l, x, 6.0) == (reach >= 6.0));
    bool cross = false;
    for (size_t k = 0; k < reg->size(); ++k) cross = cross || (lo[k] <= ann.r && hi[k] >= ann.R);
    CHECK(annulus_crossing(l, ann) == cross);
  }
}

TEST_CASE("open circuit agrees with cycle enumeration and duality") {
  const RegionPtr fl = testing::flower();
  const AnnulusSpec ann{{0.0, 0.0}, 0.8, 1.9};
  const AnnulusGeometry g(fl, ann);
  const Enumeration en(fl);
  uint64_t open_c = 0, closed_c = 0, checked = 0;
  en.for_each([&](const Configuration& c) {
    const bool oc = open_circuit_in_annulus(c, ann);
    open_c += oc;
    closed_c += open_circuit_in_annulus(c.color_flipped(), ann);
    if ((checked++ % 17) == 0) {
      const auto cycles = enclosing_cycles(c, g);
      REQUIRE(oc == !cycles.empty());
      const CircuitSearch cs = innermost_open_circuit(c, g);
      REQUIRE(cs.circuit.has_value() == oc);
      if (oc) {
        // The innermost cycle encloses the least area, and its interior sites
        // lie inside every other enclosing cycle.
        std::vector<size_t> best = cycles.front();
        for (const auto& cy : cycles)
          if (poly_area(*fl, cy) < poly_area(*fl, best)) best = cy;
        const std::vector<size_t> inner = interior(*fl, best);
        for (const auto& cy : cycles) {
          const std::vector<size_t> other = interior(*fl, cy);
          for (size_t x : inner) CHECK(std::find(other.begin(), other.end(), x) != other.end());
        }
        std::vector<size_t> got = *cs.circuit;
        std::sort(got.begin(), got.end());
        std::sort(best.begin(), best.end());
        CHECK(got == best);
      }
    }
    return true;
  });
  CHECK(open_c == closed_c);
  CHECK(open_c > 0);
}

TEST_CASE("innermost circuit is a stopping set") {
  const RegionPtr reg = LatticeRegion::box(20);
  const AnnulusGeometry g(reg, {{0, 0}, 3.0, 9.0});
  std::mt19937_64 rnd(1);
  int found = 0;
  for (uint64_t rep = 0; rep < 300 && found < 25; ++rep) {
    const Configuration c = sample(reg, 41, rep);
    const CircuitSearch cs = innermost_open_circuit(c, g);
    if (!cs.circuit) continue;
    ++found;
    const std::vector<size_t>& cyc = *cs.circuit;
    for (size_t t = 0; t < cyc.size(); ++t) {
      CHECK(c.open(cyc[t]));
      CHECK(g.in_band(cyc[t]));
      const SiteCoord a = reg->site(cyc[t]), b = reg->site(cyc[(t + 1) % cyc.size()]);
      CHECK(distance(reg->embed(a), reg->embed(b)) == doctest::Approx(1.0));
    }
    std::vector<Point> poly;
    for (size_t i : cyc) poly.push_back(reg->embed(reg->site(i)));
    CHECK(winding(poly, {0, 0}) == 1);
    // Resample everything that was not read; the circuit must not move.
    std::vector<uint64_t> w = c.words();
    std::vector<uint8_t> read(reg->size(), 0);
    for (size_t i : cs.explored) read[i] = 1;
    for (size_t i = 0; i < reg->size(); ++i) {
      if (read[i]) continue;
      if (rnd() & 1)
        w[i >> 6] |= uint64_t{1} << (i & 63);
      else
        w[i >> 6] &= ~(uint64_t{1} << (i & 63));
    }
    const CircuitSearch again = innermost_open_circuit(Configuration(reg, w), g);
    CHECK(again.circuit == cs.circuit);
  }
  CHECK(found > 0);
}

TEST_CASE("four-arm: label form, config form and sweep agree") {
  const RegionPtr reg = LatticeRegion::box(30);
  const std::vector<double> radii{6.0, 10.0, 16.0, 24.0};
  FourArmSweep sweep(reg, {0, 0}, 2.5, radii);
  for (uint64_t rep = 0; rep < 60; ++rep) {
    const Configuration c = sample(reg, 51, rep);
    const std::vector<bool> v = sweep.run(c);
    const ClusterLabels o = label(c), cl = label_closed(c);
    for (size_t k = 0; k < radii.size(); ++k) {
      const AnnulusSpec ann{{0, 0}, 2.5, radii[k]};
      CHECK(four_arm(c, ann) == v[k]);
      CHECK(four_arm(o, cl, ann) == v[k]);
    }
  }
}

TEST_CASE("four-arm against BFS crossing clusters under enumeration") {
  const RegionPtr reg = LatticeRegion::box(6);
  const AnnulusSpec ann{reg->embed({0, 0}), 0.6, 1.6};
  const AnnulusGeometry g(reg, ann);
  // Enumerate the band only; everything else stays closed.
  const std::vector<size_t>& band = g.band_sites();
  REQUIRE(band.size() <= 20);
  uint64_t hits = 0;
  for (uint32_t m = 0; m < (1u << band.size()); ++m) {
    std::vector<uint64_t> w((reg->size() + 63) / 64, 0);
    for (size_t k = 0; k < band.size(); ++k)
      if ((m >> k) & 1) w[band[k] >> 6] |= uint64_t{1} << (band[k] & 63);
    const Configuration c(reg, w);
    const bool want = four_arm_by_bfs(c, g);
    hits += want;
    if (four_arm(c, ann) != want) {
      FAIL("mismatch at mask " << m);
      break;
    }
  }
  CHECK(hits > 0);
}

TEST_CASE("annulus crossing nests") {
  const RegionPtr reg = LatticeRegion::box(20);
  const Point o = reg->embed({0, 0});
  for (uint64_t rep = 0; rep < 100; ++rep) {
    const ClusterLabels l = label(sample(reg, 71, rep));
    if (annulus_crossing(l, {o, 2.0, 12.0})) {
      CHECK(annulus_crossing(l, {o, 3.0, 12.0}));
      CHECK(annulus_crossing(l, {o, 2.0, 9.0}));
      CHECK(annulus_crossing(l, {o, 4.5, 6.0}));
    }
  }
}

TEST_CASE("disjoint connections") {
  const RegionPtr reg = LatticeRegion::box(16);
  const DisjointSpec spec{{Disk{reg->embed({-8, 0}), 1.2}, Disk{reg->embed({8, 0}), 1.2},
                           Disk{reg->embed({-4, 6}), 1.2}, Disk{reg->embed({4, 6}), 1.2}}};
  CHECK_FALSE(disjoint_connections(Configuration::all_open(reg), spec));
  // Two straight corridors: row r = 0 and row r = 6.
  std::vector<SiteCoord> open;
  for (int q = -12; q <= 12; ++q) {
    open.push_back({q, 0});
    open.push_back({q, 6});
  }
  CHECK(disjoint_connections(Configuration::with_open_sites(reg, open), spec));
  const DisjointSpec overlap{{Disk{{0, 0}, 2.0}, Disk{{1, 0}, 2.0}, Disk{{9, 0}, 1.0}, Disk{{-9, 0}, 1.0}}};
  CHECK_THROWS_AS(overlap.validate(), InvalidArgument);

  // Against BFS with the holes forced closed.
  const auto in_hole = [&](size_t i, const Disk& d) { return distance(reg->embed_index(i), d.center) <= d.radius; };
  for (uint64_t rep = 0; rep < 100; ++rep) {
    const Configuration c = sample(reg, 81, rep);
    std::vector<uint64_t> w = c.words();
    for (size_t i = 0; i < reg->size(); ++i)
      for (const Disk& d : spec.holes)
        if (in_hole(i, d)) w[i >> 6] &= ~(uint64_t{1} << (i & 63));
    const Configuration cut(reg, w);
    const std::vector<int> comp = testing::bfs_components(cut);
    // Clusters touching each hole: an open site adjacent to a hole site.
    std::vector<std::set<int>> touch(4);
    for (size_t i = 0; i < reg->size(); ++i) {
      if (comp[i] < 0) continue;
      const SiteCoord x = reg->site(i);
      for (int k = 0; k < 6; ++k) {
        const int64_t j = reg->index_of({x.q + testing::kDq[k], x.r + testing::kDr[k]});
        if (j < 0) continue;
        for (size_t h = 0; h < 4; ++h)
          if (in_hole(static_cast<size_t>(j), spec.holes[h])) touch[h].insert(comp[i]);
      }
    }
    bool want = false;
    for (int a : touch[0])
      for (int b : touch[2])
        want = want || (a != b && touch[1].count(a) && touch[3].count(b));
    CHECK(disjoint_connections(c, spec) == want);
  }
}

TEST_CASE("partition events sum to one") {
  const RegionPtr rh = LatticeRegion::rhombus(3);
  const std::vector<SiteCoord> pts{{0, 0}, {2, 0}, {0, 2}};
  const std::vector<std::vector<std::vector<size_t>>> parts{
      {{0, 1, 2}}, {{0, 1}, {2}}, {{0, 2}, {1}}, {{1, 2}, {0}}, {{0}, {1}, {2}}};
  Enumeration(rh).for_each([&](const Configuration& c) {
    const ClusterLabels l = label(c);
    bool all_open = true;
    for (const SiteCoord& p : pts) all_open = all_open && c.open_at(p);
    int hits = 0;
    for (const auto& b : parts) hits += partition_event(l, PartitionSpec{pts, b});
    REQUIRE(hits == (all_open ? 1 : 0));
    return true;
  });
  CHECK_THROWS_AS((PartitionSpec{pts, {{0, 1}, {1, 2}}}.validate()), InvalidArgument);
}

TEST_CASE("event spec json round trip and validation") {
  const json j = {{"event", "four_arm"}, {"center", {0.0, 0.0}}, {"r", 2.0}, {"R", 6.0}};
  const EventSpec e = EventSpec::from_json(j);
  CHECK(EventSpec::from_json(e.to_json()).to_json() == e.to_json());
  CHECK_THROWS_AS(EventSpec::from_json({{"event", "bogus"}}), InvalidArgument);
  CHECK_THROWS_AS(e.validate(LatticeRegion::box(5)), GeometryError);
  CHECK_NOTHROW(e.validate(LatticeRegion::box(10)));
}

TEST_CASE("disjoint connections with a cross connection force four arms at a hole") {
  const RegionPtr reg = LatticeRegion::box(30);
  // Hole sites are the center and its first ring; the four-arm core must
  // hold exactly those hexagons, hence the slightly larger inner radius.
  const double rad = 1.2, core = 1.7, ell = 4.0;
  const std::array<SiteCoord, 4> x{{{-6, 0}, {6, 0}, {-6, 8}, {6, 8}}};
  DisjointSpec spec;
  for (size_t i = 0; i < 4; ++i) spec.holes[i] = Disk{reg->embed(x[i]), rad};
  int triggered = 0;
  for (uint64_t rep = 0; rep < 3000; ++rep) {
    const Configuration c = sample(reg, 91, rep);
    if (!disjoint_connections(c, spec)) continue;
    if (!connection_event(label(c), {x[0], x[2]})) continue;
    ++triggered;
    bool any = false;
    for (size_t i = 0; i < 4; ++i) any = any || four_arm(c, {reg->embed(x[i]), core, ell});
    CHECK(any);
  }
  CHECK(triggered > 0);
}
