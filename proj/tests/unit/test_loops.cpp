#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>
#include <sstream>

#include "percolab/loops.hpp"
#include "support.hpp"

using namespace percolab;

namespace {

double shoelace(const std::vector<Point>& v) {
  double a = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % v.size()];
    a += p.x * q.y - p.y * q.x;
  }
  return 0.5 * a;
}

Point neighbor_point(const LatticeRegion& reg, size_t site, uint8_t dir) {
  return reg.embed(reg.site(site) + kDirections[dir]);
}

}  // namespace

TEST_CASE("single hexagon loops") {
  const RegionPtr reg = LatticeRegion::box(6);
  const SiteCoord c{0, 0};
  const double hex_area = std::sqrt(3.0) / 2.0;

  const LoopEnsemble one = trace_interfaces(Configuration::with_open_sites(reg, {c}));
  REQUIRE(one.loops.size() == 1);
  CHECK(one.loops[0].vertices.size() == 6);
  CHECK(one.loops[0].ccw);
  CHECK(one.loops[0].encloses_open);
  CHECK(one.loops[0].signed_area() == doctest::Approx(hex_area));

  const size_t ci = static_cast<size_t>(reg->index_of(c));
  const LoopEnsemble hole = trace_interfaces(Configuration::all_open(reg).with_site(ci, false));
  REQUIRE(hole.loops.size() == 1);
  CHECK_FALSE(hole.loops[0].ccw);
  CHECK_FALSE(hole.loops[0].encloses_open);
  CHECK(hole.loops[0].signed_area() == doctest::Approx(-hex_area));

  CHECK(trace_interfaces(Configuration::all_open(reg)).loops.empty());
}

TEST_CASE("loop invariants on random configurations") {
  const RegionPtr reg = LatticeRegion::box(24);
  const double side = 1.0 / std::sqrt(3.0);
  for (uint64_t rep = 0; rep < 20; ++rep) {
    const Configuration c = sample(reg, 61, rep);
    const LoopEnsemble ens = trace_interfaces(c);
    CHECK(ens.edge_count() + ens.discarded_edges == interface_pair_count(c));
    std::set<std::pair<size_t, uint8_t>> seen;
    for (const LoopPath& L : ens.loops) {
      REQUIRE(L.vertices.size() == L.edges.size());
      const double area = shoelace(L.vertices);
      CHECK(L.signed_area() == doctest::Approx(area));
      CHECK(L.ccw == (area > 0));
      CHECK(L.encloses_open == L.ccw);
      for (size_t i = 0; i < L.vertices.size(); ++i) {
        CHECK(distance(L.vertices[i], L.vertices[(i + 1) % L.vertices.size()]) == doctest::Approx(side));
      }
      for (const auto& e : L.edges) {
        CHECK(seen.insert(e).second);
        REQUIRE(c.open(e.first));
        const Point open_p = reg->embed_index(e.first);
        const Point closed_p = neighbor_point(*reg, e.first, e.second);
        CHECK_FALSE(c.open_at(reg->site(e.first) + kDirections[e.second]));
        // Open hexagons lie on the left of the oriented loop.
        CHECK(winding_number(L, open_p) == (L.ccw ? 1 : 0));
        CHECK(winding_number(L, closed_p) == (L.ccw ? 0 : -1));
      }
    }
    // Parent: the smallest loop that encloses a vertex of the child.
    for (size_t i = 0; i < ens.loops.size(); ++i) {
      const Point probe = ens.loops[i].vertices.front();
      int64_t best = -1;
      double best_area = 1e300;
      for (size_t j = 0; j < ens.loops.size(); ++j) {
        if (j == i) continue;
        const double a = std::abs(shoelace(ens.loops[j].vertices));
        if (a <= std::abs(shoelace(ens.loops[i].vertices))) continue;
        bool on = false;
        for (const Point& v : ens.loops[j].vertices) on = on || distance(v, probe) < 1e-9;
        if (on) continue;
        if (winding_number(ens.loops[j], probe) != 0 && a < best_area) {
          best_area = a;
          best = static_cast<int64_t>(j);
        }
      }
      CHECK(ens.parent[i] == best);
    }
  }
}

TEST_CASE("winding number") {
  const std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(winding_number(sq, {0.5, 0.5}) == 1);
  CHECK(winding_number(std::vector<Point>(sq.rbegin(), sq.rend()), {0.5, 0.5}) == -1);
  CHECK(winding_number(sq, {2, 0.5}) == 0);
  CHECK_THROWS_AS(winding_number(sq, {0.5, 0.0}), InvalidArgument);
}

TEST_CASE("spherical distance") {
  for (double r : {0.1, 1.0, 3.0, 40.0}) {
    CHECK(sphere_distance({0, 0}, {r * 0.6, r * 0.8}) == doctest::Approx(std::atan(r)).epsilon(1e-9));
  }
  const auto inv = [](Point p) {
    const std::complex<double> z = 1.0 / std::complex<double>(p.x, p.y);
    return Point{z.real(), z.imag()};
  };
  const Point u{0.3, -1.2}, v{2.5, 0.7}, w{-0.4, 0.1};
  CHECK(sphere_distance(u, v) == doctest::Approx(sphere_distance(v, u)));
  CHECK(sphere_distance(inv(u), inv(v)) == doctest::Approx(sphere_distance(u, v)).epsilon(1e-9));
  CHECK(sphere_distance(u, w) <= sphere_distance(u, v) + sphere_distance(v, w) + 1e-12);
  CHECK(sphere_distance(u, u) == doctest::Approx(0.0));
}

TEST_CASE("resampling and loop distance") {
  const std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const std::vector<Point> r = resample_closed(sq, 8);
  REQUIRE(r.size() == 8);
  for (size_t i = 0; i < r.size(); ++i) CHECK(distance(r[i], r[(i + 1) % r.size()]) == doctest::Approx(0.5));

  CHECK(loop_distance(sq, sq) == doctest::Approx(0.0));
  std::vector<Point> rot(sq.begin() + 1, sq.end());
  rot.push_back(sq.front());
  CHECK(loop_distance(sq, rot) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<Point> moved;
  for (const Point& p : sq) moved.push_back(p + Point{0.01, 0.0});
  const double d = loop_distance(sq, moved);
  CHECK(d > 0.0);
  CHECK(d <= 0.01 + 1e-12);
  CHECK(d == doctest::Approx(loop_distance(moved, sq)));

  CHECK(ensemble_distance(std::vector<std::vector<Point>>{}, {}) == 0.0);
  CHECK(std::isinf(ensemble_distance({sq}, {})));
  CHECK(ensemble_distance({sq, moved}, {moved}) == doctest::Approx(d));
}

TEST_CASE("loops jsonl export") {
  const RegionPtr reg = LatticeRegion::box(12);
  const LoopEnsemble ens = trace_interfaces(sample(reg, 7, 0));
  std::ostringstream os;
  write_loops_jsonl(os, ens);
  std::istringstream is(os.str());
  std::string line;
  size_t n = 0;
  while (std::getline(is, line)) {
    const json j = json::parse(line);
    CHECK(j.at("orientation") == (ens.loops[n].ccw ? "ccw" : "cw"));
    CHECK(j.at("vertices").size() == ens.loops[n].vertices.size());
    ++n;
  }
  CHECK(n == ens.loops.size());
}
