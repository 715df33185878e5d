#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "percolab/error.hpp"
#include "percolab/inference.hpp"
#include "support.hpp"

using namespace percolab;

TEST_CASE("joint counts merge exactly and estimate linear combinations") {
  std::mt19937_64 g(5);
  std::vector<std::vector<bool>> rows;
  for (int i = 0; i < 500; ++i) rows.push_back({(g() % 3) == 0, (g() % 2) == 0, (g() % 5) < 2});
  JointCounts all(3), a(3), b(3), c(3);
  for (size_t i = 0; i < rows.size(); ++i) {
    all.add(rows[i]);
    (i < 100 ? a : i < 350 ? b : c).add(rows[i]);
  }
  JointCounts ab = a;
  ab.merge(b);
  ab.merge(c);
  JointCounts bc = b;
  bc.merge(c);
  JointCounts a_bc = a;
  a_bc.merge(bc);
  CHECK(ab.single == all.single);
  CHECK(ab.both == all.both);
  CHECK(a_bc.both == all.both);

  const std::vector<double> w{0.5, -2.0, 1.0};
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(w[0] * r[0] + w[1] * r[1] + w[2] * r[2]);
  double m = 0.0, v = 0.0;
  for (double x : y) m += x;
  m /= y.size();
  for (double x : y) v += (x - m) * (x - m);
  v /= y.size();
  const Estimate lin = all.linear(w);
  CHECK(lin.mean == doctest::Approx(m).epsilon(1e-12));
  CHECK(lin.std_error == doctest::Approx(std::sqrt(v / y.size())).epsilon(1e-9));

  const Estimate p0 = all.proportion(0);
  CHECK(p0.std_error == doctest::Approx(binomial_estimate(all.single[0], all.n).std_error));
  const Estimate pw = all.power_product({1.0, 0.0, 0.0});
  CHECK(pw.mean == doctest::Approx(p0.mean));
  CHECK(pw.std_error == doctest::Approx(p0.std_error));
  const Estimate sq = all.power_product({2.0, 0.0, 0.0});
  CHECK(sq.std_error == doctest::Approx(2 * p0.mean * p0.std_error));
  CHECK(all.delta(p0.mean, {1.0, 0.0, 0.0}).std_error == doctest::Approx(p0.std_error));
}

TEST_CASE("moment sums") {
  MomentSums a(1), b(1);
  const std::vector<double> xs{1.0, 4.0, -2.0, 0.5, 3.0, 3.0};
  for (size_t i = 0; i < xs.size(); ++i) (i < 2 ? a : b).add({xs[i]});
  a.merge(b);
  const Estimate e = a.mean(0);
  CHECK(e.mean == doctest::Approx(1.5833333333333333));
  double v = 0.0;
  for (double x : xs) v += (x - e.mean) * (x - e.mean);
  CHECK(e.std_error == doctest::Approx(std::sqrt(v / (xs.size() - 1) / xs.size())));
}

TEST_CASE("replica runner is independent of the thread count") {
  const RegionPtr reg = LatticeRegion::box(12);
  const EventSpec ev = EventSpec::from_json({{"event", "connection"}, {"points", {{0, 0}, {3, 0}}}});
  const Estimate one = estimate_event(ev, reg, 1000, 17, 1);
  const Estimate three = estimate_event(ev, reg, 1000, 17, 3);
  CHECK(one.mean == three.mean);
  CHECK(one.std_error == three.std_error);
  // Same value from full configurations.
  uint64_t hits = 0;
  for (uint64_t rep = 0; rep < 1000; ++rep) hits += evaluate(ev, sample(reg, 17, rep));
  CHECK(one.mean == doctest::Approx(hits / 1000.0));

  const auto ranges = worker_ranges(10, 1000, 3);
  std::vector<int> covered(1000, 0);
  for (const auto& w : ranges)
    for (const ReplicaRange& r : w)
      for (uint64_t i = r.begin; i < r.end; ++i) covered[i - 10]++;
  CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
}

TEST_CASE("weighted linear fit") {
  std::vector<double> x{1, 2, 3, 4, 5}, y, s{0.1, 0.2, 0.1, 0.3, 0.2};
  for (double v : x) y.push_back(3.0 - 0.75 * v);
  const LinearFit f = weighted_linear_fit(x, y, s);
  CHECK(std::abs(f.slope + 0.75) < 1e-12);
  CHECK(std::abs(f.intercept - 3.0) < 1e-12);
  CHECK(f.chi2 == doctest::Approx(0.0).scale(1.0));

  // Normal equations with the same weights.
  double S = 0, Sx = 0, Sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double w = 1 / (s[i] * s[i]);
    S += w;
    Sx += w * x[i];
    Sxx += w * x[i] * x[i];
  }
  CHECK(f.slope_std_error == doctest::Approx(std::sqrt(S / (S * Sxx - Sx * Sx))));
  CHECK(f.intercept_std_error == doctest::Approx(std::sqrt(Sxx / (S * Sxx - Sx * Sx))));

  // Overdispersed data inflate the errors by sqrt(chi2 / dof).
  std::vector<double> y2 = y;
  y2[1] += 1.0;
  y2[3] -= 1.0;
  const LinearFit g = weighted_linear_fit(x, y2, s);
  const LinearFit h = weighted_linear_fit(x, y2, std::vector<double>(5, 0.0));
  CHECK(g.chi2 > 3.0);
  CHECK(g.slope_std_error == doctest::Approx(std::sqrt(S / (S * Sxx - Sx * Sx) * g.chi2 / 3.0)));
  CHECK(h.points == 5);
  CHECK_THROWS_AS(weighted_linear_fit({1.0}, {1.0}, {0.0}), InvalidArgument);
}

TEST_CASE("fit errors are calibrated") {
  std::mt19937_64 g(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  int inside = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<ScalePoint> pts;
    for (double d = 8; d <= 256; d *= 2) {
      const double m = 0.7 * std::pow(d, -5.0 / 24.0);
      const double se = 0.02 * m;
      pts.push_back({d, Estimate{m + se * noise(g), se, 1000, Estimate::Kind::binomial}});
    }
    const PowerLawFit f = fit_power_law(pts);
    inside += std::abs(f.slope + 5.0 / 24.0) < 2 * f.slope_std_error;
  }
  CHECK(inside >= 95);
}

TEST_CASE("power law fits recover injected exponents") {
  std::vector<ScalePoint> pts;
  for (double s : {4.0, 8.0, 16.0, 32.0}) {
    const double m = 0.3 * std::pow(s, -25.0 / 24.0);
    pts.push_back({s, Estimate{m, 0.01 * m, 1000, Estimate::Kind::binomial}});
  }
  const PowerLawFit f = fit_power_law(pts);
  CHECK(std::abs(f.slope + 25.0 / 24.0) < 1e-12);
  std::vector<ScalePoint> sq;
  for (double x : {1.0, 2.0, 5.0}) sq.push_back({x, Estimate{3 * x * x, 0.0, 1, Estimate::Kind::binomial}});
  const PowerLawFit fs = fit_power_law(sq);
  CHECK(std::abs(fs.slope - 2.0) < 1e-12);
  CHECK(std::abs(fs.intercept - std::log(3.0)) < 1e-12);
  CHECK(std::abs(f.intercept - std::log(0.3)) < 1e-12);

  // Corrections to scaling at the smallest scale get dropped.
  std::vector<ScalePoint> q;
  for (double s : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    double m = std::pow(s, -5.0 / 48.0);
    if (s == 2.0) m *= 1.5;
    q.push_back({s, Estimate{m, 1e-3 * m, 1000, Estimate::Kind::binomial}});
  }
  const StabilizedFit st = fit_power_law_stabilized(q);
  CHECK(st.dropped == 1);
  CHECK(std::abs(st.stabilized.slope + 5.0 / 48.0) < 1e-10);
  CHECK(std::abs(st.raw.slope + 5.0 / 48.0) > 0.01);
  const json j = fit_to_json(st.stabilized);
  CHECK(j.at("points") == 5);
}

TEST_CASE("mobius maps") {
  const MobiusMap id;
  CHECK(mobius_factor(id, {{1, 2}, {3, -1}}) == doctest::Approx(1.0));
  const MobiusMap dil{{2.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, {1.0, 0.0}};
  CHECK(mobius_factor(dil, {{0, 0}, {5, 5}, {-1, 2}}) == doctest::Approx(std::pow(2.0, -3 * 5.0 / 48.0)));
  const MobiusMap m{{1.0, 0.5}, {0.2, 0.0}, {0.3, -0.1}, {1.0, 0.0}};
  const std::complex<double> z{0.7, -0.4}, h{1e-6, 0.0};
  const std::complex<double> fd = (m(z + h) - m(z - h)) / (2.0 * h);
  CHECK(std::abs(fd - m.derivative(z)) < 1e-8);
  CHECK(mobius_factor(m, {{0.7, -0.4}}, 1.0) == doctest::Approx(1.0 / std::abs(m.derivative(z))));
  CHECK_THROWS_AS((MobiusMap{{1, 0}, {2, 0}, {2, 0}, {4, 0}}.validate()), InvalidArgument);
  const MobiusMap inv{{0, 0}, {1, 0}, {1, 0}, {0, 0}};
  CHECK(mobius_factor(inv, {{0.0, 2.5}}) == doctest::Approx(std::pow(2.5, 2 * 5.0 / 48.0)));
  CHECK_THROWS_AS(mobius_factor(inv, {{0, 0}}), InvalidArgument);
}

TEST_CASE("rationals") {
  const Rational r = Rational::reduced(12, 64);
  CHECK(r.num == 3);
  CHECK(r.den == 16);
  CHECK(r.str() == "3/16");
  CHECK(r.value() == 0.1875);
  CHECK(Rational::reduced(0, 5) == Rational::reduced(0, 7));
  CHECK_THROWS_AS(Rational::reduced(1, 0), InvalidArgument);
}

TEST_CASE("triangle snapping") {
  const RegionPtr reg = LatticeRegion::box(40);
  for (double d : {4.0, 8.0, 13.0, 32.0}) {
    const Triangle t = snap_triangle(*reg, {0, 0}, d);
    CHECK(t.snap_error <= 1.0 / std::sqrt(3.0) + 1e-12);
    for (double s : t.sides) CHECK(std::abs(s - d) <= 2 * t.snap_error + 1e-12);
  }
  CHECK(snap_triangle(*reg, {0, 0}, 8.0).snap_error == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(snap_triangle(*reg, {0, 0}, 0.3), InvalidArgument);
}

TEST_CASE("ratio estimate is consistent with its parts") {
  const RegionPtr reg = LatticeRegion::box(20);
  const RatioResult r = estimate_ratio_R(4.0, reg, 2000, 8, 2);
  CHECK(r.ratio.mean == doctest::Approx(r.p123.mean / std::sqrt(r.p12.mean * r.p13.mean * r.p23.mean)));
  CHECK(r.p123.mean <= std::min({r.p12.mean, r.p13.mean, r.p23.mean}));
  CHECK(r.ratio.std_error > 0.0);
}

TEST_CASE("symmetries of connection probabilities") {
  const RegionPtr reg = LatticeRegion::box(40);
  const RatioResult a = estimate_ratio_R(6.0, reg, 4000, 31, 1, {-8.0, -6.0});
  const RatioResult b = estimate_ratio_R(6.0, reg, 4000, 32, 1, {4.0, 2.0});
  CHECK(std::abs(a.ratio.mean - b.ratio.mean) < 3 * std::hypot(a.ratio.std_error, b.ratio.std_error));

  const auto conn = [](SiteCoord x) {
    return EventSpec::from_json({{"event", "connection"}, {"points", {{0, 0}, {x.q, x.r}}}});
  };
  // (4,4) sits at 30 degrees with length 6.93, close enough to 7 at this precision.
  const Estimate e0 = estimate_event(conn({7, 0}), reg, 4000, 40, 1);
  const Estimate e30 = estimate_event(conn({4, 4}), reg, 4000, 41, 1);
  CHECK(std::abs(e0.mean - e30.mean) < 3 * std::hypot(e0.std_error, e30.std_error));

  // Boundary suppression: the same pair in a small disk is less likely connected,
  // and the disk value increases with the domain.
  const EventSpec pair = conn({4, 0});
  const Estimate d6 = estimate_event(pair, region_from_json({{"shape", "disk"}, {"radius", 6}}), 20000, 43, 1);
  const Estimate d12 = estimate_event(pair, region_from_json({{"shape", "disk"}, {"radius", 12}}), 20000, 44, 1);
  const Estimate d40 = estimate_event(pair, reg, 20000, 45, 1);
  CHECK(d6.mean < d12.mean);
  CHECK(d12.mean < d40.mean + 3 * d40.std_error);
}

TEST_CASE("four-point rows against BFS clusters") {
  const RegionPtr reg = LatticeRegion::box(24);
  const SiteCoord x3{-8, 8}, x4{0, -8};
  const FourPointResult res = four_point_residual_experiment({1, 2, 4}, x3, x4, reg, 600, 23, 2);
  REQUIRE(res.rows.size() == 3);
  for (const FourPointRow& row : res.rows) {
    const auto s = static_cast<int32_t>(row.separation);
    const std::vector<SiteCoord> p{{0, 0}, {s, 0}, x3, x4};
    double c4 = 0, resid = 0, p12 = 0, p34 = 0;
    for (uint64_t rep = 0; rep < 600; ++rep) {
      const Configuration c = sample(reg, 23, rep);
      const std::vector<int> comp = testing::bfs_components(c);
      std::vector<int> id;
      for (const SiteCoord& x : p) id.push_back(comp[static_cast<size_t>(reg->index_of(x))]);
      const auto j = [&](int a, int b) { return id[a] >= 0 && id[a] == id[b]; };
      const bool even = j(0, 1) ? (j(2, 3)) : ((j(0, 2) && j(1, 3)) || (j(0, 3) && j(1, 2)));
      c4 += even;
      resid += !j(0, 1) && ((j(0, 2) && j(1, 3)) || (j(0, 3) && j(1, 2)));
      p12 += j(0, 1);
      p34 += j(2, 3);
    }
    c4 /= 600;
    resid /= 600;
    p12 /= 600;
    p34 /= 600;
    CHECK(row.c4_partition.mean == doctest::Approx(c4));
    CHECK(row.residual.mean == doctest::Approx(resid));
    CHECK(row.product_residual.mean == doctest::Approx(c4 - p12 * p34));
    CHECK(std::abs(row.c4_direct.mean - row.c4_partition.mean) < 5 * row.c4_direct.std_error + 1e-12);
  }
}

TEST_CASE("exact coupling identity on the flower") {
  const RegionPtr fl = testing::flower();
  const auto ring = [](const Configuration& c) { return c.open_at({2, 0}) && c.open_at({-2, 2}); };
  const CouplingExactReport rep = coupling_exact_check(fl, 0.8, 1.1, 2.0, ring);
  CHECK(rep.holds());
  CHECK(rep.circuits > 0);
  CHECK_THROWS_AS(coupling_exact_check(fl, 0.8, 1.1, 1.0, ring), InvalidArgument);
}

TEST_CASE("normal p-values") {
  CHECK(two_sided_normal_p(0.0) == doctest::Approx(1.0));
  CHECK(two_sided_normal_p(1.959963984540054) == doctest::Approx(0.05));
  CHECK(two_sided_normal_p(-3.0) == doctest::Approx(0.0026997960632601866));
}
