#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "percolab/colorfield.hpp"
#include "percolab/error.hpp"
#include "support.hpp"

using namespace percolab;

namespace {

// Sign average of the direct estimator over every assignment of the
// clusters that hold one of the points.
double exact_sign_average(const ClusterLabels& l, const std::vector<SiteCoord>& pts) {
  std::vector<size_t> cl;
  for (const SiteCoord& p : pts) {
    const int32_t c = l.cluster_id_at(p);
    if (c >= 0 && std::find(cl.begin(), cl.end(), static_cast<size_t>(c)) == cl.end())
      cl.push_back(static_cast<size_t>(c));
  }
  double total = 0.0;
  for (uint32_t m = 0; m < (1u << cl.size()); ++m) {
    std::vector<int8_t> s(l.cluster_count(), 1);
    for (size_t k = 0; k < cl.size(); ++k)
      if ((m >> k) & 1) s[cl[k]] = -1;
    total += correlation_direct(l, SignAssignment(s), pts);
  }
  return total / (1u << cl.size());
}

}  // namespace

TEST_CASE("signs are per cluster, deterministic and fair") {
  const RegionPtr reg = LatticeRegion::box(16);
  uint64_t plus = 0, total = 0;
  for (uint64_t rep = 0; rep < 50; ++rep) {
    const Configuration c = sample(reg, 3, rep);
    const ClusterLabels l = label(c);
    const SignAssignment s = assign_signs(l, 3, rep);
    REQUIRE(s.size() == l.cluster_count());
    CHECK(assign_signs(l, 3, rep).signs() == s.signs());
    for (size_t i = 0; i < reg->size(); ++i) {
      const SiteCoord x = reg->site(i);
      const int v = spin_value(l, s, x);
      if (!c.open(i)) {
        CHECK(v == 0);
        continue;
      }
      CHECK(v == s.sign(static_cast<size_t>(l.cluster_id(i))));
    }
    for (int8_t v : s.signs()) {
      CHECK((v == 1 || v == -1));
      plus += v == 1;
      ++total;
    }
    if (s.size() > 0) CHECK(s.flipped(0).sign(0) == -s.sign(0));
  }
  const double f = static_cast<double>(plus) / static_cast<double>(total);
  CHECK(std::abs(f - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(total)));
}

TEST_CASE("partition correlation is the sign average") {
  const RegionPtr reg = LatticeRegion::box(10);
  const std::vector<std::vector<SiteCoord>> sets{
      {{0, 0}, {2, 0}}, {{0, 0}, {1, 1}, {-2, 1}, {3, -2}}, {{0, 0}, {1, 0}, {0, 1}}};
  for (uint64_t rep = 0; rep < 40; ++rep) {
    const Configuration c = sample(reg, 9, rep);
    const ClusterLabels l = label(c), cl = label_closed(c);
    for (const auto& pts : sets) {
      CHECK(correlation_partition(l, pts) == exact_sign_average(l, pts));
      // With signs on both colors every site is occupied.
      int even = 1;
      std::map<std::pair<int, int32_t>, int> cnt;
      for (const SiteCoord& p : pts) {
        const int32_t o = l.cluster_id_at(p);
        cnt[o >= 0 ? std::make_pair(0, o) : std::make_pair(1, cl.cluster_id_at(p))]++;
      }
      for (const auto& [k, n] : cnt) even = even && (n % 2 == 0);
      CHECK(correlation_partition_both(l, cl, pts) == even);
    }
    const SignAssignment so = assign_signs(l, 9, rep), sc = assign_signs(cl, 9, rep, rng::Stream::aux);
    for (size_t i = 0; i < reg->size(); ++i) CHECK(spin_value_both(l, cl, so, sc, reg->site(i)) != 0);
  }
}

TEST_CASE("field functional site sum equals cluster sum") {
  const RegionPtr reg = LatticeRegion::box(30, 0.5);
  const TestFunction f{[](Point p) { return std::exp(-(p.x * p.x + 2 * p.y * p.y) / 20.0) + 0.3 * p.x; },
                       {1.0, -0.5}, 9.0};
  for (uint64_t rep = 0; rep < 10; ++rep) {
    const ClusterLabels l = label(sample(reg, 4, rep));
    const SignAssignment s = assign_signs(l, 4, rep);
    CHECK(field_functional(l, s, f, 0.7) == doctest::Approx(field_functional_by_clusters(l, s, f, 0.7)).epsilon(1e-10));
  }
  const ClusterLabels l = label(sample(reg, 4, 0));
  CHECK_THROWS_AS(field_functional(l, assign_signs(l, 4, 0), f, 0.0), InvalidArgument);
}

TEST_CASE("box square mass against BFS clusters") {
  const RegionPtr reg = LatticeRegion::box(20);
  const std::vector<double> hw{2.0, 5.0, 9.5};
  for (uint64_t rep = 0; rep < 15; ++rep) {
    const Configuration c = sample(reg, 12, rep);
    const std::vector<int> comp = testing::bfs_components(c);
    const std::vector<double> got = box_square_mass(label(c), {0, 0}, hw);
    for (size_t k = 0; k < hw.size(); ++k) {
      std::map<int, double> count;
      for (size_t i = 0; i < reg->size(); ++i) {
        const Point p = reg->embed_index(i);
        if (comp[i] >= 0 && std::abs(p.x) <= hw[k] + 1e-9 && std::abs(p.y) <= hw[k] + 1e-9) count[comp[i]] += 1;
      }
      double want = 0.0;
      for (const auto& [id, n] : count) want += n * n;
      CHECK(got[k] == doctest::Approx(want));
    }
  }
}

TEST_CASE("eigenbasis") {
  const double n = 3.0;
  const Eigenbasis b(n, 4, {0.5, 0.5});
  CHECK(b.lambda(1, 1) == doctest::Approx(2 * std::numbers::pi * std::numbers::pi / (4 * n * n)));
  CHECK(b.lambda(2, 3) == doctest::Approx(13 * std::numbers::pi * std::numbers::pi / (4 * n * n)));
  // Midpoint quadrature of u_ij u_kl over the square.
  const int m = 300;
  const double h = 2 * n / m;
  for (auto [i, j, k, l] : std::vector<std::array<size_t, 4>>{{1, 1, 1, 1}, {2, 3, 2, 3}, {1, 2, 2, 1}, {4, 4, 3, 4}}) {
    double s = 0.0;
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c) {
        const Point p{0.5 - n + (a + 0.5) * h, 0.5 - n + (c + 0.5) * h};
        s += b.u(i, j, p) * b.u(k, l, p) * h * h;
      }
    CHECK(s == doctest::Approx((i == k && j == l) ? 1.0 : 0.0).epsilon(1e-6).scale(1.0));
  }
  CHECK(b.u(1, 1, {0.5 + n, 0.5}) == doctest::Approx(0.0));
  CHECK_FALSE(b.contains({0.5 + n + 0.1, 0.5}));
}

TEST_CASE("coefficients are lattice sums against the eigenfunctions") {
  const RegionPtr reg = LatticeRegion::box(26, 0.8);
  const Eigenbasis basis(7.0, 3, {0.2, 0.1});
  const double pi_norm = 0.37;
  for (uint64_t rep = 0; rep < 5; ++rep) {
    const ClusterLabels l = label(sample(reg, 21, rep));
    const SignAssignment s = assign_signs(l, 21, rep);
    const FieldCoefficients fc = smoothed_coefficients(l, s, basis, pi_norm);
    for (size_t i = 1; i <= 3; ++i)
      for (size_t j = 1; j <= 3; ++j) {
        const double nn = 7.0;
        const TestFunction f{[&](Point p) {
                               return std::sin(i * std::numbers::pi * (p.x - 0.2 + nn) / (2 * nn)) *
                                      std::sin(j * std::numbers::pi * (p.y - 0.1 + nn) / (2 * nn)) / nn;
                             },
                             {0.2, 0.1}, nn};
        CHECK(fc.at(i, j) == doctest::Approx(field_functional(l, s, f, pi_norm)).epsilon(1e-9).scale(1.0));
      }
    // Diameter bins partition the clusters.
    const std::vector<FieldCoefficients> bins = binned_coefficients(l, s, basis, pi_norm, {2.0, 5.0});
    FieldCoefficients sum = bins[0];
    sum += bins[1];
    sum += bins[2];
    for (size_t k = 0; k < fc.a.size(); ++k) CHECK(sum.a[k] == doctest::Approx(fc.a[k]).scale(1.0));
    const FieldCoefficients cut = smoothed_coefficients(l, s, basis, pi_norm, 5.0);
    for (size_t k = 0; k < fc.a.size(); ++k) CHECK(cut.a[k] == doctest::Approx(bins[2].a[k]).scale(1.0));
    const FieldCoefficients zero = smoothed_coefficients(l, s, basis, pi_norm, 0.0);
    CHECK(zero.a == fc.a);

    double h = 0.0;
    for (size_t i = 1; i <= 3; ++i)
      for (size_t j = 1; j <= 3; ++j) h += std::pow(basis.lambda(i, j), -1.0) * fc.at(i, j) * fc.at(i, j);
    CHECK(hminus_norm(fc, basis, 0.5) == doctest::Approx(h));
    const FieldCoefficients t = fc.truncated(2);
    CHECK(t.K == 2);
    CHECK(t.at(2, 2) == fc.at(2, 2));
  }
}

TEST_CASE("coefficient csv and pairwise sum") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0));
  const Eigenbasis b(2.0, 2);
  FieldCoefficients c{2, {1, 2, 3, 4}, {}, 0};
  std::ostringstream os;
  write_coefficients_csv(os, c, b);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  std::getline(is, line);
  CHECK(line == "i,j,lambda,a_ij");
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4);
}
