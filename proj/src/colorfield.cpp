#include "percolab/colorfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "percolab/error.hpp"

namespace percolab {

namespace {

size_t checked_index(const LatticeRegion& reg, SiteCoord s) {
  const int64_t i = reg.index_of(s);
  if (i < 0) throw InvalidArgument("site outside the region");
  return static_cast<size_t>(i);
}

void check_distinct(const std::vector<SiteCoord>& points) {
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j)
      if (points[i] == points[j]) throw InvalidArgument("duplicate marked point");
}

// Visits the region sites whose centers lie in the closed square.
template <class Fn>
void for_sites_in_square(const LatticeRegion& reg, Point c, double h, Fn&& fn) {
  const double a = reg.spacing();
  const double dy = 0.5 * kSqrt3 * a;
  const Point rc = reg.center();
  const auto r0 = std::max(reg.row_min(), static_cast<int32_t>(std::ceil((c.y - h - rc.y) / dy - 1e-9)));
  const auto r1 = std::min(reg.row_max(), static_cast<int32_t>(std::floor((c.y + h - rc.y) / dy + 1e-9)));
  for (int32_t r = r0; r <= r1; ++r) {
    const auto& row = reg.rows()[static_cast<size_t>(r - reg.row_min())];
    const double y = rc.y + dy * r;
    if (std::abs(y - c.y) > h + 1e-9) continue;
    const double off = rc.x + 0.5 * a * r;
    const auto q0 = std::max(row.q_lo, static_cast<int32_t>(std::ceil((c.x - h - off) / a - 1e-9)));
    const auto q1 = std::min(row.q_hi, static_cast<int32_t>(std::floor((c.x + h - off) / a + 1e-9)));
    for (int32_t q = q0; q <= q1; ++q) {
      const double x = off + a * q;
      if (std::abs(x - c.x) > h + 1e-9) continue;
      fn(row.offset + static_cast<size_t>(q - row.q_lo), Point{x, y});
    }
  }
}

// Every lattice site in the closed square must belong to the region.
void check_square(const LatticeRegion& reg, Point c, double h) {
  const double a = reg.spacing();
  const double dy = 0.5 * kSqrt3 * a;
  const Point rc = reg.center();
  const auto r0 = static_cast<int32_t>(std::ceil((c.y - h - rc.y) / dy - 1e-9));
  const auto r1 = static_cast<int32_t>(std::floor((c.y + h - rc.y) / dy + 1e-9));
  bool ok = r0 >= reg.row_min() && r1 <= reg.row_max();
  for (int32_t r = std::max(r0, reg.row_min()); ok && r <= std::min(r1, reg.row_max()); ++r) {
    const auto& row = reg.rows()[static_cast<size_t>(r - reg.row_min())];
    const double off = rc.x + 0.5 * a * r;
    const auto q0 = static_cast<int32_t>(std::ceil((c.x - h - off) / a - 1e-9));
    const auto q1 = static_cast<int32_t>(std::floor((c.x + h - off) / a + 1e-9));
    ok = q0 >= row.q_lo && q1 <= row.q_hi;
  }
  if (!ok) throw GeometryError("square of half-width " + std::to_string(h) + " exceeds the region");
}

// sin(k t) for k = 1..K by the Chebyshev recurrence.
void sines(double t, size_t K, double* out) {
  const double c2 = 2.0 * std::cos(t);
  double prev = 0.0;
  double cur = std::sin(t);
  for (size_t k = 0; k < K; ++k) {
    out[k] = cur;
    const double next = c2 * cur - prev;
    prev = cur;
    cur = next;
  }
}

}  // namespace

SignAssignment SignAssignment::flipped(size_t cluster) const {
  std::vector<int8_t> s = signs_;
  s.at(cluster) = static_cast<int8_t>(-s.at(cluster));
  return SignAssignment(std::move(s));
}

SignAssignment assign_signs(const ClusterLabels& labels, uint64_t seed, uint64_t replica,
                            rng::Stream stream) {
  const rng::Key key = rng::make_key(seed, stream);
  std::vector<int8_t> s(labels.cluster_count());
  for (size_t c = 0; c < s.size(); ++c) {
    const size_t root = labels.info(c).root;
    const uint64_t w = rng::word64(key, root >> 6, replica);
    s[c] = ((w >> (root & 63)) & 1u) ? 1 : -1;
  }
  return SignAssignment(std::move(s));
}

int spin_value(const ClusterLabels& labels, const SignAssignment& signs, SiteCoord x) {
  const int32_t c = labels.cluster_id(checked_index(labels.region(), x));
  return c < 0 ? 0 : signs.sign(static_cast<size_t>(c));
}

int correlation_partition(const ClusterLabels& labels, const std::vector<SiteCoord>& points) {
  check_distinct(points);
  std::vector<int32_t> ids;
  for (const SiteCoord& p : points) {
    const int32_t c = labels.cluster_id(checked_index(labels.region(), p));
    if (c < 0) return 0;
    ids.push_back(c);
  }
  std::sort(ids.begin(), ids.end());
  for (size_t i = 0; i < ids.size();) {
    size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    if ((j - i) % 2 != 0) return 0;
    i = j;
  }
  return 1;
}

int correlation_direct(const ClusterLabels& labels, const SignAssignment& signs,
                       const std::vector<SiteCoord>& points) {
  check_distinct(points);
  int prod = 1;
  for (const SiteCoord& p : points) prod *= spin_value(labels, signs, p);
  return prod;
}

int spin_value_both(const ClusterLabels& open, const ClusterLabels& closed,
                    const SignAssignment& open_signs, const SignAssignment& closed_signs,
                    SiteCoord x) {
  const size_t i = checked_index(open.region(), x);
  const int32_t c = open.cluster_id(i);
  if (c >= 0) return open_signs.sign(static_cast<size_t>(c));
  return closed_signs.sign(static_cast<size_t>(closed.cluster_id(i)));
}

int correlation_partition_both(const ClusterLabels& open, const ClusterLabels& closed,
                               const std::vector<SiteCoord>& points) {
  check_distinct(points);
  std::vector<int64_t> ids;
  const auto nopen = static_cast<int64_t>(open.cluster_count());
  for (const SiteCoord& p : points) {
    const size_t i = checked_index(open.region(), p);
    const int32_t c = open.cluster_id(i);
    ids.push_back(c >= 0 ? c : nopen + closed.cluster_id(i));
  }
  std::sort(ids.begin(), ids.end());
  for (size_t i = 0; i < ids.size();) {
    size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    if ((j - i) % 2 != 0) return 0;
    i = j;
  }
  return 1;
}

double field_functional(const ClusterLabels& labels, const SignAssignment& signs,
                        const TestFunction& f, double pi_norm) {
  if (!(pi_norm > 0.0)) throw InvalidArgument("pi_norm must be positive");
  const LatticeRegion& reg = labels.region();
  check_square(reg, f.center, f.half_width);
  std::vector<double> terms;
  for_sites_in_square(reg, f.center, f.half_width, [&](size_t i, Point p) {
    const int32_t c = labels.cluster_id(i);
    if (c >= 0) terms.push_back(f.f(p) * signs.sign(static_cast<size_t>(c)));
  });
  const double a = reg.spacing();
  return a * a / pi_norm * pairwise_sum(terms);
}

double field_functional_by_clusters(const ClusterLabels& labels, const SignAssignment& signs,
                                    const TestFunction& f, double pi_norm) {
  const LatticeRegion& reg = labels.region();
  check_square(reg, f.center, f.half_width);
  std::vector<uint8_t> touched(labels.cluster_count(), 0);
  for_sites_in_square(reg, f.center, f.half_width, [&](size_t i, Point) {
    const int32_t c = labels.cluster_id(i);
    if (c >= 0) touched[static_cast<size_t>(c)] = 1;
  });
  const auto inside = [&](Point p) {
    return std::abs(p.x - f.center.x) <= f.half_width + 1e-9 &&
           std::abs(p.y - f.center.y) <= f.half_width + 1e-9;
  };
  std::vector<double> terms;
  for (size_t c = 0; c < touched.size(); ++c) {
    if (!touched[c]) continue;
    const ClusterMeasure mu = cluster_measure(labels, c, pi_norm);
    terms.push_back(signs.sign(c) * mu.integrate([&](Point p) { return inside(p) ? f.f(p) : 0.0; }));
  }
  return pairwise_sum(terms);
}

std::vector<double> box_square_mass(const ClusterLabels& labels, Point center,
                                    const std::vector<double>& half_widths) {
  const LatticeRegion& reg = labels.region();
  std::vector<uint64_t> count(labels.cluster_count(), 0);
  std::vector<size_t> touched;
  std::vector<double> out;
  for (double h : half_widths) {
    check_square(reg, center, h);
    touched.clear();
    for_sites_in_square(reg, center, h, [&](size_t i, Point) {
      const int32_t c = labels.cluster_id(i);
      if (c < 0) return;
      if (count[static_cast<size_t>(c)]++ == 0) touched.push_back(static_cast<size_t>(c));
    });
    uint64_t s = 0;
    for (size_t c : touched) {
      s += count[c] * count[c];
      count[c] = 0;
    }
    out.push_back(static_cast<double>(s));
  }
  return out;
}

Eigenbasis::Eigenbasis(double n, size_t K, Point center) : n_(n), K_(K), center_(center) {
  if (!(n > 0.0)) throw InvalidArgument("basis half-width must be positive");
  if (K == 0) throw InvalidArgument("basis cutoff must be at least 1");
}

double Eigenbasis::lambda(size_t i, size_t j) const {
  return std::numbers::pi * std::numbers::pi / (4.0 * n_ * n_) * static_cast<double>(i * i + j * j);
}

double Eigenbasis::u(size_t i, size_t j, Point p) const {
  if (!contains(p)) return 0.0;
  const double xi = p.x - center_.x;
  const double zeta = p.y - center_.y;
  const double w = std::numbers::pi / (2.0 * n_);
  return std::sin(w * static_cast<double>(i) * (xi + n_)) *
         std::sin(w * static_cast<double>(j) * (zeta + n_)) / n_;
}

bool Eigenbasis::contains(Point p) const {
  return std::abs(p.x - center_.x) <= n_ + 1e-9 && std::abs(p.y - center_.y) <= n_ + 1e-9;
}

FieldCoefficients& FieldCoefficients::operator+=(const FieldCoefficients& o) {
  if (o.K != K) throw InvalidArgument("coefficient sizes differ");
  for (size_t k = 0; k < a.size(); ++k) a[k] += o.a[k];
  return *this;
}

FieldCoefficients FieldCoefficients::truncated(size_t k) const {
  if (k > K) throw InvalidArgument("cannot truncate to a larger size");
  FieldCoefficients out{k, std::vector<double>(k * k), cutoff, replica};
  for (size_t i = 1; i <= k; ++i)
    for (size_t j = 1; j <= k; ++j) out.at(i, j) = at(i, j);
  return out;
}

std::vector<FieldCoefficients> binned_coefficients(const ClusterLabels& labels,
                                                   const SignAssignment& signs,
                                                   const Eigenbasis& basis, double pi_norm,
                                                   const std::vector<double>& edges) {
  if (!(pi_norm > 0.0)) throw InvalidArgument("pi_norm must be positive");
  if (!std::is_sorted(edges.begin(), edges.end())) throw InvalidArgument("bin edges must be sorted");
  const LatticeRegion& reg = labels.region();
  const double n = basis.n();
  check_square(reg, basis.center(), n);
  const size_t K = basis.K();
  const size_t nb = edges.size() + 1;

  // Bin of each cluster meeting the square.
  std::vector<int32_t> bin(labels.cluster_count(), -1);
  for_sites_in_square(reg, basis.center(), n, [&](size_t i, Point) {
    const int32_t c = labels.cluster_id(i);
    if (c >= 0) bin[static_cast<size_t>(c)] = 0;
  });
  if (!edges.empty()) {
    for (size_t c = 0; c < bin.size(); ++c) {
      if (bin[c] < 0) continue;
      const double d = labels.diameter(c);
      bin[c] = static_cast<int32_t>(std::lower_bound(edges.begin(), edges.end(), d) - edges.begin());
    }
  }

  std::vector<FieldCoefficients> out(nb, FieldCoefficients{K, std::vector<double>(K * K, 0.0), {}, 0});
  const double a = reg.spacing();
  const double w = a * a / pi_norm / n;
  const double theta = std::numbers::pi / (2.0 * n);
  std::vector<double> row_sum(nb * K);
  std::vector<uint8_t> row_used(nb);
  std::vector<double> sx(K), sy(K);
  int32_t current_row = std::numeric_limits<int32_t>::min();
  double current_y = 0.0;
  const auto flush = [&]() {
    if (current_row == std::numeric_limits<int32_t>::min()) return;
    sines(theta * (current_y - basis.center().y + n), K, sy.data());
    for (size_t b = 0; b < nb; ++b) {
      if (!row_used[b]) continue;
      double* A = out[b].a.data();
      const double* R = row_sum.data() + b * K;
      for (size_t i = 0; i < K; ++i) {
        const double ri = w * R[i];
        for (size_t j = 0; j < K; ++j) A[i * K + j] += ri * sy[j];
      }
    }
  };
  for_sites_in_square(reg, basis.center(), n, [&](size_t i, Point p) {
    const int32_t row = reg.site(i).r;
    if (row != current_row) {
      flush();
      current_row = row;
      current_y = p.y;
      std::fill(row_sum.begin(), row_sum.end(), 0.0);
      std::fill(row_used.begin(), row_used.end(), 0);
    }
    const int32_t c = labels.cluster_id(i);
    if (c < 0) return;
    const auto b = static_cast<size_t>(bin[static_cast<size_t>(c)]);
    const double s = signs.sign(static_cast<size_t>(c));
    sines(theta * (p.x - basis.center().x + n), K, sx.data());
    double* R = row_sum.data() + b * K;
    for (size_t k = 0; k < K; ++k) R[k] += s * sx[k];
    row_used[b] = 1;
  });
  flush();
  return out;
}

FieldCoefficients smoothed_coefficients(const ClusterLabels& labels, const SignAssignment& signs,
                                        const Eigenbasis& basis, double pi_norm,
                                        std::optional<double> cutoff) {
  if (cutoff && *cutoff < 0.0) throw InvalidArgument("cutoff must be nonnegative");
  if (!cutoff || *cutoff == 0.0) {
    FieldCoefficients c = binned_coefficients(labels, signs, basis, pi_norm, {}).front();
    c.cutoff = cutoff;
    return c;
  }
  std::vector<FieldCoefficients> bins = binned_coefficients(labels, signs, basis, pi_norm, {*cutoff});
  FieldCoefficients c = std::move(bins[1]);
  c.cutoff = cutoff;
  return c;
}

double hminus_norm(const FieldCoefficients& coeffs, const Eigenbasis& basis, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (coeffs.K > basis.K()) throw InvalidArgument("coefficients exceed the basis cutoff");
  std::vector<double> terms(coeffs.K * coeffs.K);
  for (size_t i = 1; i <= coeffs.K; ++i)
    for (size_t j = 1; j <= coeffs.K; ++j) {
      const double v = coeffs.at(i, j);
      terms[(i - 1) * coeffs.K + (j - 1)] = std::pow(basis.lambda(i, j), -2.0 * alpha) * v * v;
    }
  return pairwise_sum(terms);
}

void write_coefficients_csv(std::ostream& out, const FieldCoefficients& coeffs,
                            const Eigenbasis& basis) {
  out << "i,j,lambda,a_ij\n";
  out.precision(17);
  for (size_t i = 1; i <= coeffs.K; ++i)
    for (size_t j = 1; j <= coeffs.K; ++j)
      out << i << ',' << j << ',' << basis.lambda(i, j) << ',' << coeffs.at(i, j) << '\n';
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

}  // namespace percolab
