#include "percolab/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "percolab/error.hpp"

namespace percolab {

namespace {

constexpr double kEps = 1e-9;

// Hexagon vertex offsets for unit spacing: angles 30 + 60k degrees at
// distance 1/sqrt(3).
const std::array<Point, 6>& unit_hex_vertices() {
  static const std::array<Point, 6> v = [] {
    std::array<Point, 6> out{};
    for (int k = 0; k < 6; ++k) {
      const double ang = (30.0 + 60.0 * k) * M_PI / 180.0;
      out[k] = {std::cos(ang) / kSqrt3, std::sin(ang) / kSqrt3};
    }
    return out;
  }();
  return v;
}

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const Point ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

}  // namespace

double norm(Point p) { return std::hypot(p.x, p.y); }
double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::array<SiteCoord, 6> neighbors(SiteCoord s) {
  std::array<SiteCoord, 6> out{};
  for (size_t k = 0; k < 6; ++k) out[k] = s + kDirections[k];
  return out;
}

bool Domain::contains(Point p) const {
  const Point d = p - center;
  if (shape == Shape::box)
    return std::abs(d.x) <= half_extent + kEps && std::abs(d.y) <= half_extent + kEps;
  return d.x * d.x + d.y * d.y <= half_extent * half_extent + kEps;
}

bool DomainMask::forces_closed(Point p) const {
  if (domain && !domain->contains(p)) return true;
  for (const Disk& h : holes)
    if (distance(p, h.center) <= h.radius + kEps) return true;
  return false;
}

Point embed(SiteCoord s, double spacing, Point center) {
  return {center.x + spacing * (s.q + 0.5 * s.r), center.y + spacing * (0.5 * kSqrt3 * s.r)};
}

Point embed(SiteCoord s, const LatticeRegion& region) {
  return embed(s, region.spacing(), region.center());
}

LatticeRegion::LatticeRegion(RegionShape shape, int32_t extent, double spacing, Point center,
                             DomainMask mask)
    : shape_(shape), extent_(extent), spacing_(spacing), center_(center), mask_(std::move(mask)) {
  if (!(spacing > 0.0)) throw InvalidArgument("lattice spacing must be positive");
  if (extent < 1) throw InvalidArgument("region extent must be at least one site");
  for (const Disk& h : mask_.holes)
    if (!(h.radius >= 0.0)) throw InvalidArgument("hole radius must be nonnegative");
  build_rows();
  build_mask();
}

std::shared_ptr<const LatticeRegion> LatticeRegion::box(int32_t half_width, double spacing,
                                                        Point center, DomainMask mask) {
  return std::make_shared<const LatticeRegion>(RegionShape::box, half_width, spacing, center,
                                               std::move(mask));
}

std::shared_ptr<const LatticeRegion> LatticeRegion::disk(int32_t radius, double spacing,
                                                         Point center, DomainMask mask) {
  return std::make_shared<const LatticeRegion>(RegionShape::disk, radius, spacing, center,
                                               std::move(mask));
}

std::shared_ptr<const LatticeRegion> LatticeRegion::rhombus(int32_t side, double spacing,
                                                            Point center, DomainMask mask) {
  return std::make_shared<const LatticeRegion>(RegionShape::rhombus, side, spacing, center,
                                               std::move(mask));
}

void LatticeRegion::build_rows() {
  const double h = extent_;
  int32_t rlo = 0;
  int32_t rhi = 0;
  switch (shape_) {
    case RegionShape::box: {
      const auto rm = static_cast<int32_t>(std::floor(2.0 * h / kSqrt3 + kEps));
      rlo = -rm;
      rhi = rm;
      break;
    }
    case RegionShape::disk: {
      const auto rm = static_cast<int32_t>(std::floor(2.0 * h / kSqrt3 + kEps));
      rlo = -rm;
      rhi = rm;
      break;
    }
    case RegionShape::rhombus:
      rlo = 0;
      rhi = extent_ - 1;
      break;
  }
  row_min_ = rlo;
  rows_.clear();
  size_t offset = 0;
  for (int32_t r = rlo; r <= rhi; ++r) {
    Row row;
    row.offset = offset;
    switch (shape_) {
      case RegionShape::box:
        row.q_lo = static_cast<int32_t>(std::ceil(-h - 0.5 * r - kEps));
        row.q_hi = static_cast<int32_t>(std::floor(h - 0.5 * r + kEps));
        break;
      case RegionShape::disk: {
        const double y = 0.5 * kSqrt3 * r;
        const double w2 = h * h - y * y;
        const double w = w2 > 0 ? std::sqrt(w2) : 0.0;
        row.q_lo = static_cast<int32_t>(std::ceil(-w - 0.5 * r - kEps));
        row.q_hi = static_cast<int32_t>(std::floor(w - 0.5 * r + kEps));
        break;
      }
      case RegionShape::rhombus:
        row.q_lo = 0;
        row.q_hi = extent_ - 1;
        break;
    }
    if (row.q_hi >= row.q_lo) offset += static_cast<size_t>(row.q_hi - row.q_lo + 1);
    rows_.push_back(row);
  }
  size_ = offset;
}

void LatticeRegion::build_mask() {
  unmasked_ = size_;
  masked_.clear();
  if (mask_.empty()) return;
  masked_.assign(word_count(), 0);
  unmasked_ = 0;
  for (size_t i = 0; i < size_; ++i) {
    if (mask_.forces_closed(embed_index(i)))
      masked_[i >> 6] |= uint64_t{1} << (i & 63);
    else
      ++unmasked_;
  }
}

SiteCoord LatticeRegion::site(size_t index) const {
  // Rows are stored by increasing offset; find the last row whose offset <= index.
  auto it = std::upper_bound(rows_.begin(), rows_.end(), index,
                             [](size_t idx, const Row& row) { return idx < row.offset; });
  // Skip back over empty rows that share the same offset.
  --it;
  while (it->q_hi < it->q_lo) --it;
  const auto row = static_cast<int32_t>(it - rows_.begin());
  return {it->q_lo + static_cast<int32_t>(index - it->offset), row_min_ + row};
}

Point LatticeRegion::embed(SiteCoord s) const { return percolab::embed(s, spacing_, center_); }

double LatticeRegion::hex_max_distance(SiteCoord s, Point p) const {
  const Point c = embed(s);
  double best = 0.0;
  for (const Point& v : unit_hex_vertices()) best = std::max(best, distance(p, c + spacing_ * v));
  return best;
}

double LatticeRegion::hex_min_distance(SiteCoord s, Point p) const {
  const Point c = embed(s);
  const Point d = p - c;
  // Inside test against the three pairs of parallel edges.
  bool inside = true;
  for (int k = 0; k < 3; ++k) {
    const double ang = k * M_PI / 3.0;
    if (std::abs(d.x * std::cos(ang) + d.y * std::sin(ang)) > 0.5 * spacing_ + 1e-12) {
      inside = false;
      break;
    }
  }
  if (inside) return 0.0;
  const auto& v = unit_hex_vertices();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 6; ++k) {
    const Point a = c + spacing_ * v[k];
    const Point b = c + spacing_ * v[(k + 1) % 6];
    best = std::min(best, segment_distance(p, a, b));
  }
  return best;
}

std::vector<size_t> LatticeRegion::sites_within(Point p, double radius) const {
  std::vector<size_t> out;
  const double a = spacing_;
  const double ylo = (p.y - center_.y - radius) / (0.5 * kSqrt3 * a);
  const double yhi = (p.y - center_.y + radius) / (0.5 * kSqrt3 * a);
  const int32_t r0 = std::max(row_min(), static_cast<int32_t>(std::floor(ylo)) - 1);
  const int32_t r1 = std::min(row_max(), static_cast<int32_t>(std::ceil(yhi)) + 1);
  for (int32_t r = r0; r <= r1; ++r) {
    const Row& row = rows_[static_cast<size_t>(r - row_min_)];
    const double xc = (p.x - center_.x) / a - 0.5 * r;
    const int32_t q0 = std::max(row.q_lo, static_cast<int32_t>(std::floor(xc - radius / a)) - 1);
    const int32_t q1 = std::min(row.q_hi, static_cast<int32_t>(std::ceil(xc + radius / a)) + 1);
    for (int32_t q = q0; q <= q1; ++q) {
      if (distance(embed({q, r}), p) <= radius + kEps)
        out.push_back(row.offset + static_cast<size_t>(q - row.q_lo));
    }
  }
  return out;
}

double LatticeRegion::covered_radius(Point p) const {
  const double a = spacing_;
  const double h = 0.5 * kSqrt3 * a;
  const auto line_gap = [&](int32_t r) { return std::abs(center_.y + h * r - p.y); };
  double best = std::min(line_gap(row_min() - 1), line_gap(row_max() + 1));
  for (int32_t r = row_min(); r <= row_max(); ++r) {
    const Row& row = rows_[static_cast<size_t>(r - row_min_)];
    if (line_gap(r) >= best) continue;
    const Point lo = embed({row.q_lo, r});
    const Point hi = embed({row.q_hi, r});
    if (p.x < lo.x || p.x > hi.x) {
      best = std::min(best, line_gap(r));
      continue;
    }
    best = std::min({best, distance(p, embed({row.q_lo - 1, r})), distance(p, embed({row.q_hi + 1, r}))});
  }
  return best;
}

bool LatticeRegion::operator==(const LatticeRegion& o) const {
  auto disk_eq = [](const Disk& a, const Disk& b) {
    return a.center == b.center && a.radius == b.radius;
  };
  if (shape_ != o.shape_ || extent_ != o.extent_ || spacing_ != o.spacing_ ||
      !(center_ == o.center_))
    return false;
  if (mask_.domain.has_value() != o.mask_.domain.has_value()) return false;
  if (mask_.domain) {
    const Domain& d = *mask_.domain;
    const Domain& e = *o.mask_.domain;
    if (d.shape != e.shape || !(d.center == e.center) || d.half_extent != e.half_extent)
      return false;
  }
  return std::equal(mask_.holes.begin(), mask_.holes.end(), o.mask_.holes.begin(),
                    o.mask_.holes.end(), disk_eq);
}

SiteCoord nearest_site(Point p, const LatticeRegion& region) {
  const double a = region.spacing();
  const Point d = p - region.center();
  const double rf = d.y / (0.5 * kSqrt3 * a);
  const double qf = d.x / a - 0.5 * rf;
  const auto q0 = static_cast<int32_t>(std::floor(qf));
  const auto r0 = static_cast<int32_t>(std::floor(rf));
  SiteCoord best{q0, r0};
  double best_d = std::numeric_limits<double>::infinity();
  for (int32_t dq = -1; dq <= 2; ++dq)
    for (int32_t dr = -1; dr <= 2; ++dr) {
      const SiteCoord s{q0 + dq, r0 + dr};
      const double dd = distance(embed(s, region), p);
      if (dd < best_d - 1e-12 || (std::abs(dd - best_d) <= 1e-12 && s < best)) {
        best = s;
        best_d = dd;
      }
    }
  return best;
}

std::vector<SiteCoord> sites_intersecting_circle(const LatticeRegion& region, Point center,
                                                 double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("circle radius must be positive");
  std::vector<SiteCoord> out;
  const double reach = radius + region.hexagon_circumradius();
  for (size_t idx : region.sites_within(center, reach)) {
    const SiteCoord s = region.site(idx);
    if (region.hex_min_distance(s, center) <= radius + 1e-12 &&
        region.hex_max_distance(s, center) >= radius - 1e-12)
      out.push_back(s);
  }
  return out;
}

bool reaches_circle(const LatticeRegion& region, SiteCoord s, Point p, double radius,
                    BoundaryConvention conv) {
  if (conv == BoundaryConvention::center) return distance(region.embed(s), p) >= radius - 1e-12;
  return region.hex_max_distance(s, p) >= radius - 1e-12;
}

bool touches_disk(const LatticeRegion& region, SiteCoord s, Point p, double radius,
                  BoundaryConvention conv) {
  if (conv == BoundaryConvention::center) return distance(region.embed(s), p) <= radius + 1e-12;
  return region.hex_min_distance(s, p) <= radius + 1e-12;
}

}  // namespace percolab
