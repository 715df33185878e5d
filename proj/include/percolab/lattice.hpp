#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace percolab {

/// Axial coordinate of a vertex of the triangular lattice.
struct SiteCoord {
  int32_t q = 0;
  int32_t r = 0;
  auto operator<=>(const SiteCoord&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double norm(Point p);
double distance(Point a, Point b);

inline constexpr double kSqrt3 = 1.7320508075688772935;

/// The six lattice directions in counterclockwise order starting at angle 0.
inline constexpr std::array<SiteCoord, 6> kDirections{{
    {1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

std::array<SiteCoord, 6> neighbors(SiteCoord s);

inline SiteCoord operator+(SiteCoord a, SiteCoord b) { return {a.q + b.q, a.r + b.r}; }
inline SiteCoord operator-(SiteCoord a, SiteCoord b) { return {a.q - b.q, a.r - b.r}; }

/// Whether the outer-reach of a cluster is judged by its hexagons or by
/// the embedded site centers.
enum class BoundaryConvention { hexagon, center };

struct Disk {
  Point center;
  double radius = 0.0;
};

/// Continuum domain D; lattice sites whose embedded center lies outside D
/// are forced closed.
struct Domain {
  enum class Shape { box, disk };
  Shape shape = Shape::disk;
  Point center;
  double half_extent = 0.0;  // half side for box, radius for disk
  bool contains(Point p) const;
};

/// Sites forced closed: everything outside `domain` (when set) and every
/// site whose center lies in one of the closed `holes`.
struct DomainMask {
  std::optional<Domain> domain;
  std::vector<Disk> holes;
  bool empty() const { return !domain && holes.empty(); }
  bool forces_closed(Point p) const;
};

enum class RegionShape { box, disk, rhombus };

/// Finite patch of the lattice a*T with canonical site order (rows of
/// increasing r, q increasing inside a row).
class LatticeRegion {
 public:
  /// `extent` is the box half-width, disk radius, or rhombus side, in lattice steps.
  LatticeRegion(RegionShape shape, int32_t extent, double spacing = 1.0,
                Point center = {}, DomainMask mask = {});

  static std::shared_ptr<const LatticeRegion> box(int32_t half_width, double spacing = 1.0,
                                                  Point center = {}, DomainMask mask = {});
  static std::shared_ptr<const LatticeRegion> disk(int32_t radius, double spacing = 1.0,
                                                   Point center = {}, DomainMask mask = {});
  static std::shared_ptr<const LatticeRegion> rhombus(int32_t side, double spacing = 1.0,
                                                      Point center = {}, DomainMask mask = {});

  RegionShape shape() const { return shape_; }
  int32_t extent() const { return extent_; }
  double spacing() const { return spacing_; }
  Point center() const { return center_; }
  const DomainMask& mask() const { return mask_; }

  size_t size() const { return size_; }
  size_t word_count() const { return (size_ + 63) / 64; }
  size_t unmasked_count() const { return unmasked_; }
  int32_t row_min() const { return row_min_; }
  int32_t row_max() const { return row_min_ + static_cast<int32_t>(rows_.size()) - 1; }

  /// Canonical index of `s`, or -1 when `s` is not in the region.
  int64_t index_of(SiteCoord s) const {
    const int64_t row = static_cast<int64_t>(s.r) - row_min_;
    if (row < 0 || row >= static_cast<int64_t>(rows_.size())) return -1;
    const Row& rw = rows_[static_cast<size_t>(row)];
    if (s.q < rw.q_lo || s.q > rw.q_hi) return -1;
    return static_cast<int64_t>(rw.offset) + (s.q - rw.q_lo);
  }
  bool contains(SiteCoord s) const { return index_of(s) >= 0; }
  SiteCoord site(size_t index) const;

  /// Row bounds, for row-wise sweeps.
  struct Row {
    int32_t q_lo = 0;
    int32_t q_hi = -1;
    size_t offset = 0;
  };
  const std::vector<Row>& rows() const { return rows_; }

  Point embed(SiteCoord s) const;
  Point embed_index(size_t index) const { return embed(site(index)); }

  /// Forced-closed bits in canonical order (empty when the mask is empty).
  const std::vector<uint64_t>& masked_bits() const { return masked_; }
  bool masked(size_t index) const {
    return !masked_.empty() && ((masked_[index >> 6] >> (index & 63)) & 1u);
  }

  /// Area of one elementary hexagon, (sqrt(3)/2) a^2.
  double hexagon_area() const { return 0.5 * kSqrt3 * spacing_ * spacing_; }
  double hexagon_circumradius() const { return spacing_ / kSqrt3; }
  double hexagon_inradius() const { return 0.5 * spacing_; }

  /// Distance from `p` to the nearest / farthest point of the hexagon of `s`.
  double hex_min_distance(SiteCoord s, Point p) const;
  double hex_max_distance(SiteCoord s, Point p) const;

  /// Sites whose center lies within `radius` of `p`, restricted to the region.
  std::vector<size_t> sites_within(Point p, double radius) const;

  /// Largest rho such that every lattice site within rho of `p` belongs to
  /// the region (masked sites count as present).
  double covered_radius(Point p) const;

  bool operator==(const LatticeRegion& other) const;

 private:
  void build_rows();
  void build_mask();

  RegionShape shape_;
  int32_t extent_;
  double spacing_;
  Point center_;
  DomainMask mask_;
  int32_t row_min_ = 0;
  std::vector<Row> rows_;
  size_t size_ = 0;
  size_t unmasked_ = 0;
  std::vector<uint64_t> masked_;
};

using RegionPtr = std::shared_ptr<const LatticeRegion>;

/// Embedding of `s` for a region with the given spacing and center:
/// center + a (q e1 + r e2) with e1 = (1,0), e2 = (1/2, sqrt(3)/2).
Point embed(SiteCoord s, double spacing, Point center);
Point embed(SiteCoord s, const LatticeRegion& region);

/// Nearest lattice site to a continuum point (not restricted to the region).
SiteCoord nearest_site(Point p, const LatticeRegion& region);

/// Sites whose closed hexagonal cell meets the circle of `radius` about
/// `center`. Tangent hexagons count. Empty if the circle misses the region.
std::vector<SiteCoord> sites_intersecting_circle(const LatticeRegion& region, Point center,
                                                 double radius);

/// Whether the hexagon of `s` reaches distance `radius` from `p` (meets the
/// circle or lies outside it), under the chosen convention.
bool reaches_circle(const LatticeRegion& region, SiteCoord s, Point p, double radius,
                    BoundaryConvention conv = BoundaryConvention::hexagon);

/// Whether the hexagon of `s` meets the closed disk of `radius` about `p`.
bool touches_disk(const LatticeRegion& region, SiteCoord s, Point p, double radius,
                  BoundaryConvention conv = BoundaryConvention::hexagon);

}  // namespace percolab
