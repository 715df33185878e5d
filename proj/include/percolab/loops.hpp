#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "percolab/events.hpp"

namespace percolab {

/// Oriented interface between an open and a closed cluster, as the cyclic
/// sequence of hexagon corners it visits (open hexagons on the left).
struct LoopPath {
  std::vector<Point> vertices;
  bool ccw = true;
  bool encloses_open = true;
  /// One dual edge per vertex: (open site, direction to the closed site).
  std::vector<std::pair<size_t, uint8_t>> edges;

  double signed_area() const;
};

struct LoopEnsemble {
  std::vector<LoopPath> loops;
  /// Innermost enclosing loop, -1 for roots.
  std::vector<int64_t> parent;
  /// Interface edges on chains cut by the region boundary.
  size_t discarded_edges = 0;

  size_t edge_count() const;
};

/// All closed interface loops between in-region hexagons.
LoopEnsemble trace_interfaces(const Configuration& config);

/// Number of open/closed nearest-neighbor pairs inside the region.
size_t interface_pair_count(const Configuration& config);

/// Signed winding number of a closed polygon around `p`. Throws
/// InvalidArgument when `p` lies on the polygon.
int winding_number(const std::vector<Point>& polygon, Point p);
int winding_number(const LoopPath& loop, Point p);
bool separates(const LoopPath& loop, Point p1, Point p2);

/// Result of the innermost open circuit search in an annulus.
struct CircuitSearch {
  /// Site indices of the circuit in counterclockwise order, if one exists.
  std::optional<std::vector<size_t>> circuit;
  /// Sites whose state was read, sorted.
  std::vector<size_t> explored;
};

/// Finds the innermost open circuit of the annulus band surrounding the
/// core without reading any state outside it. The search floods the core
/// together with the closed band clusters attached to it, then walks the
/// outer boundary of that set. `start_seed` only rotates the starting
/// point of the returned cycle (the circuit itself is deterministic).
template <class State>
CircuitSearch innermost_open_circuit(const State& state, const AnnulusGeometry& geom,
                                     std::optional<uint64_t> start_seed = std::nullopt);

CircuitSearch innermost_open_circuit(const Configuration& config, const AnnulusSpec& ann,
                                     std::optional<uint64_t> start_seed = std::nullopt);

/// Spherical metric: length element |dx| / (1 + |x|^2).
double sphere_distance(Point u, Point v);

inline constexpr size_t kLoopResample = 256;

/// Resamples a closed polygon to `n` points equally spaced in arc length.
std::vector<Point> resample_closed(const std::vector<Point>& polygon, size_t n);

/// Discrete Frechet distance under the spherical metric, minimized over
/// cyclic shifts, after resampling both loops to `n` vertices.
double loop_distance(const LoopPath& a, const LoopPath& b, size_t n = kLoopResample);
double loop_distance(const std::vector<Point>& a, const std::vector<Point>& b,
                     size_t n = kLoopResample);

/// Hausdorff distance between loop collections induced by loop_distance.
/// Both empty: 0; exactly one empty: infinity.
double ensemble_distance(const std::vector<std::vector<Point>>& a,
                         const std::vector<std::vector<Point>>& b, size_t n = kLoopResample);
double ensemble_distance(const LoopEnsemble& a, const LoopEnsemble& b, size_t n = kLoopResample);

/// One JSON object per line: {"orientation":"ccw","vertices":[[x,y],...]}.
void write_loops_jsonl(std::ostream& out, const LoopEnsemble& loops);

// ---------------------------------------------------------------------------

namespace detail {

/// Sites outside the marked set along its outer boundary, counterclockwise,
/// reduced to a simple cycle winding around `inside`. `start` must be a
/// marked site whose east neighbor is unmarked and unbounded.
std::vector<size_t> trace_outer_boundary(const LatticeRegion& reg, const std::vector<uint32_t>& mark,
                                         uint32_t value, size_t start, Point inside);

}  // namespace detail

template <class State>
CircuitSearch innermost_open_circuit(const State& state, const AnnulusGeometry& geom,
                                     std::optional<uint64_t> start_seed) {
  const LatticeRegion& reg = geom.region();
  CircuitSearch out;
  // mark: 1 = in the flooded set, 2 = read and open.
  std::vector<uint32_t> mark(reg.size(), 0);
  std::vector<size_t> queue(geom.core_sites().begin(), geom.core_sites().end());
  for (size_t c : queue) mark[c] = 1;
  bool crossing = false;
  for (size_t head = 0; head < queue.size() && !crossing; ++head) {
    const SiteCoord s = reg.site(queue[head]);
    for (const SiteCoord& d : kDirections) {
      const auto j = static_cast<size_t>(reg.index_of(s + d));
      if (mark[j] != 0) continue;
      const auto zone = geom.zone(j);
      if (zone == AnnulusGeometry::outside) {
        crossing = true;
        break;
      }
      if (zone != AnnulusGeometry::band) continue;
      out.explored.push_back(j);
      if (state.open(j)) {
        mark[j] = 2;
        continue;
      }
      mark[j] = 1;
      if (geom.outer_touch(j)) {
        crossing = true;
        break;
      }
      queue.push_back(j);
    }
  }
  std::sort(out.explored.begin(), out.explored.end());
  if (crossing) return out;
  // Rightmost flooded site: its east neighbor lies in the unbounded complement.
  size_t start = queue.front();
  for (size_t i : queue) {
    const Point p = reg.embed_index(i);
    const Point b = reg.embed_index(start);
    if (p.x > b.x || (p.x == b.x && p.y > b.y)) start = i;
  }
  std::vector<size_t> cyc = detail::trace_outer_boundary(reg, mark, 1, start,
                                                             reg.embed_index(geom.core_sites().front()));
  if (start_seed && !cyc.empty()) {
    const size_t k = rng::splitmix64(*start_seed) % cyc.size();
    std::rotate(cyc.begin(), cyc.begin() + static_cast<std::ptrdiff_t>(k), cyc.end());
  }
  out.circuit = std::move(cyc);
  return out;
}

}  // namespace percolab
