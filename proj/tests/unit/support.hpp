#pragma once

#include <vector>

#include "percolab/sampling.hpp"
#include "percolab/serialization.hpp"

namespace testing {

using namespace percolab;

inline const int kDq[6] = {1, 0, -1, -1, 0, 1};
inline const int kDr[6] = {0, 1, 1, 0, -1, -1};

// Plain BFS component labels over open (or closed) sites; -1 elsewhere.
inline std::vector<int> bfs_components(const Configuration& c, bool open_sites = true) {
  const LatticeRegion& reg = c.region();
  std::vector<int> comp(reg.size(), -1);
  int next = 0;
  std::vector<size_t> q;
  const auto want = [&](size_t i) {
    if (reg.masked(i)) return !open_sites;
    return c.open(i) == open_sites;
  };
  for (size_t s = 0; s < reg.size(); ++s) {
    if (comp[s] >= 0 || !want(s)) continue;
    comp[s] = next;
    q.assign(1, s);
    for (size_t h = 0; h < q.size(); ++h) {
      const SiteCoord x = reg.site(q[h]);
      for (int k = 0; k < 6; ++k) {
        const int64_t j = reg.index_of({x.q + kDq[k], x.r + kDr[k]});
        if (j < 0 || comp[static_cast<size_t>(j)] >= 0 || !want(static_cast<size_t>(j))) continue;
        comp[static_cast<size_t>(j)] = next;
        q.push_back(static_cast<size_t>(j));
      }
    }
    ++next;
  }
  return comp;
}

// 19-site hexagonal flower: disk(5) with everything beyond radius 2.05 masked.
inline RegionPtr flower() {
  return region_from_json({{"shape", "disk"},
                           {"radius", 5},
                           {"mask", {{"domain", {{"shape", "disk"}, {"radius", 2.05}, {"center", {0.0, 0.0}}}}}}});
}

}  // namespace testing
