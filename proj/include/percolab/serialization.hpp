#pragma once

#include <json.hpp>

#include "percolab/lattice.hpp"

namespace percolab {

using json = nlohmann::json;

/// {"shape":"box","half_width":512,"spacing":1.0,"center":[0,0]} plus an
/// optional "mask": {"domain": {...}, "holes": [{"center":[x,y],"radius":r}]}.
json region_to_json(const LatticeRegion& region);
RegionPtr region_from_json(const json& j);

json point_to_json(Point p);
Point point_from_json(const json& j);

}  // namespace percolab
