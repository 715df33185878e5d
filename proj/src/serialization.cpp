#include "percolab/serialization.hpp"

#include "percolab/error.hpp"

namespace percolab {

json point_to_json(Point p) { return json::array({p.x, p.y}); }

Point point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("point must be [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

namespace {

json domain_to_json(const Domain& d) {
  json j;
  j["shape"] = d.shape == Domain::Shape::box ? "box" : "disk";
  j["center"] = point_to_json(d.center);
  j[d.shape == Domain::Shape::box ? "half_width" : "radius"] = d.half_extent;
  return j;
}

Domain domain_from_json(const json& j) {
  Domain d;
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "box") {
    d.shape = Domain::Shape::box;
    d.half_extent = j.at("half_width").get<double>();
  } else if (shape == "disk") {
    d.shape = Domain::Shape::disk;
    d.half_extent = j.at("radius").get<double>();
  } else {
    throw InvalidArgument("unknown domain shape '" + shape + "'");
  }
  if (j.contains("center")) d.center = point_from_json(j.at("center"));
  return d;
}

}  // namespace

json region_to_json(const LatticeRegion& region) {
  json j;
  switch (region.shape()) {
    case RegionShape::box:
      j["shape"] = "box";
      j["half_width"] = region.extent();
      break;
    case RegionShape::disk:
      j["shape"] = "disk";
      j["radius"] = region.extent();
      break;
    case RegionShape::rhombus:
      j["shape"] = "rhombus";
      j["side"] = region.extent();
      break;
  }
  j["spacing"] = region.spacing();
  j["center"] = point_to_json(region.center());
  const DomainMask& m = region.mask();
  if (!m.empty()) {
    json mj = json::object();
    if (m.domain) mj["domain"] = domain_to_json(*m.domain);
    if (!m.holes.empty()) {
      json holes = json::array();
      for (const Disk& h : m.holes)
        holes.push_back({{"center", point_to_json(h.center)}, {"radius", h.radius}});
      mj["holes"] = holes;
    }
    j["mask"] = mj;
  }
  return j;
}

RegionPtr region_from_json(const json& j) {
  try {
    const std::string shape = j.at("shape").get<std::string>();
    const double spacing = j.value("spacing", 1.0);
    const Point center = j.contains("center") ? point_from_json(j.at("center")) : Point{};
    DomainMask mask;
    if (j.contains("mask")) {
      const json& mj = j.at("mask");
      if (mj.contains("domain")) mask.domain = domain_from_json(mj.at("domain"));
      if (mj.contains("holes"))
        for (const json& h : mj.at("holes"))
          mask.holes.push_back({point_from_json(h.at("center")), h.at("radius").get<double>()});
    }
    if (shape == "box")
      return LatticeRegion::box(j.at("half_width").get<int32_t>(), spacing, center, mask);
    if (shape == "disk")
      return LatticeRegion::disk(j.at("radius").get<int32_t>(), spacing, center, mask);
    if (shape == "rhombus")
      return LatticeRegion::rhombus(j.at("side").get<int32_t>(), spacing, center, mask);
    throw InvalidArgument("unknown region shape '" + shape + "'");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed region descriptor: ") + e.what());
  }
}

}  // namespace percolab
