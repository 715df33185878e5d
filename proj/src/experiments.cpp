#include "percolab/experiments.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "percolab/colorfield.hpp"
#include "percolab/inference.hpp"
#include "percolab/loops.hpp"

namespace percolab {

namespace {

class HierarchyError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(yaml_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  const std::string s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "null" || s == "~") return nullptr;
  {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (!s.empty() && *end == '\0' && errno == 0) return v;
  }
  {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && *end == '\0') return v;
  }
  return s;
}

std::string fmt_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) return fmt_number(v.get<double>());
  if (v.is_null()) return "";
  return v.dump();
}

RegionPtr region_or(const ExperimentSpec& s, const json& fallback) {
  return region_from_json(s.region.is_null() ? fallback : s.region);
}

unsigned threads_of(const ExperimentSpec& s) { return s.threads == 0 ? default_threads() : s.threads; }

std::vector<double> doubles(const json& params, const char* key) {
  if (!params.contains(key)) throw InvalidArgument(std::string("missing parameter '") + key + "'");
  std::vector<double> v = params.at(key).get<std::vector<double>>();
  if (v.empty()) throw InvalidArgument(std::string("parameter '") + key + "' is empty");
  return v;
}

SiteCoord site_param(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("site must be [q, r]");
  return {j[0].get<int32_t>(), j[1].get<int32_t>()};
}

json ranges_json(const ExperimentSpec& s, uint64_t n) {
  json out = json::array();
  for (const auto& w : worker_ranges(0, n, threads_of(s))) {
    json r = json::array();
    for (const ReplicaRange& rr : w) r.push_back({rr.begin, rr.end});
    out.push_back(r);
  }
  return out;
}

Table fit_table(const std::string& name, const LinearFit& f) {
  return {name, {"slope", "slope_stderr", "intercept", "r2"}, {{f.slope, f.slope_std_error, f.intercept, f.r2}}};
}

SiteCoord center_site(const LatticeRegion& reg) {
  const SiteCoord s = nearest_site(reg.center(), reg);
  if (!reg.contains(s)) throw GeometryError("region has no central site");
  return s;
}

void require_margin(const LatticeRegion& reg, Point p, double radius, const std::string& what) {
  if (reg.covered_radius(p) < radius)
    throw GeometryError(what + " needs radius " + fmt_number(radius) + " inside the region");
}

// Each runner parses and checks its parameters, returns early when `dry`.
using Runner = ExperimentResult (*)(const ExperimentSpec&, bool dry);

ExperimentResult run_pi_scaling(const ExperimentSpec& s, bool dry) {
  std::vector<double> scales = doubles(s.params, "scales");
  const double rmax = *std::max_element(scales.begin(), scales.end());
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(rmax)) + 8}});
  const LatticeRegion& reg = *region;
  require_margin(reg, reg.embed(center_site(reg)), rmax + reg.spacing(), "one-arm disk");
  ExperimentResult res;
  if (dry) return res;
  const std::vector<Estimate> est = estimate_pi_scales(scales, region, s.n_samples, s.seed, threads_of(s));
  Table t{"pi_scaling", {"scale", "mean", "stderr", "n"}, {}};
  std::vector<ScalePoint> pts;
  json ests = json::array();
  for (size_t k = 0; k < scales.size(); ++k) {
    t.rows.push_back({scales[k], est[k].mean, est[k].std_error, est[k].n_samples});
    pts.push_back({scales[k], est[k]});
    json e = estimate_to_json(est[k]);
    e["scale"] = scales[k];
    ests.push_back(e);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  if (scales.size() >= 3) {
    try {
      const StabilizedFit f = fit_power_law_stabilized(pts);
      res.tables.push_back(fit_table("fit_raw", f.raw));
      res.tables.push_back(fit_table("fit_stabilized", f.stabilized));
      res.manifest["fit"] = {{"raw", fit_to_json(f.raw)}, {"stabilized", fit_to_json(f.stabilized)},
                             {"dropped", f.dropped}};
    } catch (const InvalidArgument& e) {
      res.manifest["fit"] = {{"error", e.what()}};
    }
  }
  return res;
}

ExperimentResult run_p2_scaling(const ExperimentSpec& s, bool dry) {
  const std::vector<double> dists = doubles(s.params, "distances");
  const std::vector<double> dirs =
      s.params.contains("directions") ? s.params.at("directions").get<std::vector<double>>() : std::vector<double>{0.0};
  const double dmax = *std::max_element(dists.begin(), dists.end());
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(2 * dmax)) + 8}});
  const LatticeRegion& reg = *region;
  const SiteCoord x1 = center_site(reg);
  const Point p1 = reg.embed(x1);
  require_margin(reg, p1, 2.0 * dmax, "two-point pair");
  ExperimentResult res;
  std::vector<std::pair<double, SiteCoord>> jobs;
  for (double th : dirs)
    for (double d : dists) {
      if (!(d > 0.0)) throw InvalidArgument("distances must be positive");
      const double t = th * std::acos(-1.0) / 180.0;
      const SiteCoord x2 = nearest_site(p1 + Point{d * std::cos(t), d * std::sin(t)}, reg);
      if (x2 == x1) throw InvalidArgument("distance below one lattice step");
      jobs.push_back({th, x2});
    }
  if (dry) return res;
  Table t{"p2_scaling", {"direction", "d", "distance", "mean", "stderr", "n"}, {}};
  json ests = json::array();
  json fits = json::object();
  for (double th : dirs) {
    std::vector<ScalePoint> pts;
    for (const auto& [dir, x2] : jobs) {
      if (dir != th) continue;
      const JointCounts jc = connection_counts({x1, x2}, {{0, 1}}, region, s.n_samples, s.seed, threads_of(s));
      const Estimate e = jc.proportion(0);
      const double dist = distance(p1, reg.embed(x2));
      const double d = dists[pts.size()];
      t.rows.push_back({th, d, dist, e.mean, e.std_error, e.n_samples});
      pts.push_back({dist, e});
      json ej = estimate_to_json(e);
      ej["direction"] = th;
      ej["distance"] = dist;
      ests.push_back(ej);
    }
    if (pts.size() >= 3) {
      try {
        const StabilizedFit f = fit_power_law_stabilized(pts);
        const std::string tag = "fit_dir" + std::to_string(static_cast<int>(std::lround(th)));
        res.tables.push_back(fit_table(tag + "_raw", f.raw));
        res.tables.push_back(fit_table(tag + "_stabilized", f.stabilized));
        fits[fmt_number(th)] = {{"raw", fit_to_json(f.raw)}, {"stabilized", fit_to_json(f.stabilized)}};
      } catch (const InvalidArgument& e) {
        fits[fmt_number(th)] = {{"error", e.what()}};
      }
    }
  }
  res.tables.insert(res.tables.begin(), t);
  res.manifest["estimates"] = ests;
  res.manifest["fit"] = fits;
  return res;
}

ExperimentResult run_p3_ratio(const ExperimentSpec& s, bool dry) {
  const std::vector<double> sides = doubles(s.params, "sides");
  const double extrapolate_from = s.params.value("extrapolate_from", 0.0);
  const double dmax = *std::max_element(sides.begin(), sides.end());
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(3.5 * dmax)) + 8}});
  const LatticeRegion& reg = *region;
  const Point origin = reg.embed(center_site(reg));
  for (double d : sides) {
    const Triangle t = snap_triangle(reg, origin, d);
    const Point c = reg.embed(t.sites[0]) + Point{0.5 * d, 0.5 * d / kSqrt3};
    require_margin(reg, c, 3.0 * d, "triangle");
  }
  ExperimentResult res;
  if (dry) return res;
  Table t{"p3_ratio",
          {"d", "snap_error", "p12", "p12_stderr", "p13", "p13_stderr", "p23", "p23_stderr", "p123",
           "p123_stderr", "R", "R_stderr", "n"},
          {}};
  std::vector<ScalePoint> p2pts;
  std::vector<double> lx, ly, ls, inv, rv, rs;
  json ests = json::array();
  for (double d : sides) {
    const RatioResult r = estimate_ratio_R(d, region, s.n_samples, s.seed, threads_of(s), origin);
    t.rows.push_back({d, r.triangle.snap_error, r.p12.mean, r.p12.std_error, r.p13.mean, r.p13.std_error,
                      r.p23.mean, r.p23.std_error, r.p123.mean, r.p123.std_error, r.ratio.mean,
                      r.ratio.std_error, r.p12.n_samples});
    const Estimate p2 = r.counts.linear({1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0});
    p2pts.push_back({d, p2});
    if (r.p123.mean > 0.0) {
      lx.push_back(std::log(r.triangle.sides[0]) + std::log(r.triangle.sides[1]) + std::log(r.triangle.sides[2]));
      ly.push_back(std::log(r.p123.mean));
      ls.push_back(r.p123.std_error / r.p123.mean);
      if (d >= extrapolate_from) {
        inv.push_back(1.0 / d);
        rv.push_back(r.ratio.mean);
        rs.push_back(r.ratio.std_error);
      }
    }
    ests.push_back({{"d", d}, {"p2", estimate_to_json(p2)}, {"p3", estimate_to_json(r.p123)},
                    {"R", estimate_to_json(r.ratio)}});
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  json fit = json::object();
  const auto attempt = [&](const std::string& name, auto&& f) {
    try {
      const LinearFit lf = f();
      res.tables.push_back(fit_table(name, lf));
      fit[name] = fit_to_json(lf);
    } catch (const InvalidArgument& e) {
      fit[name] = {{"error", e.what()}};
    }
  };
  attempt("p2_fit", [&] { return fit_power_law(p2pts); });
  attempt("p3_fit", [&] { return weighted_linear_fit(lx, ly, ls); });
  attempt("ratio_extrapolation", [&] { return weighted_linear_fit(inv, rv, rs); });
  res.manifest["fit"] = fit;
  return res;
}

ExperimentResult run_four_arm_scaling(const ExperimentSpec& s, bool dry) {
  const double r = s.params.at("r").get<double>();
  const std::vector<double> aspects = doubles(s.params, "aspects");
  std::vector<double> radii;
  for (double a : aspects) radii.push_back(a * r);
  std::sort(radii.begin(), radii.end());
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(radii.back())) + 8}});
  const LatticeRegion& reg = *region;
  const Point c = reg.embed(center_site(reg));
  require_margin(reg, c, radii.back() + 2.0 * reg.spacing(), "four-arm annulus");
  const FourArmSweep probe(region, c, r, radii);
  ExperimentResult res;
  if (dry) return res;
  const JointCounts jc = run_replicas(0, s.n_samples, threads_of(s), JointCounts(radii.size()), [&] {
    return [&, sweep = probe, state = LazySample(region)](uint64_t b, uint64_t e) mutable {
      JointCounts out(radii.size());
      std::vector<bool> ind(radii.size());
      for (uint64_t rep = b; rep < e; ++rep) {
        state.reset(s.seed, rep);
        const std::vector<bool> v = sweep.run(state);
        for (size_t k = 0; k < v.size(); ++k) ind[k] = v[k];
        out.add(ind);
      }
      return out;
    };
  });
  Table t{"four_arm_scaling", {"aspect", "R", "mean", "stderr", "n"}, {}};
  std::vector<ScalePoint> pts;
  json ests = json::array();
  for (size_t k = 0; k < radii.size(); ++k) {
    const Estimate e = jc.proportion(k);
    t.rows.push_back({radii[k] / r, radii[k], e.mean, e.std_error, e.n_samples});
    pts.push_back({radii[k] / r, e});
    json ej = estimate_to_json(e);
    ej["aspect"] = radii[k] / r;
    ests.push_back(ej);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  if (pts.size() >= 3) {
    try {
      const StabilizedFit f = fit_power_law_stabilized(pts);
      res.tables.push_back(fit_table("fit_raw", f.raw));
      res.tables.push_back(fit_table("fit_stabilized", f.stabilized));
      res.manifest["fit"] = {{"raw", fit_to_json(f.raw)}, {"stabilized", fit_to_json(f.stabilized)},
                             {"dropped", f.dropped}};
    } catch (const InvalidArgument& e) {
      res.manifest["fit"] = {{"error", e.what()}};
    }
  }
  return res;
}

struct FieldAcc {
  MomentSums m;
  uint64_t mismatches = 0;
  void merge(const FieldAcc& o) {
    m.merge(o.m);
    mismatches += o.mismatches;
  }
};

ExperimentResult run_field_moments(const ExperimentSpec& s, bool dry) {
  std::vector<SiteCoord> pts;
  for (const json& p : s.params.at("points")) pts.push_back(site_param(p));
  if (pts.size() < 2) throw InvalidArgument("field_moments needs at least two points");
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", 64}});
  for (const SiteCoord& p : pts)
    if (!region->contains(p)) throw GeometryError("marked site outside the region");
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      if (pts[i] == pts[j]) throw InvalidArgument("duplicate marked point");
  ExperimentResult res;
  if (dry) return res;
  // Observables: connection, partition, direct, partition (both colors), direct (both colors).
  const FieldAcc acc = run_replicas(0, s.n_samples, threads_of(s), FieldAcc{MomentSums(5), 0}, [&] {
    return [&](uint64_t b, uint64_t e) {
      FieldAcc a{MomentSums(5), 0};
      for (uint64_t rep = b; rep < e; ++rep) {
        const Configuration cfg = sample(region, s.seed, rep);
        const ClusterLabels open = label(cfg);
        const ClusterLabels closed = label_closed(cfg);
        const SignAssignment so = assign_signs(open, s.seed, rep);
        const SignAssignment sc = assign_signs(closed, s.seed, rep, rng::Stream::aux);
        const double conn = connection_event(open, pts) ? 1.0 : 0.0;
        const double part = correlation_partition(open, pts);
        const double dir = correlation_direct(open, so, pts);
        const double part2 = correlation_partition_both(open, closed, pts);
        double dir2 = 1.0;
        for (const SiteCoord& p : pts) dir2 *= spin_value_both(open, closed, so, sc, p);
        if (pts.size() == 2 && part != conn) ++a.mismatches;
        a.m.add({conn, part, dir, part2, dir2});
      }
      return a;
    };
  });
  const char* names[] = {"connection", "partition", "direct", "partition_both", "direct_both"};
  Table t{"field_moments", {"estimator", "mean", "stderr", "n"}, {}};
  json ests = json::array();
  for (size_t k = 0; k < 5; ++k) {
    Estimate e = acc.m.mean(k);
    t.rows.push_back({names[k], e.mean, e.std_error, e.n_samples});
    json ej = estimate_to_json(e);
    ej["estimator"] = names[k];
    ests.push_back(ej);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  res.manifest["identity_mismatches"] = acc.mismatches;
  return res;
}

ExperimentResult run_cutoff_scaling(const ExperimentSpec& s, bool dry) {
  const double n = s.params.at("n").get<double>();
  const size_t K = s.params.value("K", 64);
  std::vector<double> eps = doubles(s.params, "eps");
  std::sort(eps.begin(), eps.end());
  for (double e : eps)
    if (!(e > 0.0)) throw InvalidArgument("cutoffs must be positive");
  const double alpha = s.params.value("alpha", 1.0);
  const double pi_norm = s.params.value("pi_norm", 1.0);
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(n)) + 2}});
  const Eigenbasis basis(n, K, region->center());
  if (K < 2) throw InvalidArgument("K must be at least 2");
  const Eigenbasis half(n, K / 2, region->center());
  {
    const ClusterLabels empty = label(Configuration::all_closed(region));
    binned_coefficients(empty, SignAssignment{}, Eigenbasis(n, 1, region->center()), pi_norm, {});
  }
  ExperimentResult res;
  if (dry) return res;
  const size_t m = eps.size();
  // Observables: ||field - cutoff field||^2 per eps, then the full norm at K and K/2.
  const MomentSums acc = run_replicas(0, s.n_samples, threads_of(s), MomentSums(m + 2), [&] {
    return [&](uint64_t b, uint64_t e) {
      MomentSums out(m + 2);
      std::vector<double> v(m + 2);
      for (uint64_t rep = b; rep < e; ++rep) {
        const ClusterLabels labels = label(sample(region, s.seed, rep));
        const SignAssignment signs = assign_signs(labels, s.seed, rep);
        const std::vector<FieldCoefficients> bins = binned_coefficients(labels, signs, basis, pi_norm, eps);
        FieldCoefficients cum = bins[0];
        for (size_t k = 0; k < m; ++k) {
          if (k > 0) cum += bins[k];
          v[k] = hminus_norm(cum, basis, alpha);
        }
        cum += bins[m];
        v[m] = hminus_norm(cum, basis, alpha);
        v[m + 1] = hminus_norm(cum.truncated(K / 2), half, alpha);
        out.add(v);
      }
      return out;
    };
  });
  Table t{"cutoff_scaling", {"eps", "mean", "stderr", "n"}, {}};
  std::vector<ScalePoint> pts;
  json ests = json::array();
  for (size_t k = 0; k < m; ++k) {
    const Estimate e = acc.mean(k);
    t.rows.push_back({eps[k], e.mean, e.std_error, e.n_samples});
    pts.push_back({eps[k], e});
    json ej = estimate_to_json(e);
    ej["eps"] = eps[k];
    ests.push_back(ej);
  }
  const Estimate full = acc.mean(m);
  const Estimate halfn = acc.mean(m + 1);
  Table tn{"norm", {"K", "mean", "stderr", "n"},
           {{K, full.mean, full.std_error, full.n_samples}, {K / 2, halfn.mean, halfn.std_error, halfn.n_samples}}};
  res.tables.push_back(t);
  res.tables.push_back(tn);
  res.manifest["estimates"] = ests;
  res.manifest["norm"] = {{"K", estimate_to_json(full)}, {"K_half", estimate_to_json(halfn)},
                          {"tail_fraction", full.mean > 0.0 ? 1.0 - halfn.mean / full.mean : 0.0}};
  if (pts.size() >= 3) {
    try {
      const PowerLawFit f = fit_power_law(pts);
      res.tables.push_back(fit_table("fit_raw", f));
      res.manifest["fit"] = {{"raw", fit_to_json(f)}};
    } catch (const InvalidArgument& e) {
      res.manifest["fit"] = {{"error", e.what()}};
    }
  }
  return res;
}

ExperimentResult run_box_variance_scaling(const ExperimentSpec& s, bool dry) {
  const std::vector<double> hw = doubles(s.params, "half_widths");
  const double pi_norm = s.params.value("pi_norm", 1.0);
  if (!(pi_norm > 0.0)) throw InvalidArgument("pi_norm must be positive");
  const double hmax = *std::max_element(hw.begin(), hw.end());
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", static_cast<int>(std::ceil(3 * hmax))}});
  const Point c = region->center();
  box_square_mass(label(Configuration::all_closed(region)), c, hw);
  ExperimentResult res;
  if (dry) return res;
  const double a = region->spacing();
  const double w = (a * a / pi_norm) * (a * a / pi_norm);
  const MomentSums acc = run_replicas(0, s.n_samples, threads_of(s), MomentSums(hw.size()), [&] {
    return [&](uint64_t b, uint64_t e) {
      MomentSums out(hw.size());
      for (uint64_t rep = b; rep < e; ++rep) {
        std::vector<double> v = box_square_mass(label(sample(region, s.seed, rep)), c, hw);
        for (double& x : v) x *= w;
        out.add(v);
      }
      return out;
    };
  });
  Table t{"box_variance_scaling", {"L", "mean", "stderr", "n"}, {}};
  std::vector<ScalePoint> pts;
  json ests = json::array();
  for (size_t k = 0; k < hw.size(); ++k) {
    const Estimate e = acc.mean(k);
    t.rows.push_back({hw[k], e.mean, e.std_error, e.n_samples});
    pts.push_back({hw[k], e});
    json ej = estimate_to_json(e);
    ej["L"] = hw[k];
    ests.push_back(ej);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  if (pts.size() >= 3) {
    try {
      const PowerLawFit f = fit_power_law(pts);
      res.tables.push_back(fit_table("fit_raw", f));
      res.manifest["fit"] = {{"raw", fit_to_json(f)}};
    } catch (const InvalidArgument& e) {
      res.manifest["fit"] = {{"error", e.what()}};
    }
  }
  return res;
}

json micro_flower() {
  return {{"shape", "disk"},
          {"radius", 5},
          {"mask", {{"domain", {{"shape", "disk"}, {"radius", 2.05}, {"center", {0.0, 0.0}}}}}}};
}

ExperimentResult run_coupling_test(const ExperimentSpec& s, bool dry) {
  const double eta = s.params.at("eta").get<double>();
  const double delta = s.params.at("delta").get<double>();
  const double eps = s.params.at("eps").get<double>();
  if (!(0.0 < eta && eta < delta && delta < eps)) throw HierarchyError("need 0 < eta < delta < eps");
  const EventSpec outside = EventSpec::from_json(s.params.value(
      "outside_event", json{{"event", "four_arm"}, {"r", eps + 4.0}, {"R", 4.0 * (eps + 4.0)}}));
  const uint64_t target = s.params.value("target", s.n_samples);
  const RegionPtr region = region_or(s, {{"shape", "box"},
                                         {"half_width", static_cast<int>(std::ceil(std::max(eps, outside.annulus.R))) + 8}});
  const json ex = s.params.value("exact", json::object());
  const RegionPtr micro = region_from_json(ex.value("region", micro_flower()));
  const double meta = ex.value("eta", 0.8), mdelta = ex.value("delta", 1.1), meps = ex.value("eps", 2.0);
  const EventSpec mevent = EventSpec::from_json(ex.value("event", json{{"event", "connection"}, {"points", {{2, 0}, {1, 1}}}}));
  mevent.validate(micro);
  if (micro->unmasked_count() > kEnumerationGuard)
    throw GuardError("exact region has " + std::to_string(micro->unmasked_count()) + " free sites");
  const Point c = region->embed(center_site(*region));
  AnnulusGeometry(region, {c, eta, delta});
  require_margin(*region, c, eps + region->spacing(), "eps disk");
  if (outside.kind != EventSpec::Kind::always && outside.kind != EventSpec::Kind::never) outside.validate(region);
  ExperimentResult res;
  if (dry) return res;
  const CouplingExactReport exact = coupling_exact_check(micro, meta, mdelta, meps, [&](const Configuration& cfg) {
    return evaluate(mevent, cfg);
  });
  const CouplingStatReport st =
      coupling_statistical_test(region, eta, delta, eps, outside, target, s.seed, threads_of(s));
  Table t{"coupling_test", {"ensemble", "accepted", "freq", "stderr"}, {}};
  t.rows.push_back({"point", st.accepted_point, st.freq_point.mean, st.freq_point.std_error});
  t.rows.push_back({"annulus", st.accepted_annulus, st.freq_annulus.mean, st.freq_annulus.std_error});
  res.tables.push_back(t);
  res.tables.push_back({"coupling_summary",
                        {"z", "p_value", "strata", "z_pooled", "p_pooled", "drawn", "exact_classes",
                         "exact_mismatches", "exact_circuits"},
                        {{st.z, st.p_value, st.strata, st.z_pooled, st.p_pooled, st.drawn, exact.classes,
                          exact.mismatches, exact.circuits}}});
  res.passed = exact.holds() && st.p_value > 0.01;
  res.manifest["estimates"] = json::array({estimate_to_json(st.freq_point), estimate_to_json(st.freq_annulus)});
  res.manifest["test"] = {{"z", st.z},
                          {"p_value", st.p_value},
                          {"strata", st.strata},
                          {"z_pooled", st.z_pooled},
                          {"p_pooled", st.p_pooled},
                          {"drawn", st.drawn},
                          {"exact", {{"classes", exact.classes}, {"mismatches", exact.mismatches}, {"circuits", exact.circuits}}},
                          {"passed", res.passed}};
  return res;
}

ExperimentResult run_four_point_residual(const ExperimentSpec& s, bool dry) {
  const std::vector<int32_t> seps = s.params.at("separations").get<std::vector<int32_t>>();
  if (seps.empty()) throw InvalidArgument("no separations");
  const SiteCoord x3 = site_param(s.params.at("x3"));
  const SiteCoord x4 = site_param(s.params.at("x4"));
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", 128}});
  const LatticeRegion& reg = *region;
  const SiteCoord x1 = center_site(reg);
  const Point p1 = reg.embed(x1);
  if (!reg.contains(x3) || !reg.contains(x4)) throw GeometryError("x3 or x4 outside the region");
  const double l = std::min({distance(p1, reg.embed(x3)), distance(p1, reg.embed(x4)),
                             distance(reg.embed(x3), reg.embed(x4))});
  const int32_t smax = *std::max_element(seps.begin(), seps.end());
  if (2.0 * smax > l)
    throw HierarchyError("largest separation " + std::to_string(smax) + " is not small against " + fmt_number(l));
  for (int32_t sp : seps)
    if (!reg.contains(x1 + SiteCoord{sp, 0})) throw GeometryError("x2 outside the region");
  ExperimentResult res;
  if (dry) return res;
  const FourPointResult r = four_point_residual_experiment(seps, x3, x4, region, s.n_samples, s.seed, threads_of(s));
  Table t{"four_point_residual",
          {"separation", "c4_partition", "c4_partition_stderr", "c4_direct", "c4_direct_stderr", "p12", "p34",
           "p1234", "p13_24", "p14_23", "p12_34", "residual", "residual_stderr", "product_residual",
           "product_residual_stderr", "n"},
          {}};
  json ests = json::array();
  for (const FourPointRow& row : r.rows) {
    t.rows.push_back({row.separation, row.c4_partition.mean, row.c4_partition.std_error, row.c4_direct.mean,
                      row.c4_direct.std_error, row.p12.mean, row.p34.mean, row.p1234.mean, row.p13_24.mean,
                      row.p14_23.mean, row.p12_34.mean, row.residual.mean, row.residual.std_error,
                      row.product_residual.mean, row.product_residual.std_error, row.residual.n_samples});
    json ej = estimate_to_json(row.residual);
    ej["separation"] = row.separation;
    ests.push_back(ej);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  res.manifest["monotone"] = r.monotone;
  if (r.fit) {
    res.tables.push_back(fit_table("fit_raw", *r.fit));
    res.manifest["fit"] = {{"raw", fit_to_json(*r.fit)}};
  }
  return res;
}

struct OracleCheck {
  std::string name;
  json region;
  json event;
};

std::vector<OracleCheck> oracle_checks() {
  const json flower = micro_flower();
  const json rh = {{"shape", "rhombus"}, {"side", 4}};
  const json corners = {{0, 0}, {3, 0}, {0, 3}, {3, 3}};
  const auto hole = [](double x, double y) { return json{{"center", {x, y}}, {"radius", 0.1}}; };
  return {
      {"connection_pair", flower, {{"event", "connection"}, {"points", {{0, 0}, {1, 0}}}}},
      {"connection_triangle", flower, {{"event", "connection"}, {"points", {{0, 0}, {1, 0}, {0, 1}}}}},
      {"connection_far", flower, {{"event", "connection"}, {"points", {{2, 0}, {-2, 0}}}}},
      {"partition_pair_single", rh,
       {{"event", "partition"}, {"points", {{0, 0}, {3, 0}, {0, 3}}}, {"blocks", {{0, 1}, {2}}}}},
      {"one_arm", flower, {{"event", "one_arm"}, {"x", {0, 0}}, {"r", 1.6}}},
      {"annulus_crossing", flower, {{"event", "annulus_crossing"}, {"center", {0.0, 0.0}}, {"r", 0.6}, {"R", 1.6}}},
      {"open_circuit", flower, {{"event", "open_circuit"}, {"center", {0.0, 0.0}}, {"r", 0.8}, {"R", 1.9}}},
      {"closed_crossing", flower, {{"event", "closed_crossing"}, {"center", {0.0, 0.0}}, {"r", 0.8}, {"R", 1.9}}},
      {"four_arm", flower, {{"event", "four_arm"}, {"center", {0.0, 0.0}}, {"r", 0.8}, {"R", 1.9}}},
      {"disjoint_connections", flower,
       {{"event", "disjoint_connections"},
        {"holes", {hole(2.0, 0.0), hole(-1.0, 0.5 * kSqrt3 * 2), hole(-2.0, 0.0), hole(1.0, -0.5 * kSqrt3 * 2)}}}},
      {"correlation_2", flower, {{"event", "correlation"}, {"points", {{0, 0}, {2, 0}}}}},
      {"correlation_4", rh, {{"event", "correlation"}, {"points", corners}}},
      {"rhombus_crossing", rh, {{"event", "rhombus_crossing"}}},
  };
}

ExperimentResult run_oracle_suite(const ExperimentSpec& s, bool dry) {
  const uint64_t seeds = s.params.value("seeds", 100);
  const double need = s.params.value("pass_fraction", 0.99);
  if (seeds == 0) throw InvalidArgument("seeds must be at least 1");
  std::vector<std::pair<OracleCheck, std::pair<RegionPtr, EventSpec>>> checks;
  for (const OracleCheck& c : oracle_checks()) {
    RegionPtr reg = region_from_json(c.region);
    EventSpec ev = EventSpec::from_json(c.event);
    ev.validate(reg);
    if (reg->unmasked_count() > kEnumerationGuard)
      throw GuardError("oracle region has " + std::to_string(reg->unmasked_count()) + " free sites");
    checks.push_back({c, {reg, ev}});
  }
  ExperimentResult res;
  if (dry) return res;
  Table t{"oracle_suite", {"check", "exact", "exact_value", "mean_estimate", "pass_fraction", "passed"}, {}};
  bool all = true;
  for (const auto& [c, re] : checks) {
    const auto& [reg, ev] = re;
    const Rational exact = brute_force_probability(reg, ev);
    const double p = exact.value();
    uint64_t pass = 0;
    double sum = 0.0;
    for (uint64_t k = 0; k < seeds; ++k) {
      const Estimate e = estimate_event(ev, reg, s.n_samples, s.seed + k, threads_of(s));
      sum += e.mean;
      const double sig = std::sqrt(p * (1.0 - p) / static_cast<double>(s.n_samples));
      pass += sig > 0.0 ? std::abs(e.mean - p) < 4.0 * sig : e.mean == p;
    }
    const double frac = static_cast<double>(pass) / static_cast<double>(seeds);
    const bool ok = frac >= need;
    all = all && ok;
    t.rows.push_back({c.name, exact.str(), p, sum / static_cast<double>(seeds), frac, ok});
  }

  // Exact identities under enumeration.
  Table ex{"oracle_identities", {"identity", "lhs", "rhs", "holds"}, {}};
  {
    const RegionPtr rh = region_from_json({{"shape", "rhombus"}, {"side", 4}});
    const std::vector<SiteCoord> pts{{0, 0}, {3, 0}, {0, 3}, {3, 3}};
    uint64_t corr = 0, sum = 0, odd = 0;
    Enumeration(rh).for_each([&](const Configuration& cfg) {
      const ClusterLabels l = label(cfg);
      corr += correlation_partition(l, pts);
      sum += connection_event(l, pts);
      for (const auto& blocks : std::vector<std::vector<std::vector<size_t>>>{
               {{0, 1}, {2, 3}}, {{0, 2}, {1, 3}}, {{0, 3}, {1, 2}}})
        sum += partition_event(l, PartitionSpec{pts, blocks});
      odd += correlation_partition(l, {pts[0], pts[1], pts[2]}) != 0;
      return true;
    });
    ex.rows.push_back({"n_point_decomposition", std::to_string(corr), std::to_string(sum), corr == sum});
    ex.rows.push_back({"odd_correlation_vanishes", std::to_string(odd), "0", odd == 0});
    all = all && corr == sum && odd == 0;
  }
  {
    const RegionPtr fl = region_from_json(micro_flower());
    const AnnulusSpec ann{{0.0, 0.0}, 0.8, 1.9};
    const AnnulusGeometry geom(fl, ann);
    uint64_t bad = 0;
    Enumeration(fl).for_each([&](const Configuration& cfg) {
      bad += open_circuit_in_annulus(cfg, ann) != innermost_open_circuit(cfg, geom).circuit.has_value();
      return true;
    });
    ex.rows.push_back({"circuit_duality", std::to_string(bad), "0", bad == 0});
    all = all && bad == 0;
  }
  {
    const RegionPtr fl = region_from_json(micro_flower());
    const EventSpec ev = EventSpec::from_json({{"event", "connection"}, {"points", {{2, 0}, {1, 1}}}});
    const CouplingExactReport r =
        coupling_exact_check(fl, 0.8, 1.1, 2.0, [&](const Configuration& cfg) { return evaluate(ev, cfg); });
    ex.rows.push_back({"stopping_set", std::to_string(r.mismatches), "0", r.holds()});
    all = all && r.holds();
  }
  res.tables.push_back(t);
  res.tables.push_back(ex);
  res.passed = all;
  res.manifest["passed"] = all;
  return res;
}

ExperimentResult run_loop_export(const ExperimentSpec& s, bool dry) {
  const RegionPtr region = region_or(s, {{"shape", "box"}, {"half_width", 32}});
  if (s.n_samples > 1000) throw InvalidArgument("loop_export writes one file per sample; at most 1000");
  ExperimentResult res;
  if (dry) return res;
  Table t{"loops", {"replica", "loops", "edges", "discarded_edges", "interface_pairs"}, {}};
  for (uint64_t rep = 0; rep < s.n_samples; ++rep) {
    const Configuration cfg = sample(region, s.seed, rep);
    const LoopEnsemble ens = trace_interfaces(cfg);
    std::ostringstream os;
    write_loops_jsonl(os, ens);
    res.files.push_back({"loops_" + std::to_string(rep) + ".jsonl", os.str()});
    t.rows.push_back({rep, ens.loops.size(), ens.edge_count(), ens.discarded_edges, interface_pair_count(cfg)});
  }
  res.tables.push_back(t);
  return res;
}

ExperimentResult run_rhombus_crossing(const ExperimentSpec& s, bool dry) {
  const std::vector<double> sides = doubles(s.params, "sides");
  std::vector<RegionPtr> regions;
  for (double L : sides) {
    if (!(L >= 2.0) || L != std::floor(L)) throw InvalidArgument("rhombus sides must be integers >= 2");
    regions.push_back(LatticeRegion::rhombus(static_cast<int32_t>(L)));
  }
  ExperimentResult res;
  if (dry) return res;
  const EventSpec ev = EventSpec::from_json({{"event", "rhombus_crossing"}});
  Table t{"rhombus_crossing", {"L", "mean", "stderr", "n"}, {}};
  json ests = json::array();
  for (size_t k = 0; k < sides.size(); ++k) {
    const Estimate e = estimate_event(ev, regions[k], s.n_samples, s.seed, threads_of(s));
    t.rows.push_back({sides[k], e.mean, e.std_error, e.n_samples});
    json ej = estimate_to_json(e);
    ej["L"] = sides[k];
    ests.push_back(ej);
  }
  res.tables.push_back(t);
  res.manifest["estimates"] = ests;
  return res;
}

const std::vector<std::pair<std::string, Runner>>& runners() {
  static const std::vector<std::pair<std::string, Runner>> r{
      {"pi_scaling", run_pi_scaling},
      {"p2_scaling", run_p2_scaling},
      {"p3_ratio", run_p3_ratio},
      {"four_arm_scaling", run_four_arm_scaling},
      {"field_moments", run_field_moments},
      {"cutoff_scaling", run_cutoff_scaling},
      {"box_variance_scaling", run_box_variance_scaling},
      {"coupling_test", run_coupling_test},
      {"four_point_residual", run_four_point_residual},
      {"oracle_suite", run_oracle_suite},
      {"loop_export", run_loop_export},
      {"rhombus_crossing", run_rhombus_crossing},
  };
  return r;
}

Runner find_runner(const std::string& kind) {
  for (const auto& [k, r] : runners())
    if (k == kind) return r;
  return nullptr;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("spec must be a mapping");
  try {
    ExperimentSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.name = j.value("name", s.kind);
    if (j.contains("region")) s.region = j.at("region");
    if (j.contains("params")) s.params = j.at("params");
    if (!s.params.is_object()) throw InvalidArgument("params must be a mapping");
    if (j.contains("n_samples")) {
      const json& n = j.at("n_samples");
      if (!n.is_number_integer() || n.get<int64_t>() < 1) throw InvalidArgument("n_samples must be >= 1");
      s.n_samples = n.get<uint64_t>();
    }
    s.seed = j.value("seed", uint64_t{0});
    if (j.contains("threads")) {
      const json& t = j.at("threads");
      if (!t.is_number_integer() || t.get<int64_t>() < 1) throw InvalidArgument("threads must be >= 1");
      s.threads = t.get<unsigned>();
    }
    s.output = j.value("output", std::string("results"));
    s.format = j.value("format", std::string("csv"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed spec: ") + e.what());
  }
}

json ExperimentSpec::to_json() const {
  json j{{"name", name},     {"kind", kind},     {"params", params}, {"n_samples", n_samples},
         {"seed", seed},     {"output", output}, {"format", format}};
  j["region"] = region;
  if (threads != 0) j["threads"] = threads;
  return j;
}

json parse_spec_text(const std::string& text) {
  try {
    return yaml_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("cannot parse spec: ") + e.what());
  }
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ExperimentSpec::from_json(parse_spec_text(ss.str()));
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& r : runners()) v.push_back(r.first);
    return v;
  }();
  return k;
}

std::vector<Diagnostic> validate(const ExperimentSpec& s) {
  std::vector<Diagnostic> d;
  const Runner run = find_runner(s.kind);
  if (!run) {
    d.push_back({"kind", "unknown experiment kind '" + s.kind + "'"});
    return d;
  }
  if (s.n_samples < 1) d.push_back({"param", "n_samples must be >= 1"});
  if (s.format != "csv" && s.format != "json") d.push_back({"param", "format must be csv or json"});
  try {
    run(s, true);
  } catch (const HierarchyError& e) {
    d.push_back({"hierarchy", e.what()});
  } catch (const GuardError& e) {
    d.push_back({"guard", e.what()});
  } catch (const GeometryError& e) {
    d.push_back({"margin", e.what()});
  } catch (const InvalidArgument& e) {
    d.push_back({"param", e.what()});
  } catch (const nlohmann::json::exception& e) {
    d.push_back({"param", e.what()});
  }
  return d;
}

ExperimentResult run_experiment(const ExperimentSpec& s) {
  const Runner run = find_runner(s.kind);
  if (!run) throw InvalidArgument("unknown experiment kind '" + s.kind + "'");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  try {
    res = run(s, false);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json m{{"experiment", s.name},
         {"kind", s.kind},
         {"params", s.to_json()},
         {"seed", s.seed},
         {"n_samples", s.n_samples},
         {"threads", threads_of(s)},
         {"worker_ranges", ranges_json(s, s.n_samples)},
         {"chunk_replicas", kChunkReplicas},
         {"wall_time_s", wall}};
  if (!m.contains("estimates")) m["estimates"] = json::array();
  if (!m.contains("fit")) m["fit"] = json::object();
  for (auto& [k, v] : res.manifest.items()) m[k] = v;
  json tables = json::array();
  for (const Table& t : res.tables) tables.push_back(t.name);
  m["tables"] = tables;
  res.manifest = std::move(m);
  return res;
}

static std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
  std::string q = "\"";
  for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string table_csv(const Table& t) {
  std::string out;
  for (size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + csv_field(t.columns[c]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_field(cell(row[c]));
    out += '\n';
  }
  return out;
}

void write_result(const ExperimentResult& r, const std::string& dir, const std::string& format) {
  namespace fs = std::filesystem;
  if (format != "csv" && format != "json") throw InvalidArgument("unknown output format '" + format + "'");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const auto put = [&](const std::string& name, const std::string& body) {
    const fs::path p = fs::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    out << body;
    if (!out) throw IoError("cannot write '" + p.string() + "'");
  };
  for (const Table& t : r.tables) {
    if (format == "json") {
      json rows = json::array();
      for (const auto& row : t.rows) {
        json o = json::object();
        for (size_t c = 0; c < row.size(); ++c) o[t.columns[c]] = row[c];
        rows.push_back(o);
      }
      put(t.name + ".json", rows.dump(2) + "\n");
    } else {
      put(t.name + ".csv", table_csv(t));
    }
  }
  for (const auto& [name, body] : r.files) put(name, body);
  put("manifest.json", r.manifest.dump(2) + "\n");
}

}  // namespace percolab
