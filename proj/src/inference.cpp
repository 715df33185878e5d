#include "percolab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>

#include "percolab/colorfield.hpp"
#include "percolab/loops.hpp"

namespace percolab {

// ---------------------------------------------------------------------------
// Estimates

const char* kind_name(Estimate::Kind k) {
  switch (k) {
    case Estimate::Kind::binomial: return "binomial";
    case Estimate::Kind::delta_method: return "delta_method";
    case Estimate::Kind::batch_means: return "batch_means";
  }
  return "unknown";
}

json estimate_to_json(const Estimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"n", e.n_samples}, {"kind", kind_name(e.kind)}};
}

Estimate binomial_estimate(uint64_t hits, uint64_t n) {
  if (n == 0) throw InvalidArgument("estimate needs at least one sample");
  if (hits > n) throw InvalidArgument("more hits than samples");
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n, Estimate::Kind::binomial};
}

void JointCounts::add(const std::vector<bool>& ind) {
  const size_t m = k();
  if (ind.size() != m) throw InvalidArgument("indicator count mismatch");
  ++n;
  for (size_t a = 0; a < m; ++a) {
    if (!ind[a]) continue;
    ++single[a];
    for (size_t b = 0; b < m; ++b)
      if (ind[b]) ++both[a * m + b];
  }
}

void JointCounts::merge(const JointCounts& o) {
  if (o.k() != k()) throw InvalidArgument("indicator count mismatch");
  n += o.n;
  for (size_t a = 0; a < single.size(); ++a) single[a] += o.single[a];
  for (size_t a = 0; a < both.size(); ++a) both[a] += o.both[a];
}

Estimate JointCounts::proportion(size_t a) const { return binomial_estimate(single.at(a), n); }

namespace {

double cov(const JointCounts& c, size_t a, size_t b) {
  const double n = static_cast<double>(c.n);
  const double pa = static_cast<double>(c.single[a]) / n;
  const double pb = static_cast<double>(c.single[b]) / n;
  return static_cast<double>(c.both[a * c.k() + b]) / n - pa * pb;
}

}  // namespace

Estimate JointCounts::power_product(const std::vector<double>& e) const {
  if (n == 0) throw InvalidArgument("estimate needs at least one sample");
  if (e.size() != k()) throw InvalidArgument("exponent count mismatch");
  const double nn = static_cast<double>(n);
  double log_q = 0.0;
  bool zero = false;
  for (size_t a = 0; a < k(); ++a) {
    if (e[a] == 0.0) continue;
    if (single[a] == 0) {
      if (e[a] < 0.0) throw Error("ratio undefined: a denominator probability is zero");
      zero = true;
      continue;
    }
    log_q += e[a] * std::log(static_cast<double>(single[a]) / nn);
  }
  if (zero) return {0.0, 0.0, n, Estimate::Kind::delta_method};
  double var = 0.0;
  for (size_t a = 0; a < k(); ++a) {
    if (e[a] == 0.0) continue;
    const double pa = static_cast<double>(single[a]) / nn;
    for (size_t b = 0; b < k(); ++b) {
      if (e[b] == 0.0) continue;
      const double pb = static_cast<double>(single[b]) / nn;
      var += e[a] * e[b] * cov(*this, a, b) / (pa * pb);
    }
  }
  const double q = std::exp(log_q);
  return {q, q * std::sqrt(std::max(var, 0.0) / nn), n, Estimate::Kind::delta_method};
}

Estimate JointCounts::linear(const std::vector<double>& c) const {
  if (n == 0) throw InvalidArgument("estimate needs at least one sample");
  if (c.size() != k()) throw InvalidArgument("coefficient count mismatch");
  const double nn = static_cast<double>(n);
  double m = 0.0;
  double var = 0.0;
  for (size_t a = 0; a < k(); ++a) {
    m += c[a] * static_cast<double>(single[a]) / nn;
    for (size_t b = 0; b < k(); ++b) var += c[a] * c[b] * cov(*this, a, b);
  }
  return {m, std::sqrt(std::max(var, 0.0) / nn), n, Estimate::Kind::delta_method};
}

Estimate JointCounts::delta(double value, const std::vector<double>& g) const {
  if (n == 0) throw InvalidArgument("estimate needs at least one sample");
  if (g.size() != k()) throw InvalidArgument("gradient size mismatch");
  double var = 0.0;
  for (size_t a = 0; a < k(); ++a)
    for (size_t b = 0; b < k(); ++b) var += g[a] * g[b] * cov(*this, a, b);
  return {value, std::sqrt(std::max(var, 0.0) / static_cast<double>(n)), n, Estimate::Kind::delta_method};
}

void MomentSums::add(const std::vector<double>& v) {
  if (v.size() != k()) throw InvalidArgument("observable count mismatch");
  ++n;
  for (size_t a = 0; a < v.size(); ++a) {
    sum[a] += v[a];
    sumsq[a] += v[a] * v[a];
  }
}

void MomentSums::merge(const MomentSums& o) {
  if (o.k() != k()) throw InvalidArgument("observable count mismatch");
  n += o.n;
  for (size_t a = 0; a < sum.size(); ++a) {
    sum[a] += o.sum[a];
    sumsq[a] += o.sumsq[a];
  }
}

Estimate MomentSums::mean(size_t a) const {
  if (n == 0) throw InvalidArgument("estimate needs at least one sample");
  const double nn = static_cast<double>(n);
  const double m = sum.at(a) / nn;
  double se = 0.0;
  if (n > 1) {
    const double var = std::max(0.0, (sumsq[a] - nn * m * m) / (nn - 1.0));
    se = std::sqrt(var / nn);
  }
  return {m, se, n, Estimate::Kind::batch_means};
}

// ---------------------------------------------------------------------------
// Runner

unsigned default_threads() {
  if (const char* env = std::getenv("PERCOLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::vector<ReplicaRange>> worker_ranges(uint64_t first, uint64_t n, unsigned threads) {
  const uint64_t chunks = (n + kChunkReplicas - 1) / kChunkReplicas;
  if (threads == 0) threads = 1;
  threads = static_cast<unsigned>(std::min<uint64_t>(threads, std::max<uint64_t>(chunks, 1)));
  std::vector<std::vector<ReplicaRange>> out(threads);
  for (uint64_t c = 0; c < chunks; ++c)
    out[c % threads].push_back({first + c * kChunkReplicas, first + std::min(n, (c + 1) * kChunkReplicas)});
  return out;
}

// ---------------------------------------------------------------------------
// Event specifications

namespace {

constexpr std::pair<EventSpec::Kind, const char*> kEventNames[] = {
    {EventSpec::Kind::always, "always"},
    {EventSpec::Kind::never, "never"},
    {EventSpec::Kind::connection, "connection"},
    {EventSpec::Kind::partition, "partition"},
    {EventSpec::Kind::one_arm, "one_arm"},
    {EventSpec::Kind::annulus_crossing, "annulus_crossing"},
    {EventSpec::Kind::open_circuit, "open_circuit"},
    {EventSpec::Kind::closed_crossing, "closed_crossing"},
    {EventSpec::Kind::four_arm, "four_arm"},
    {EventSpec::Kind::disjoint_connections, "disjoint_connections"},
    {EventSpec::Kind::correlation, "correlation"},
    {EventSpec::Kind::rhombus_crossing, "rhombus_crossing"},
};

SiteCoord site_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("site must be [q, r]");
  return {j[0].get<int32_t>(), j[1].get<int32_t>()};
}

bool is_annulus_kind(EventSpec::Kind k) {
  return k == EventSpec::Kind::annulus_crossing || k == EventSpec::Kind::open_circuit ||
         k == EventSpec::Kind::closed_crossing || k == EventSpec::Kind::four_arm;
}

}  // namespace

const char* event_kind_name(EventSpec::Kind k) {
  for (const auto& [kind, name] : kEventNames)
    if (kind == k) return name;
  return "unknown";
}

EventSpec EventSpec::from_json(const json& j) {
  try {
    EventSpec s;
    const std::string name = j.at("event").get<std::string>();
    bool found = false;
    for (const auto& [kind, n] : kEventNames)
      if (name == n) {
        s.kind = kind;
        found = true;
      }
    if (!found) throw InvalidArgument("unknown event '" + name + "'");
    if (j.contains("points"))
      for (const json& p : j.at("points")) s.points.push_back(site_from_json(p));
    if (j.contains("blocks")) s.blocks = j.at("blocks").get<std::vector<std::vector<size_t>>>();
    if (s.kind == Kind::one_arm) {
      s.points = {site_from_json(j.at("x"))};
      s.annulus.r = j.at("r").get<double>();
    }
    if (is_annulus_kind(s.kind)) {
      s.annulus.center = j.contains("center") ? point_from_json(j.at("center")) : Point{};
      s.annulus.r = j.at("r").get<double>();
      s.annulus.R = j.at("R").get<double>();
    }
    if (s.kind == Kind::disjoint_connections) {
      const json& h = j.at("holes");
      if (!h.is_array() || h.size() != 4) throw InvalidArgument("disjoint_connections needs four holes");
      for (size_t i = 0; i < 4; ++i)
        s.holes.holes[i] = {point_from_json(h[i].at("center")), h[i].at("radius").get<double>()};
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed event: ") + e.what());
  }
}

json EventSpec::to_json() const {
  json j{{"event", event_kind_name(kind)}};
  const auto sites = [](const std::vector<SiteCoord>& v) {
    json a = json::array();
    for (const SiteCoord& s : v) a.push_back({s.q, s.r});
    return a;
  };
  switch (kind) {
    case Kind::connection:
    case Kind::correlation:
      j["points"] = sites(points);
      break;
    case Kind::partition:
      j["points"] = sites(points);
      j["blocks"] = blocks;
      break;
    case Kind::one_arm:
      j["x"] = {points.at(0).q, points.at(0).r};
      j["r"] = annulus.r;
      break;
    case Kind::disjoint_connections: {
      json h = json::array();
      for (const Disk& d : holes.holes) h.push_back({{"center", point_to_json(d.center)}, {"radius", d.radius}});
      j["holes"] = h;
      break;
    }
    default:
      if (is_annulus_kind(kind)) {
        j["center"] = point_to_json(annulus.center);
        j["r"] = annulus.r;
        j["R"] = annulus.R;
      }
  }
  return j;
}

void EventSpec::validate(const RegionPtr& region) const {
  const LatticeRegion& reg = *region;
  for (const SiteCoord& p : points)
    if (!reg.contains(p)) throw GeometryError("marked site outside the region");
  switch (kind) {
    case Kind::connection:
      if (points.size() < 2) throw InvalidArgument("connection event needs at least two points");
      break;
    case Kind::partition: {
      PartitionSpec ps{points, blocks};
      ps.validate();
      break;
    }
    case Kind::correlation:
      if (points.empty()) throw InvalidArgument("correlation needs at least one point");
      for (size_t i = 0; i < points.size(); ++i)
        for (size_t k = i + 1; k < points.size(); ++k)
          if (points[i] == points[k]) throw InvalidArgument("duplicate marked point");
      break;
    case Kind::one_arm:
      if (points.size() != 1) throw InvalidArgument("one_arm needs one site");
      if (!(annulus.r > 0.0)) throw InvalidArgument("one-arm radius must be positive");
      if (reg.covered_radius(reg.embed(points[0])) < annulus.r + reg.spacing())
        throw GeometryError("one-arm disk does not fit the region");
      break;
    case Kind::annulus_crossing:
      annulus.validate();
      if (reg.covered_radius(annulus.center) < annulus.R + reg.spacing())
        throw GeometryError("annulus does not fit the region");
      break;
    case Kind::open_circuit:
    case Kind::closed_crossing:
    case Kind::four_arm:
      AnnulusGeometry(region, annulus);
      break;
    case Kind::disjoint_connections:
      holes.validate();
      for (const Disk& d : holes.holes)
        if (reg.covered_radius(d.center) < d.radius + reg.spacing())
          throw GeometryError("hole does not fit the region");
      break;
    case Kind::rhombus_crossing:
      if (reg.shape() != RegionShape::rhombus) throw GeometryError("rhombus crossing needs a rhombus region");
      break;
    default:
      break;
  }
}

bool evaluate(const EventSpec& spec, const Configuration& config) {
  using K = EventSpec::Kind;
  switch (spec.kind) {
    case K::always: return true;
    case K::never: return false;
    case K::connection: return connection_event(label(config), spec.points);
    case K::partition: return partition_event(label(config), PartitionSpec{spec.points, spec.blocks});
    case K::correlation: return correlation_partition(label(config), spec.points) == 1;
    case K::one_arm: return one_arm(label(config), spec.points.at(0), spec.annulus.r);
    case K::annulus_crossing: return annulus_crossing(label(config), spec.annulus);
    case K::open_circuit: return open_circuit_in_annulus(config, spec.annulus);
    case K::closed_crossing: return !open_circuit_in_annulus(config, spec.annulus);
    case K::four_arm: return four_arm(config, spec.annulus);
    case K::disjoint_connections: return disjoint_connections(config, spec.holes);
    case K::rhombus_crossing: return rhombus_crossing(config);
  }
  return false;
}

namespace {

struct HitCount {
  uint64_t hits = 0;
  uint64_t n = 0;
  void merge(const HitCount& o) {
    hits += o.hits;
    n += o.n;
  }
};

}  // namespace

Estimate estimate_event(const EventSpec& spec, RegionPtr region, uint64_t n_samples, uint64_t seed,
                        unsigned threads, uint64_t first_replica) {
  if (n_samples == 0) throw InvalidArgument("n_samples must be at least 1");
  spec.validate(region);
  const HitCount c = run_replicas(first_replica, n_samples, threads, HitCount{}, [&] {
    return [&](uint64_t b, uint64_t e) {
      HitCount h;
      for (uint64_t rep = b; rep < e; ++rep) {
        h.hits += evaluate(spec, sample(region, seed, rep));
        ++h.n;
      }
      return h;
    };
  });
  return binomial_estimate(c.hits, c.n);
}

std::vector<Estimate> estimate_pi_scales(const std::vector<double>& radii, RegionPtr region,
                                         uint64_t n_samples, uint64_t seed, unsigned threads) {
  if (radii.empty()) throw InvalidArgument("no radii");
  if (n_samples == 0) throw InvalidArgument("n_samples must be at least 1");
  for (double r : radii)
    if (!(r > 0.0)) throw InvalidArgument("radius must be positive");
  const LatticeRegion& reg = *region;
  const SiteCoord xs = nearest_site(reg.center(), reg);
  if (!reg.contains(xs)) throw GeometryError("region has no central site");
  const size_t x = static_cast<size_t>(reg.index_of(xs));
  const Point p = reg.embed(xs);
  const double rmax = *std::max_element(radii.begin(), radii.end());
  if (reg.covered_radius(p) < rmax + reg.spacing()) throw GeometryError("one-arm disk does not fit the region");
  const JointCounts c = run_replicas(0, n_samples, threads, JointCounts(radii.size()), [&] {
    return [&, state = LazySample(region), ex = ClusterExplorer(region)](uint64_t b, uint64_t e) mutable {
      JointCounts jc(radii.size());
      std::vector<bool> ind(radii.size());
      for (uint64_t rep = b; rep < e; ++rep) {
        state.reset(seed, rep);
        const double reach = cluster_reach(state, ex, x, p, rmax);
        for (size_t k = 0; k < radii.size(); ++k) ind[k] = reach >= radii[k] - 1e-12;
        jc.add(ind);
      }
      return jc;
    };
  });
  std::vector<Estimate> out;
  for (size_t k = 0; k < radii.size(); ++k) out.push_back(c.proportion(k));
  return out;
}

Estimate estimate_pi(double r, RegionPtr region, uint64_t n_samples, uint64_t seed, unsigned threads) {
  return estimate_pi_scales({r}, std::move(region), n_samples, seed, threads).front();
}

// ---------------------------------------------------------------------------
// Fitting

LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& sigma) {
  const size_t m = x.size();
  if (y.size() != m || sigma.size() != m) throw InvalidArgument("fit input sizes differ");
  if (m < 3) throw InvalidArgument("fit needs at least three points");
  const bool unit = std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; });
  std::vector<double> w(m, 1.0);
  if (!unit) {
    for (size_t i = 0; i < m; ++i) {
      if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
        throw InvalidArgument("fit weights must be positive");
      w[i] = 1.0 / (sigma[i] * sigma[i]);
    }
  }
  double sw = 0, sx = 0, sy = 0;
  for (size_t i = 0; i < m; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / sw;
  const double ym = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < m; ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    syy += w[i] * (y[i] - ym) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit needs at least two distinct abscissae");
  LinearFit f;
  f.points = m;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  for (size_t i = 0; i < m; ++i) {
    const double res = y[i] - f.intercept - f.slope * x[i];
    f.chi2 += w[i] * res * res;
  }
  const double dof = static_cast<double>(m - 2);
  const double scale = unit ? f.chi2 / dof : std::max(1.0, f.chi2 / dof);
  f.slope_std_error = std::sqrt(scale / sxx);
  f.intercept_std_error = std::sqrt(scale * (1.0 / sw + xm * xm / sxx));
  f.r2 = syy > 0.0 ? 1.0 - f.chi2 / syy : 1.0;
  return f;
}

PowerLawFit fit_power_law(const std::vector<ScalePoint>& points) {
  std::vector<double> x, y, s;
  for (const ScalePoint& p : points) {
    if (!(p.scale > 0.0)) throw InvalidArgument("scales must be positive");
    if (!(p.value.mean > 0.0)) throw InvalidArgument("power-law fit needs positive means");
    x.push_back(std::log(p.scale));
    y.push_back(std::log(p.value.mean));
    s.push_back(p.value.std_error / p.value.mean);
  }
  return weighted_linear_fit(x, y, s);
}

StabilizedFit fit_power_law_stabilized(std::vector<ScalePoint> points) {
  std::sort(points.begin(), points.end(),
            [](const ScalePoint& a, const ScalePoint& b) { return a.scale < b.scale; });
  StabilizedFit out;
  out.raw = fit_power_law(points);
  out.stabilized = out.raw;
  while (points.size() > 3) {
    points.erase(points.begin());
    const PowerLawFit next = fit_power_law(points);
    if (std::abs(next.slope - out.stabilized.slope) <= out.stabilized.slope_std_error) break;
    out.stabilized = next;
    ++out.dropped;
  }
  return out;
}

json fit_to_json(const LinearFit& f) {
  return {{"slope", f.slope},         {"slope_stderr", f.slope_std_error},
          {"intercept", f.intercept}, {"intercept_stderr", f.intercept_std_error},
          {"r2", f.r2},               {"chi2", f.chi2},
          {"points", f.points}};
}

// ---------------------------------------------------------------------------
// Connection probabilities

Triangle snap_triangle(const LatticeRegion& region, Point origin, double d) {
  if (!(d > 0.0)) throw InvalidArgument("triangle side must be positive");
  const std::array<Point, 3> ideal{origin, origin + Point{d, 0.0}, origin + Point{0.5 * d, 0.5 * kSqrt3 * d}};
  Triangle t;
  for (size_t i = 0; i < 3; ++i) {
    t.sites[i] = nearest_site(ideal[i], region);
    t.snap_error = std::max(t.snap_error, distance(region.embed(t.sites[i]), ideal[i]));
  }
  const auto dist = [&](size_t i, size_t j) { return distance(region.embed(t.sites[i]), region.embed(t.sites[j])); };
  t.sides = {dist(0, 1), dist(0, 2), dist(1, 2)};
  if (t.sites[0] == t.sites[1] || t.sites[0] == t.sites[2] || t.sites[1] == t.sites[2])
    throw InvalidArgument("degenerate triangle");
  return t;
}

JointCounts connection_counts(const std::vector<SiteCoord>& points,
                              const std::vector<std::vector<size_t>>& events, RegionPtr region,
                              uint64_t n_samples, uint64_t seed, unsigned threads) {
  if (n_samples == 0) throw InvalidArgument("n_samples must be at least 1");
  const LatticeRegion& reg = *region;
  std::vector<size_t> idx;
  for (const SiteCoord& p : points) {
    const int64_t i = reg.index_of(p);
    if (i < 0) throw GeometryError("marked site outside the region");
    idx.push_back(static_cast<size_t>(i));
  }
  for (const auto& ev : events)
    for (size_t k : ev)
      if (k >= points.size()) throw InvalidArgument("event index out of range");
  return run_replicas(0, n_samples, threads, JointCounts(events.size()), [&] {
    return [&, state = LazySample(region), finder = PatternFinder(region)](uint64_t b, uint64_t e) mutable {
      JointCounts jc(events.size());
      std::vector<bool> ind(events.size());
      for (uint64_t rep = b; rep < e; ++rep) {
        state.reset(seed, rep);
        const std::vector<int> id = finder.find(state, idx);
        for (size_t k = 0; k < events.size(); ++k) {
          const auto& ev = events[k];
          bool ok = id[ev.front()] >= 0;
          for (size_t m : ev) ok = ok && id[m] == id[ev.front()];
          ind[k] = ok;
        }
        jc.add(ind);
      }
      return jc;
    };
  });
}

RatioResult estimate_ratio_R(double d, RegionPtr region, uint64_t n_samples, uint64_t seed,
                             unsigned threads, Point origin) {
  const LatticeRegion& reg = *region;
  RatioResult out;
  out.triangle = snap_triangle(reg, origin, d);
  const Point c = reg.embed(out.triangle.sites[0]) + Point{0.5 * d, 0.5 * d / kSqrt3};
  if (reg.covered_radius(c) < 3.0 * d) throw GeometryError("triangle needs a margin of 3d inside the region");
  const std::vector<SiteCoord> pts(out.triangle.sites.begin(), out.triangle.sites.end());
  out.counts = connection_counts(pts, {{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}}, region, n_samples, seed, threads);
  out.p12 = out.counts.proportion(0);
  out.p13 = out.counts.proportion(1);
  out.p23 = out.counts.proportion(2);
  out.p123 = out.counts.proportion(3);
  out.ratio = out.counts.power_product({-0.5, -0.5, -0.5, 1.0});
  return out;
}

// ---------------------------------------------------------------------------
// Mobius maps

void MobiusMap::validate() const {
  if (std::abs(A * D - B * C) == 0.0) throw InvalidArgument("singular Mobius map");
}

std::complex<double> MobiusMap::operator()(std::complex<double> z) const {
  const std::complex<double> den = C * z + D;
  if (std::abs(den) == 0.0) throw InvalidArgument("point at the pole of the Mobius map");
  return (A * z + B) / den;
}

std::complex<double> MobiusMap::derivative(std::complex<double> z) const {
  const std::complex<double> den = C * z + D;
  if (std::abs(den) == 0.0) throw InvalidArgument("point at the pole of the Mobius map");
  return (A * D - B * C) / (den * den);
}

double mobius_factor(const MobiusMap& m, const std::vector<Point>& points, double exponent) {
  m.validate();
  double log_f = 0.0;
  for (const Point& p : points) log_f -= exponent * std::log(std::abs(m.derivative({p.x, p.y})));
  return std::exp(log_f);
}

// ---------------------------------------------------------------------------
// Exact enumeration

Rational Rational::reduced(uint64_t num, uint64_t den) {
  if (den == 0) throw InvalidArgument("zero denominator");
  const uint64_t g = std::gcd(num, den);
  return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

std::string Rational::str() const { return std::to_string(num) + "/" + std::to_string(den); }

bool Rational::operator==(const Rational& o) const {
  const Rational a = reduced(num, den);
  const Rational b = reduced(o.num, o.den);
  return a.num == b.num && a.den == b.den;
}

Rational brute_force_probability(RegionPtr region, const ConfigPredicate& event) {
  const Enumeration en(region);
  uint64_t hits = 0;
  en.for_each([&](const Configuration& c) {
    hits += event(c);
    return true;
  });
  return Rational::reduced(hits, en.count());
}

Rational brute_force_probability(RegionPtr region, const EventSpec& spec) {
  spec.validate(region);
  return brute_force_probability(region, [&](const Configuration& c) { return evaluate(spec, c); });
}

// ---------------------------------------------------------------------------
// Stopping-set test

namespace {

std::vector<uint64_t> zone_bits(const AnnulusGeometry& geom, AnnulusGeometry::Zone z) {
  const LatticeRegion& reg = geom.region();
  std::vector<uint64_t> bits(reg.word_count(), 0);
  for (size_t i = 0; i < reg.size(); ++i)
    if (geom.zone(i) == z) bits[i >> 6] |= uint64_t{1} << (i & 63);
  return bits;
}

Configuration restricted(const Configuration& c, const std::vector<uint64_t>& keep) {
  std::vector<uint64_t> w = c.words();
  for (size_t k = 0; k < w.size(); ++k) w[k] &= keep[k];
  return Configuration(c.region_ptr(), std::move(w), c.seed(), c.replica());
}

}  // namespace

CouplingExactReport coupling_exact_check(RegionPtr region, double eta, double delta, double eps,
                                         const ConfigPredicate& outside_event) {
  if (!(eps > delta)) throw InvalidArgument("eps must exceed delta");
  const LatticeRegion& reg = *region;
  const SiteCoord o = nearest_site(reg.center(), reg);
  const Point c = reg.embed(o);
  const AnnulusGeometry geom(region, {c, eta, delta});
  const std::vector<uint64_t> keep = zone_bits(geom, AnnulusGeometry::outside);
  const Enumeration en(region);

  struct Counts {
    uint64_t total = 0, c1 = 0, c1a = 0, c2 = 0, c2a = 0;
  };
  // key: circuit length, circuit sites, then (site, state) over core and explored sites.
  std::map<std::vector<uint64_t>, Counts> classes;
  en.for_each([&](const Configuration& cfg) {
    const CircuitSearch cs = innermost_open_circuit(cfg, geom);
    if (!cs.circuit) return true;
    std::vector<uint64_t> key{cs.circuit->size()};
    key.insert(key.end(), cs.circuit->begin(), cs.circuit->end());
    for (size_t i : geom.core_sites()) key.push_back(2 * i + cfg.open(i));
    for (size_t i : cs.explored) key.push_back(2 * i + cfg.open(i));
    const ClusterLabels labels = label(cfg);
    const bool c1 = one_arm(labels, o, eps);
    // B_eta <-> dB_eps, with B_eta read as the core sites, which every circuit encloses.
    bool c2 = false;
    std::vector<uint8_t> from_core(labels.cluster_count(), 0);
    for (size_t i : geom.core_sites())
      if (labels.cluster_id(i) >= 0) from_core[static_cast<size_t>(labels.cluster_id(i))] = 1;
    for (size_t i = 0; i < reg.size() && !c2; ++i) {
      const int32_t id = labels.cluster_id(i);
      c2 = id >= 0 && from_core[static_cast<size_t>(id)] && detail::hex_max_sq(reg, reg.site(i), c) >= eps * eps - 1e-12;
    }
    const bool a = outside_event(restricted(cfg, keep));
    Counts& k = classes[key];
    ++k.total;
    k.c1 += c1;
    k.c1a += c1 && a;
    k.c2 += c2;
    k.c2a += c2 && a;
    return true;
  });

  CouplingExactReport rep;
  std::vector<std::vector<size_t>> circuits;
  for (const auto& [key, k] : classes) {
    const size_t len = key[0];
    std::vector<size_t> gamma(key.begin() + 1, key.begin() + 1 + static_cast<std::ptrdiff_t>(len));
    if (std::find(circuits.begin(), circuits.end(), gamma) == circuits.end()) circuits.push_back(gamma);
    if (k.c1 == 0 && k.c2 == 0) continue;
    ++rep.classes;
    std::vector<int8_t> fixed(reg.size(), -1);
    for (size_t t = 1 + len; t < key.size(); ++t) fixed[key[t] / 2] = static_cast<int8_t>(key[t] & 1);
    std::vector<size_t> rest;
    for (size_t i = 0; i < reg.size(); ++i)
      if (fixed[i] < 0 && !reg.masked(i)) rest.push_back(i);
    if (k.total != (uint64_t{1} << rest.size())) {
      ++rep.mismatches;
      continue;
    }
    // Reference: gamma joined to dB_eps through open exterior sites.
    uint64_t ref = 0, ref_a = 0;
    std::vector<uint64_t> words(reg.word_count());
    std::vector<uint8_t> seen(reg.size());
    std::vector<size_t> queue;
    for (uint64_t m = 0; m < (uint64_t{1} << rest.size()); ++m) {
      std::fill(words.begin(), words.end(), 0);
      for (size_t i = 0; i < reg.size(); ++i)
        if (fixed[i] == 1) words[i >> 6] |= uint64_t{1} << (i & 63);
      for (size_t t = 0; t < rest.size(); ++t)
        if ((m >> t) & 1u) words[rest[t] >> 6] |= uint64_t{1} << (rest[t] & 63);
      const Configuration cfg(region, words);
      std::fill(seen.begin(), seen.end(), 0);
      queue.assign(gamma.begin(), gamma.end());
      for (size_t g : gamma) seen[g] = 1;
      bool reach = false;
      for (size_t h = 0; h < queue.size() && !reach; ++h) {
        const SiteCoord s = reg.site(queue[h]);
        if (reaches_circle(reg, s, c, eps)) reach = true;
        for (const SiteCoord& d : kDirections) {
          const int64_t j = reg.index_of(s + d);
          if (j < 0) continue;
          const auto u = static_cast<size_t>(j);
          if (seen[u] || fixed[u] >= 0 || !cfg.open(u)) continue;
          seen[u] = 1;
          queue.push_back(u);
        }
      }
      if (!reach) continue;
      ++ref;
      ref_a += outside_event(restricted(cfg, keep));
    }
    const auto same = [&](uint64_t num, uint64_t den) { return num * ref == ref_a * den; };
    if (ref == 0 || (k.c1 > 0 && !same(k.c1a, k.c1)) || (k.c2 > 0 && !same(k.c2a, k.c2)))
      ++rep.mismatches;
  }
  rep.circuits = circuits.size();
  return rep;
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

struct Records {
  std::vector<uint8_t> flags;
  std::vector<uint32_t> cls;
  void merge(const Records& o) {
    flags.insert(flags.end(), o.flags.begin(), o.flags.end());
    cls.insert(cls.end(), o.cls.begin(), o.cls.end());
  }
};

// Enclosed area of a site cycle in elementary lattice triangles.
uint32_t circuit_class(const LatticeRegion& reg, const std::vector<size_t>& cyc) {
  double a = 0.0;
  for (size_t i = 0; i < cyc.size(); ++i) {
    const Point p = reg.embed_index(cyc[i]);
    const Point q = reg.embed_index(cyc[(i + 1) % cyc.size()]);
    a += p.x * q.y - p.y * q.x;
  }
  const double tri = std::sqrt(3.0) / 4.0 * reg.spacing() * reg.spacing();
  return static_cast<uint32_t>(std::lround(std::abs(a) / 2.0 / tri));
}

}  // namespace

CouplingStatReport coupling_statistical_test(RegionPtr region, double eta, double delta, double eps,
                                             const EventSpec& outside_event, uint64_t target,
                                             uint64_t seed, unsigned threads) {
  using K = EventSpec::Kind;
  if (target == 0) throw InvalidArgument("target must be at least 1");
  if (!(eps > delta)) throw InvalidArgument("eps must exceed delta");
  const K ak = outside_event.kind;
  if (ak != K::always && ak != K::never && ak != K::open_circuit && ak != K::closed_crossing &&
      ak != K::four_arm)
    throw InvalidArgument("outside event must be an annulus event or a constant");
  const LatticeRegion& reg = *region;
  const SiteCoord o = nearest_site(reg.center(), reg);
  const size_t oi = static_cast<size_t>(reg.index_of(o));
  const Point c = reg.embed(o);
  const AnnulusGeometry geom(region, {c, eta, delta});
  if (reg.covered_radius(c) < eps + reg.spacing()) throw GeometryError("eps disk does not fit the region");
  std::optional<AnnulusGeometry> outer_geom;
  if (ak != K::always && ak != K::never) {
    if (outside_event.annulus.r < delta + 2.0 * reg.spacing() ||
        distance(outside_event.annulus.center, c) > 1e-9)
      throw GeometryError("outside event must be centered and read only sites outside B_delta");
    outer_geom.emplace(region, outside_event.annulus);
  }
  // Sites standing for B_eta: the core, so that every path to dB_eps crosses the circuit.
  const std::vector<size_t>& sources = geom.core_sites();

  // Even replicas feed the point ensemble, odd ones the annulus ensemble.
  const auto make_worker = [&] {
    return [&, state = LazySample(region), ex = ClusterExplorer(region)](uint64_t b, uint64_t e) mutable {
      Records r;
      for (uint64_t rep = b; rep < e; ++rep) {
        state.reset(seed, rep);
        const CircuitSearch cs = innermost_open_circuit(state, geom);
        if (!cs.circuit) {
          r.flags.push_back(0);
          r.cls.push_back(0);
          continue;
        }
        r.cls.push_back(circuit_class(reg, *cs.circuit));
        bool cond;
        if (rep % 2 == 0) {
          cond = cluster_reach(state, ex, oi, c, eps) >= eps - 1e-12;
        } else {
          cond = false;
          ex.clear();
          for (size_t s : sources) {
            double best = 0.0;
            ex.explore_more([&](size_t i) { return state.open(i); }, s, [&](size_t, SiteCoord t) {
              best = std::max(best, detail::hex_max_sq(reg, t, c));
              return best < eps * eps;
            });
            if (std::sqrt(best) >= eps - 1e-12) {
              cond = true;
              break;
            }
          }
        }
        uint8_t f = 0;
        if (cond) {
          f = 1;
          bool a = ak == K::always;
          if (outer_geom) {
            const bool closed = closed_crossing(state, *outer_geom, ex);
            a = ak == K::open_circuit ? !closed
                : ak == K::closed_crossing ? closed
                                           : four_arm(state, *outer_geom, ex);
          }
          f |= a ? 2 : 0;
        }
        r.flags.push_back(f);
      }
      return r;
    };
  };

  CouplingStatReport out;
  uint64_t n1 = 0, a1 = 0, n2 = 0, a2 = 0;
  // Per circuit class: accepted and hits in each ensemble.
  std::map<uint32_t, std::array<uint64_t, 4>> strata;
  const uint64_t batch = 16 * kChunkReplicas;
  while (n1 < target || n2 < target) {
    const Records rec = run_replicas(out.drawn, batch, threads, Records{}, make_worker);
    for (size_t k = 0; k < rec.flags.size(); ++k) {
      const uint64_t rep = out.drawn + k;
      const uint8_t f = rec.flags[k];
      if (!(f & 1)) continue;
      const uint64_t hit = (f >> 1) & 1;
      auto& st = strata[rec.cls[k]];
      if (rep % 2 == 0 && n1 < target) {
        ++n1;
        a1 += hit;
        ++st[0];
        st[1] += hit;
      } else if (rep % 2 == 1 && n2 < target) {
        ++n2;
        a2 += hit;
        ++st[2];
        st[3] += hit;
      }
    }
    out.drawn += batch;
    const double half = static_cast<double>(out.drawn) / 2.0;
    if (out.drawn >= 16 * batch &&
        (static_cast<double>(n1) < 1e-4 * half || static_cast<double>(n2) < 1e-4 * half))
      throw Error("rejection acceptance rate below 1e-4");
  }
  out.accepted_point = n1;
  out.accepted_annulus = n2;
  out.freq_point = binomial_estimate(a1, n1);
  out.freq_annulus = binomial_estimate(a2, n2);
  const double p = static_cast<double>(a1 + a2) / static_cast<double>(n1 + n2);
  const double den = std::sqrt(p * (1.0 - p) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  out.z_pooled = den > 0.0 ? (out.freq_point.mean - out.freq_annulus.mean) / den : 0.0;
  out.p_pooled = two_sided_normal_p(out.z_pooled);

  // Cochran-Mantel-Haenszel over circuit classes.
  double obs = 0.0, expect = 0.0, var = 0.0;
  for (const auto& [cls, st] : strata) {
    const auto m1 = static_cast<double>(st[0]), h1 = static_cast<double>(st[1]);
    const auto m2 = static_cast<double>(st[2]), h2 = static_cast<double>(st[3]);
    const double N = m1 + m2, H = h1 + h2;
    if (m1 == 0 || m2 == 0) continue;
    ++out.strata;
    obs += h1;
    expect += m1 * H / N;
    var += m1 * m2 * H * (N - H) / (N * N * (N - 1.0));
  }
  out.z = var > 0.0 ? (obs - expect) / std::sqrt(var) : 0.0;
  out.p_value = two_sided_normal_p(out.z);
  return out;
}

// ---------------------------------------------------------------------------
// Four-point residual

namespace {

// Indicators per separation: 12, 34, 1234, 13|24, 14|23, 12|34.
constexpr size_t kFourInd = 6;

struct FourAcc {
  std::vector<JointCounts> counts;
  std::vector<MomentSums> direct;
  void merge(const FourAcc& o) {
    for (size_t k = 0; k < counts.size(); ++k) {
      counts[k].merge(o.counts[k]);
      direct[k].merge(o.direct[k]);
    }
  }
};

}  // namespace

FourPointResult four_point_residual_experiment(const std::vector<int32_t>& separations, SiteCoord x3,
                                               SiteCoord x4, RegionPtr region, uint64_t n_samples,
                                               uint64_t seed, unsigned threads) {
  if (separations.empty()) throw InvalidArgument("no separations");
  if (n_samples == 0) throw InvalidArgument("n_samples must be at least 1");
  const LatticeRegion& reg = *region;
  const SiteCoord x1 = nearest_site(reg.center(), reg);
  const Point p1 = reg.embed(x1);
  const double l = std::min({distance(p1, reg.embed(x3)), distance(p1, reg.embed(x4)),
                             distance(reg.embed(x3), reg.embed(x4))});
  const int32_t smax = *std::max_element(separations.begin(), separations.end());
  for (int32_t s : separations)
    if (s < 1) throw InvalidArgument("separations must be positive");
  if (2.0 * smax > l) throw InvalidArgument("separations violate the scale hierarchy");
  std::vector<std::array<size_t, 4>> idx;
  for (int32_t s : separations) {
    std::array<SiteCoord, 4> pts{x1, x1 + SiteCoord{s, 0}, x3, x4};
    std::array<size_t, 4> ix{};
    for (size_t k = 0; k < 4; ++k) {
      const int64_t i = reg.index_of(pts[k]);
      if (i < 0) throw GeometryError("marked site outside the region");
      ix[k] = static_cast<size_t>(i);
    }
    idx.push_back(ix);
  }
  const size_t ns = separations.size();
  FourAcc init{std::vector<JointCounts>(ns, JointCounts(kFourInd)), std::vector<MomentSums>(ns, MomentSums(1))};
  const rng::Key sign_key = rng::make_key(seed, rng::Stream::signs);
  const FourAcc acc = run_replicas(0, n_samples, threads, init, [&] {
    return [&, state = LazySample(region), finder = PatternFinder(region)](uint64_t b, uint64_t e) mutable {
      FourAcc a = init;
      std::vector<bool> ind(kFourInd);
      for (uint64_t rep = b; rep < e; ++rep) {
        state.reset(seed, rep);
        const uint64_t bits = rng::word64(sign_key, 0, rep);
        for (size_t k = 0; k < ns; ++k) {
          const std::vector<size_t> pts(idx[k].begin(), idx[k].end());
          const std::vector<int> id = finder.find(state, pts);
          const auto j = [&](size_t u, size_t v) { return id[u] >= 0 && id[u] == id[v]; };
          ind[0] = j(0, 1);
          ind[1] = j(2, 3);
          ind[2] = j(0, 1) && j(0, 2) && j(0, 3);
          ind[3] = j(0, 2) && j(1, 3) && !j(0, 1);
          ind[4] = j(0, 3) && j(1, 2) && !j(0, 1);
          ind[5] = j(0, 1) && j(2, 3) && !j(0, 2);
          a.counts[k].add(ind);
          double prod = 1.0;
          for (int v : id) prod *= v < 0 ? 0.0 : (((bits >> v) & 1u) ? 1.0 : -1.0);
          a.direct[k].add({prod});
        }
      }
      return a;
    };
  });
  FourPointResult out;
  std::vector<ScalePoint> pts;
  for (size_t k = 0; k < ns; ++k) {
    const JointCounts& jc = acc.counts[k];
    FourPointRow row;
    row.separation = separations[k];
    row.p12 = jc.proportion(0);
    row.p34 = jc.proportion(1);
    row.p1234 = jc.proportion(2);
    row.p13_24 = jc.proportion(3);
    row.p14_23 = jc.proportion(4);
    row.p12_34 = jc.proportion(5);
    row.c4_partition = jc.linear({0, 0, 1, 1, 1, 1});
    row.c4_direct = acc.direct[k].mean(0);
    row.residual = jc.linear({0, 0, 0, 1, 1, 0});
    row.product_residual = jc.delta(row.c4_partition.mean - row.p12.mean * row.p34.mean,
                                    {-row.p34.mean, -row.p12.mean, 1, 1, 1, 1});
    pts.push_back({row.separation, row.residual});
    out.rows.push_back(row);
  }
  out.monotone = true;
  for (size_t k = 1; k < ns; ++k)
    if (!(out.rows[k].residual.mean > out.rows[k - 1].residual.mean)) out.monotone = false;
  if (ns >= 3 && std::all_of(pts.begin(), pts.end(), [](const ScalePoint& p) { return p.value.mean > 0.0; })) {
    try {
      out.fit = fit_power_law(pts);
    } catch (const InvalidArgument&) {
      out.fit.reset();
    }
  }
  return out;
}

}  // namespace percolab
