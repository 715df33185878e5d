#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "percolab/events.hpp"
#include "percolab/serialization.hpp"

namespace percolab {

// ---------------------------------------------------------------------------
// Estimates and mergeable summaries

struct Estimate {
  enum class Kind { binomial, delta_method, batch_means };
  double mean = 0.0;
  double std_error = 0.0;
  uint64_t n_samples = 0;
  Kind kind = Kind::binomial;
};

const char* kind_name(Estimate::Kind k);
json estimate_to_json(const Estimate& e);

Estimate binomial_estimate(uint64_t hits, uint64_t n);

/// Counts of k indicators and of all their pairwise conjunctions. Merging
/// is exact, so any split of the replicas gives the same totals.
struct JointCounts {
  uint64_t n = 0;
  std::vector<uint64_t> single;
  std::vector<uint64_t> both;  // k x k, both[a*k+b]

  JointCounts() = default;
  explicit JointCounts(size_t k) : single(k, 0), both(k * k, 0) {}
  size_t k() const { return single.size(); }
  void add(const std::vector<bool>& ind);
  void merge(const JointCounts& o);
  Estimate proportion(size_t a) const;
  /// Delta-method estimate of prod_a p_a^{e_a}.
  Estimate power_product(const std::vector<double>& exponents) const;
  /// Delta-method estimate of sum_a c_a p_a (exact linear combination).
  Estimate linear(const std::vector<double>& coeffs) const;
  /// Delta-method estimate of a smooth function with the given value and
  /// gradient at the observed proportions.
  Estimate delta(double value, const std::vector<double>& grad) const;
};

/// Sums and sums of squares of k real observables.
struct MomentSums {
  uint64_t n = 0;
  std::vector<double> sum;
  std::vector<double> sumsq;

  MomentSums() = default;
  explicit MomentSums(size_t k) : sum(k, 0.0), sumsq(k, 0.0) {}
  size_t k() const { return sum.size(); }
  void add(const std::vector<double>& v);
  void merge(const MomentSums& o);
  Estimate mean(size_t a) const;
};

// ---------------------------------------------------------------------------
// Replica runner

inline constexpr uint64_t kChunkReplicas = 256;

/// Default worker count: PERCOLAB_THREADS if set, else the hardware count.
unsigned default_threads();

struct ReplicaRange {
  uint64_t begin = 0;
  uint64_t end = 0;
};

/// Replica ranges handled by each worker (chunk c goes to worker c mod T).
std::vector<std::vector<ReplicaRange>> worker_ranges(uint64_t first, uint64_t n, unsigned threads);

/// Runs replicas [first, first+n) in fixed-size chunks. `make_worker()` is
/// called once per thread and returns a callable (begin, end) -> Acc.
/// Chunk results are merged in chunk order, so the result does not depend
/// on the thread count.
template <class Acc, class MakeWorker>
Acc run_replicas(uint64_t first, uint64_t n, unsigned threads, Acc init, MakeWorker&& make_worker) {
  const uint64_t chunks = (n + kChunkReplicas - 1) / kChunkReplicas;
  std::vector<std::optional<Acc>> part(chunks);
  if (threads == 0) threads = 1;
  threads = static_cast<unsigned>(std::min<uint64_t>(threads, std::max<uint64_t>(chunks, 1)));
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  const auto body = [&](unsigned w) {
    try {
      auto work = make_worker();
      for (uint64_t c = w; c < chunks && !failed.load(); c += threads) {
        const uint64_t b = first + c * kChunkReplicas;
        const uint64_t e = first + std::min(n, (c + 1) * kChunkReplicas);
        part[c].emplace(work(b, e));
      }
    } catch (...) {
      if (!failed.exchange(true)) err = std::current_exception();
    }
  };
  if (threads == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  Acc total = std::move(init);
  for (auto& p : part) total.merge(*p);
  return total;
}

// ---------------------------------------------------------------------------
// Event specifications

struct EventSpec {
  enum class Kind {
    always,
    never,
    connection,
    partition,
    one_arm,
    annulus_crossing,
    open_circuit,
    closed_crossing,
    four_arm,
    disjoint_connections,
    correlation,
    rhombus_crossing,
  };
  Kind kind = Kind::always;
  std::vector<SiteCoord> points;          // connection, partition, correlation; one_arm uses points[0]
  std::vector<std::vector<size_t>> blocks;  // partition
  AnnulusSpec annulus;                    // annulus events; one_arm uses annulus.r
  DisjointSpec holes;

  static EventSpec from_json(const json& j);
  json to_json() const;
  /// Throws InvalidArgument / GeometryError if the event does not fit.
  void validate(const RegionPtr& region) const;
};

const char* event_kind_name(EventSpec::Kind k);

bool evaluate(const EventSpec& spec, const Configuration& config);

/// Monte Carlo frequency over replicas [first, first+n) of `seed`.
Estimate estimate_event(const EventSpec& spec, RegionPtr region, uint64_t n_samples, uint64_t seed,
                        unsigned threads = 1, uint64_t first_replica = 0);

/// One-arm probabilities from the site nearest the region center for
/// several radii, from one exploration per replica.
std::vector<Estimate> estimate_pi_scales(const std::vector<double>& radii, RegionPtr region,
                                         uint64_t n_samples, uint64_t seed, unsigned threads = 1);
Estimate estimate_pi(double r, RegionPtr region, uint64_t n_samples, uint64_t seed,
                     unsigned threads = 1);

// ---------------------------------------------------------------------------
// Fitting

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double intercept_std_error = 0.0;
  double r2 = 0.0;
  double chi2 = 0.0;
  size_t points = 0;
};

/// Weighted least squares of y on x with absolute errors `sigma` (all zero
/// means unit weights). The parameter errors are scaled by
/// sqrt(chi2/dof) when that exceeds one.
LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& sigma);

struct ScalePoint {
  double scale = 0.0;
  Estimate value;
};

using PowerLawFit = LinearFit;

/// log(mean) against log(scale), weights (mean/stderr)^2.
PowerLawFit fit_power_law(const std::vector<ScalePoint>& points);

struct StabilizedFit {
  PowerLawFit raw;
  PowerLawFit stabilized;
  size_t dropped = 0;
};

/// Drops the smallest scale while at least three remain, until the slope
/// moves by less than its standard error.
StabilizedFit fit_power_law_stabilized(std::vector<ScalePoint> points);

json fit_to_json(const LinearFit& f);

// ---------------------------------------------------------------------------
// Connection probabilities and the ratio R

/// Sites nearest to the vertices of the equilateral triangle of side d with
/// one vertex at `origin` and one edge along e1.
struct Triangle {
  std::array<SiteCoord, 3> sites;
  std::array<double, 3> sides;  // |x1-x2|, |x1-x3|, |x2-x3|
  double snap_error = 0.0;      // largest vertex displacement
};
Triangle snap_triangle(const LatticeRegion& region, Point origin, double d);

struct RatioResult {
  Triangle triangle;
  Estimate p12, p13, p23, p123;
  Estimate ratio;
  JointCounts counts;  // indicators: 12, 13, 23, 123
};

/// Raw connection probabilities of a triangle and
/// R = P3 / sqrt(P12 P13 P23) with a delta-method error.
RatioResult estimate_ratio_R(double d, RegionPtr region, uint64_t n_samples, uint64_t seed,
                             unsigned threads = 1, Point origin = {});

/// Joint connection indicators for a list of point sets (each entry: the
/// indices into `points` that must share a cluster).
JointCounts connection_counts(const std::vector<SiteCoord>& points,
                              const std::vector<std::vector<size_t>>& events, RegionPtr region,
                              uint64_t n_samples, uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Mobius maps

struct MobiusMap {
  std::complex<double> A{1.0}, B{0.0}, C{0.0}, D{1.0};
  /// Throws InvalidArgument when AD - BC = 0.
  void validate() const;
  std::complex<double> operator()(std::complex<double> z) const;
  std::complex<double> derivative(std::complex<double> z) const;
};

/// prod |M'(x_i)|^{-exponent}. Throws InvalidArgument at the pole.
double mobius_factor(const MobiusMap& m, const std::vector<Point>& points, double exponent = 5.0 / 48.0);

// ---------------------------------------------------------------------------
// Exact enumeration

struct Rational {
  uint64_t num = 0;
  uint64_t den = 1;
  static Rational reduced(uint64_t num, uint64_t den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;
  bool operator==(const Rational& o) const;
};

/// favorable / 2^N over all states of the unmasked sites.
Rational brute_force_probability(RegionPtr region, const EventSpec& spec);
Rational brute_force_probability(RegionPtr region,
                                 const std::function<bool(const Configuration&)>& event);

// ---------------------------------------------------------------------------
// Stopping-set test

using ConfigPredicate = std::function<bool(const Configuration&)>;

struct CouplingExactReport {
  size_t classes = 0;     // (circuit, interior) classes with the inner connection
  size_t mismatches = 0;  // classes where a conditional differs from the reference
  size_t circuits = 0;    // distinct circuits seen
  bool holds() const { return mismatches == 0 && classes > 0; }
};

/// Exhaustive check on a micro-region: for every innermost circuit gamma of
/// A(eta, delta) and every interior state,
///   P(A | interior, gamma open, 0 <-> dB_eps)
///   = P(A | interior, gamma open, A_{eta,eps})
///   = P(A | gamma <-> dB_eps through sites outside gamma),
/// the last computed by a separate enumeration of the exterior only.
/// `outside_event` is evaluated with every non-outside annulus site closed.
CouplingExactReport coupling_exact_check(RegionPtr region, double eta, double delta, double eps,
                                         const ConfigPredicate& outside_event);

struct CouplingStatReport {
  uint64_t drawn = 0;
  uint64_t accepted_point = 0;    // 0 <-> dB_eps with a circuit
  uint64_t accepted_annulus = 0;  // A_{eta,eps} with a circuit
  Estimate freq_point, freq_annulus;
  size_t strata = 0;      // circuit classes seen in both ensembles
  double z = 0.0;         // stratified by circuit class
  double p_value = 1.0;
  double z_pooled = 0.0;  // plain two-proportion test over all circuits
  double p_pooled = 1.0;
};

/// Rejection-samples both conditioned ensembles until each has `target`
/// accepted samples with a circuit in A(eta, delta), and compares the
/// frequency of `outside_event` (an EventSpec evaluated on the full
/// configuration). Accepted samples are grouped by the area enclosed by
/// the innermost circuit, and the two ensembles are compared within each
/// class by a Cochran-Mantel-Haenszel z-test. Throws Error if the
/// acceptance rate falls below 1e-4.
CouplingStatReport coupling_statistical_test(RegionPtr region, double eta, double delta, double eps,
                                             const EventSpec& outside_event, uint64_t target,
                                             uint64_t seed, unsigned threads = 1);

double two_sided_normal_p(double z);

// ---------------------------------------------------------------------------
// Four-point residual

struct FourPointRow {
  double separation = 0.0;
  Estimate c4_partition;  // even-pairing probability
  Estimate c4_direct;     // sign-product estimator
  Estimate p12, p34, p1234, p13_24, p14_23, p12_34;
  Estimate residual;      // p13_24 + p14_23
  Estimate product_residual;  // c4_partition - p12 * p34
};

struct FourPointResult {
  std::vector<FourPointRow> rows;
  std::optional<PowerLawFit> fit;  // absent when a residual mean is zero
  bool monotone = false;
};

/// x1 = origin, x2 = x1 + s e1 for each s; x3, x4 fixed far away.
FourPointResult four_point_residual_experiment(const std::vector<int32_t>& separations, SiteCoord x3,
                                               SiteCoord x4, RegionPtr region, uint64_t n_samples,
                                               uint64_t seed, unsigned threads = 1);

}  // namespace percolab
