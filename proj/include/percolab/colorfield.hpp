#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "percolab/clusters.hpp"
#include "percolab/rng.hpp"

namespace percolab {

/// One fair sign per cluster, keyed on (seed, replica, canonical label).
class SignAssignment {
 public:
  SignAssignment() = default;
  explicit SignAssignment(std::vector<int8_t> signs) : signs_(std::move(signs)) {}
  size_t size() const { return signs_.size(); }
  bool empty() const { return signs_.empty(); }
  int sign(size_t cluster) const { return signs_.at(cluster); }
  SignAssignment flipped(size_t cluster) const;
  const std::vector<int8_t>& signs() const { return signs_; }

 private:
  std::vector<int8_t> signs_;
};

SignAssignment assign_signs(const ClusterLabels& labels, uint64_t seed, uint64_t replica,
                            rng::Stream stream = rng::Stream::signs);

/// Divide-and-color value: the cluster sign at open sites, 0 at closed ones.
int spin_value(const ClusterLabels& labels, const SignAssignment& signs, SiteCoord x);

/// Conditional expectation of the spin product given the clusters: 1 when
/// every point is open and every cluster holds an even number of them.
int correlation_partition(const ClusterLabels& labels, const std::vector<SiteCoord>& points);
/// Product of spin values.
int correlation_direct(const ClusterLabels& labels, const SignAssignment& signs,
                       const std::vector<SiteCoord>& points);

/// Variant with signs on closed clusters as well (`closed` labels the
/// complement). Every site carries a sign.
int spin_value_both(const ClusterLabels& open, const ClusterLabels& closed,
                    const SignAssignment& open_signs, const SignAssignment& closed_signs,
                    SiteCoord x);
int correlation_partition_both(const ClusterLabels& open, const ClusterLabels& closed,
                               const std::vector<SiteCoord>& points);

/// A bounded test function with support inside the square of half-width
/// `half_width` about `center`.
struct TestFunction {
  std::function<double(Point)> f;
  Point center;
  double half_width = 0.0;
};

/// a^2 / pi_norm * sum_x f(x) S_x, summed site by site.
double field_functional(const ClusterLabels& labels, const SignAssignment& signs,
                        const TestFunction& f, double pi_norm);
/// The same quantity as sum_i sigma_i mu_i(f).
double field_functional_by_clusters(const ClusterLabels& labels, const SignAssignment& signs,
                                    const TestFunction& f, double pi_norm);

/// Sum over clusters of |C cap B|^2 for the closed squares B of the given
/// half-widths about `center`. This is the sign average of (sum_{x in B} S_x)^2.
std::vector<double> box_square_mass(const ClusterLabels& labels, Point center,
                                    const std::vector<double>& half_widths);

/// Dirichlet eigenfunctions of -Laplace on the square [-n, n]^2 about `center`.
class Eigenbasis {
 public:
  Eigenbasis(double n, size_t K, Point center = {});
  double n() const { return n_; }
  size_t K() const { return K_; }
  Point center() const { return center_; }
  /// 1-based mode indices.
  double lambda(size_t i, size_t j) const;
  double u(size_t i, size_t j, Point p) const;
  bool contains(Point p) const;

 private:
  double n_;
  size_t K_;
  Point center_;
};

struct FieldCoefficients {
  size_t K = 0;
  std::vector<double> a;  // row-major, a[(i-1) K + (j-1)]
  std::optional<double> cutoff;
  uint64_t replica = 0;

  double at(size_t i, size_t j) const { return a[(i - 1) * K + (j - 1)]; }
  double& at(size_t i, size_t j) { return a[(i - 1) * K + (j - 1)]; }
  FieldCoefficients& operator+=(const FieldCoefficients& o);
  FieldCoefficients truncated(size_t k) const;
};

/// Coefficients of the smoothed field on the basis square, hexagon integrals
/// taken at cell centers. With a positive cutoff only clusters of diameter
/// strictly greater than it contribute; zero or no cutoff keeps all.
FieldCoefficients smoothed_coefficients(const ClusterLabels& labels, const SignAssignment& signs,
                                        const Eigenbasis& basis, double pi_norm,
                                        std::optional<double> cutoff = std::nullopt);

/// Coefficients split by cluster diameter: bin b collects clusters with
/// diameter in (edges[b-1], edges[b]] (bin 0 from 0 inclusive, the last bin
/// above edges.back()). Summing all bins gives the uncut coefficients.
std::vector<FieldCoefficients> binned_coefficients(const ClusterLabels& labels,
                                                   const SignAssignment& signs,
                                                   const Eigenbasis& basis, double pi_norm,
                                                   const std::vector<double>& edges);

/// sum_{i,j <= K} lambda^{-2 alpha} a_ij^2, pairwise summed.
double hminus_norm(const FieldCoefficients& coeffs, const Eigenbasis& basis, double alpha);

/// Columns: i, j, lambda, a_ij.
void write_coefficients_csv(std::ostream& out, const FieldCoefficients& coeffs,
                            const Eigenbasis& basis);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> v);

}  // namespace percolab
