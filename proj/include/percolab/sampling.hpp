#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "percolab/lattice.hpp"
#include "percolab/rng.hpp"

namespace percolab {

/// Open/closed state of every site of a region, one bit per site in
/// canonical order (1 = open). Immutable once built.
class Configuration {
 public:
  Configuration(RegionPtr region, std::vector<uint64_t> words, uint64_t seed = 0,
                uint64_t replica = 0);

  static Configuration all_closed(RegionPtr region);
  static Configuration all_open(RegionPtr region);
  /// Open exactly at the listed sites (masked sites stay closed).
  static Configuration with_open_sites(RegionPtr region, const std::vector<SiteCoord>& open);

  const LatticeRegion& region() const { return *region_; }
  const RegionPtr& region_ptr() const { return region_; }
  const std::vector<uint64_t>& words() const { return words_; }
  uint64_t seed() const { return seed_; }
  uint64_t replica() const { return replica_; }
  size_t size() const { return region_->size(); }

  bool open(size_t index) const { return (words_[index >> 6] >> (index & 63)) & 1u; }
  /// Closed for sites outside the region.
  bool open_at(SiteCoord s) const {
    const int64_t i = region_->index_of(s);
    return i >= 0 && open(static_cast<size_t>(i));
  }
  size_t open_count() const;

  /// Every site flipped. Masked sites become open, so the result is the
  /// configuration of closed sites viewed as open ones.
  Configuration complement() const;
  /// Flip only unmasked sites (the color-swap symmetry of the law).
  Configuration color_flipped() const;
  Configuration with_site(size_t index, bool open) const;
  /// Same states with extra sites forced closed.
  Configuration with_closed(const std::vector<uint64_t>& closed_bits) const;

  bool operator==(const Configuration& o) const {
    return *region_ == *o.region_ && words_ == o.words_;
  }

 private:
  RegionPtr region_;
  std::vector<uint64_t> words_;
  uint64_t seed_;
  uint64_t replica_;
};

/// Critical (p = 1/2) sample keyed on (seed, replica, site index).
Configuration sample(RegionPtr region, uint64_t seed, uint64_t replica);

/// On-demand view of `sample(region, seed, replica)`: states are computed
/// per 128-site block when first touched. Intended for local explorations
/// of large regions; reuse one instance across replicas via `reset`.
class LazySample {
 public:
  explicit LazySample(RegionPtr region);
  void reset(uint64_t seed, uint64_t replica);
  bool open(size_t index) const;
  const LatticeRegion& region() const { return *region_; }
  uint64_t seed() const { return seed_; }
  uint64_t replica() const { return replica_; }

 private:
  RegionPtr region_;
  rng::Key key_{};
  uint64_t seed_ = 0;
  uint64_t replica_ = 0;
  uint32_t generation_ = 0;
  mutable std::vector<uint32_t> stamp_;
  mutable std::vector<std::array<uint64_t, 2>> blocks_;
};

inline constexpr size_t kEnumerationGuard = 25;

/// Exhaustive iteration over all 2^N states of the unmasked sites, in
/// lexicographic order of the site bit array (first site most significant).
class Enumeration {
 public:
  explicit Enumeration(RegionPtr region);
  uint64_t count() const { return uint64_t{1} << free_.size(); }
  size_t free_sites() const { return free_.size(); }
  Configuration at(uint64_t k) const;
  /// Calls `fn` on every configuration in order; stops early if `fn` returns false.
  void for_each(const std::function<bool(const Configuration&)>& fn) const;

 private:
  RegionPtr region_;
  std::vector<size_t> free_;
};

inline Enumeration enumerate_all(RegionPtr region) { return Enumeration(std::move(region)); }

/// Binary dump: "PERC1", u32 LE descriptor length, descriptor JSON, then
/// the packed u64 LE words.
void write_configuration(std::ostream& out, const Configuration& config);
Configuration read_configuration(std::istream& in);
void save_configuration(const std::string& path, const Configuration& config);
Configuration load_configuration(const std::string& path);

}  // namespace percolab
