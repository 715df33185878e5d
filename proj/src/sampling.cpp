#include "percolab/sampling.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "percolab/error.hpp"
#include "percolab/serialization.hpp"

namespace percolab {

namespace {

void clear_tail(std::vector<uint64_t>& words, size_t n) {
  if (n % 64 != 0 && !words.empty()) words.back() &= (uint64_t{1} << (n % 64)) - 1;
}

void apply_mask(std::vector<uint64_t>& words, const LatticeRegion& region) {
  const auto& m = region.masked_bits();
  if (m.empty()) return;
  for (size_t w = 0; w < words.size(); ++w) words[w] &= ~m[w];
}

}  // namespace

Configuration::Configuration(RegionPtr region, std::vector<uint64_t> words, uint64_t seed,
                             uint64_t replica)
    : region_(std::move(region)), words_(std::move(words)), seed_(seed), replica_(replica) {
  if (!region_) throw InvalidArgument("configuration needs a region");
  if (words_.size() != region_->word_count())
    throw InvalidArgument("bit array length does not match the region size");
  clear_tail(words_, region_->size());
  apply_mask(words_, *region_);
}

Configuration Configuration::all_closed(RegionPtr region) {
  const size_t n = region->word_count();
  return Configuration(std::move(region), std::vector<uint64_t>(n, 0));
}

Configuration Configuration::all_open(RegionPtr region) {
  const size_t n = region->word_count();
  return Configuration(std::move(region), std::vector<uint64_t>(n, ~uint64_t{0}));
}

Configuration Configuration::with_open_sites(RegionPtr region, const std::vector<SiteCoord>& open) {
  std::vector<uint64_t> words(region->word_count(), 0);
  for (const SiteCoord& s : open) {
    const int64_t i = region->index_of(s);
    if (i < 0) throw InvalidArgument("site outside the region");
    words[static_cast<size_t>(i) >> 6] |= uint64_t{1} << (i & 63);
  }
  return Configuration(std::move(region), std::move(words));
}

size_t Configuration::open_count() const {
  size_t n = 0;
  for (uint64_t w : words_) n += static_cast<size_t>(std::popcount(w));
  return n;
}

Configuration Configuration::complement() const {
  std::vector<uint64_t> w(words_.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = ~words_[i];
  clear_tail(w, size());
  // Bypass masking: masked sites are closed here, hence open in the complement.
  Configuration out = Configuration::all_closed(region_);
  out.words_ = std::move(w);
  out.seed_ = seed_;
  out.replica_ = replica_;
  return out;
}

Configuration Configuration::color_flipped() const {
  std::vector<uint64_t> w(words_.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = ~words_[i];
  return Configuration(region_, std::move(w), seed_, replica_);
}

Configuration Configuration::with_site(size_t index, bool is_open) const {
  if (index >= size()) throw InvalidArgument("site index out of range");
  std::vector<uint64_t> w = words_;
  const uint64_t bit = uint64_t{1} << (index & 63);
  if (is_open)
    w[index >> 6] |= bit;
  else
    w[index >> 6] &= ~bit;
  return Configuration(region_, std::move(w), seed_, replica_);
}

Configuration Configuration::with_closed(const std::vector<uint64_t>& closed_bits) const {
  if (closed_bits.size() != words_.size()) throw InvalidArgument("mask length mismatch");
  std::vector<uint64_t> w = words_;
  for (size_t i = 0; i < w.size(); ++i) w[i] &= ~closed_bits[i];
  return Configuration(region_, std::move(w), seed_, replica_);
}

Configuration sample(RegionPtr region, uint64_t seed, uint64_t replica) {
  const rng::Key key = rng::make_key(seed, rng::Stream::sites);
  const size_t nw = region->word_count();
  std::vector<uint64_t> words(nw);
  for (size_t b = 0; 2 * b < nw; ++b) {
    const auto blk = rng::block128(key, b, replica);
    words[2 * b] = blk[0];
    if (2 * b + 1 < nw) words[2 * b + 1] = blk[1];
  }
  return Configuration(std::move(region), std::move(words), seed, replica);
}

LazySample::LazySample(RegionPtr region) : region_(std::move(region)) {
  const size_t nb = (region_->word_count() + 1) / 2;
  stamp_.assign(nb, 0);
  blocks_.resize(nb);
}

void LazySample::reset(uint64_t seed, uint64_t replica) {
  seed_ = seed;
  replica_ = replica;
  key_ = rng::make_key(seed, rng::Stream::sites);
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
}

bool LazySample::open(size_t index) const {
  if (region_->masked(index)) return false;
  const size_t word = index >> 6;
  const size_t b = word >> 1;
  if (stamp_[b] != generation_) {
    blocks_[b] = rng::block128(key_, b, replica_);
    stamp_[b] = generation_;
  }
  return (blocks_[b][word & 1] >> (index & 63)) & 1u;
}

Enumeration::Enumeration(RegionPtr region) : region_(std::move(region)) {
  for (size_t i = 0; i < region_->size(); ++i)
    if (!region_->masked(i)) free_.push_back(i);
  if (free_.size() > kEnumerationGuard)
    throw GuardError("enumeration refused: " + std::to_string(free_.size()) +
                     " free sites exceed the guard of " + std::to_string(kEnumerationGuard));
}

Configuration Enumeration::at(uint64_t k) const {
  if (k >= count()) throw InvalidArgument("enumeration index out of range");
  std::vector<uint64_t> words(region_->word_count(), 0);
  const size_t n = free_.size();
  for (size_t j = 0; j < n; ++j)
    if ((k >> (n - 1 - j)) & 1u) words[free_[j] >> 6] |= uint64_t{1} << (free_[j] & 63);
  return Configuration(region_, std::move(words));
}

void Enumeration::for_each(const std::function<bool(const Configuration&)>& fn) const {
  for (uint64_t k = 0; k < count(); ++k)
    if (!fn(at(k))) return;
}

void write_configuration(std::ostream& out, const Configuration& config) {
  json desc = region_to_json(config.region());
  desc["seed"] = config.seed();
  desc["replica"] = config.replica();
  desc["sites"] = config.size();
  const std::string text = desc.dump();
  out.write("PERC1", 5);
  const auto len = static_cast<uint32_t>(text.size());
  unsigned char lb[4];
  for (int i = 0; i < 4; ++i) lb[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(lb), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (uint64_t w : config.words()) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(w >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw IoError("failed to write configuration");
}

Configuration read_configuration(std::istream& in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, "PERC1", 5) != 0) throw IoError("not a PERC1 configuration dump");
  unsigned char lb[4];
  in.read(reinterpret_cast<char*>(lb), 4);
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(lb[i]) << (8 * i);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw IoError("truncated configuration header");
  json desc;
  try {
    desc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad configuration header: ") + e.what());
  }
  RegionPtr region = region_from_json(desc);
  std::vector<uint64_t> words(region->word_count());
  for (uint64_t& w : words) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("truncated configuration body");
    w = 0;
    for (int i = 0; i < 8; ++i) w |= static_cast<uint64_t>(b[i]) << (8 * i);
  }
  return Configuration(std::move(region), std::move(words), desc.value("seed", uint64_t{0}),
                       desc.value("replica", uint64_t{0}));
}

void save_configuration(const std::string& path, const Configuration& config) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_configuration(f, config);
}

Configuration load_configuration(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return read_configuration(f);
}

}  // namespace percolab
