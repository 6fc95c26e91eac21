#ifndef MDAUG_MDT_HPP
#define MDAUG_MDT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "mdaug/geo.hpp"

namespace mdaug::mdt {

using Pci = std::uint32_t;

inline constexpr double kRsrpMinDbm = -160.0;
inline constexpr double kRsrpMaxDbm = -30.0;

// Sparse per-PCI RSRP map. Entries are kept sorted by PCI and unique;
// an absent PCI means "not detected".
class SparseRsrp {
 public:
  SparseRsrp() = default;

  void set(Pci pci, double dbm);
  std::optional<double> get(Pci pci) const noexcept;
  bool contains(Pci pci) const noexcept { return get(pci).has_value(); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<std::pair<Pci, double>>& entries() const noexcept {
    return entries_;
  }

  bool operator==(const SparseRsrp&) const = default;

 private:
  std::vector<std::pair<Pci, double>> entries_;
};

struct FingerprintRecord {
  geo::GeoPoint location;   // as reported (WGS-84)
  geo::LocalPoint local;    // under the owning database's projection
  SparseRsrp rsrp;
};

// Ordered collection of records sharing one PCI universe and one
// projection. Immutable after construction.
class FingerprintDatabase {
 public:
  FingerprintDatabase(std::vector<FingerprintRecord> records,
                      std::vector<Pci> universe, geo::Projection projection);

  const std::vector<FingerprintRecord>& records() const noexcept {
    return records_;
  }
  const std::vector<Pci>& universe() const noexcept { return universe_; }
  const geo::Projection& projection() const noexcept { return projection_; }
  std::size_t size() const noexcept { return records_.size(); }

 private:
  std::vector<FingerprintRecord> records_;
  std::vector<Pci> universe_;  // sorted ascending, unique
  geo::Projection projection_;
};

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
};

struct SplitResult {
  FingerprintDatabase train;
  FingerprintDatabase val;
  FingerprintDatabase test;
};

// CSV schema (bit-exact): UTF-8, comma-separated, LF line endings,
// header `Longitude,Latitude` then `RSRP_PCI_<id>` columns sorted by id
// ascending; empty field = PCI not detected. Coordinates are written at
// 6 decimals, RSRP at 2.
FingerprintDatabase load_csv(const std::filesystem::path& path);
void write_csv(const FingerprintDatabase& db,
               const std::filesystem::path& path);

// Disjoint split with sizes floor(frac*m) for val/test and the remainder
// going to train. Membership is a seeded shuffle; original row order is
// preserved inside each part. Universe and projection are inherited from
// the parent so fingerprint vectors stay aligned.
SplitResult split(const FingerprintDatabase& db, const SplitSpec& spec);

// Rebuilds `db` in the reference frame of `target`: locals are recomputed
// by unprojecting nothing (locations are authoritative) and projecting
// them with target's projection.
FingerprintDatabase reproject(const FingerprintDatabase& db,
                              const geo::Projection& target);

}  // namespace mdaug::mdt

#endif  // MDAUG_MDT_HPP
