#ifndef MDAUG_POSITIONING_HPP
#define MDAUG_POSITIONING_HPP

#include <span>
#include <vector>

#include "mdaug/mdt.hpp"

namespace mdaug::pos {

struct WknnConfig {
  int k = 5;
  double epsilon = 1e-6;          // dB, weight denominator guard
  double missing_floor = -130.0;  // dBm imputed for undetected PCIs
  bool common_pci_only = false;   // experimental alternative distance
};

struct PositionEstimate {
  geo::LocalPoint point;
  std::vector<std::size_t> neighbor_indices;  // size min(k, m)
  std::vector<double> weights;                // positive, sum to 1
};

// L1 distance over the whole PCI universe with absent entries imputed at
// `floor`. Symmetric, >= 0, zero iff the imputed vectors coincide.
double fingerprint_distance(const mdt::SparseRsrp& a, const mdt::SparseRsrp& b,
                            std::span<const mdt::Pci> universe, double floor);

// Variant restricted to PCIs present in both maps; returns +inf when the
// maps share no PCI.
double fingerprint_distance_common(const mdt::SparseRsrp& a,
                                   const mdt::SparseRsrp& b);

// Weighted K-nearest-neighbors position estimate: neighbors are the K
// smallest fingerprint distances (ties -> smaller index), weights are
// 1/(d + epsilon) normalized, and the estimate is the weighted mean of
// the neighbor locations.
PositionEstimate wknn_locate(const mdt::FingerprintDatabase& db,
                             const mdt::SparseRsrp& query,
                             const WknnConfig& cfg);

struct PositioningReport {
  std::vector<double> errors_m;  // one entry per located test record
  double mean_m = 0.0;
  double median_m = 0.0;
  std::size_t unlocatable = 0;
};

// Locates every test record against db and scores it against the test
// record's own (ground-truth) location. Unlocatable queries are counted
// and excluded. Both databases must share a projection.
PositioningReport evaluate_positioning(const mdt::FingerprintDatabase& db,
                                       const mdt::FingerprintDatabase& test,
                                       const WknnConfig& cfg);

}  // namespace mdaug::pos

#endif  // MDAUG_POSITIONING_HPP
