#include "mdaug/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdaug/errors.hpp"

namespace mdaug::pos {

namespace {

// L1 with floor imputation over the union of present keys; PCIs absent
// from both maps contribute |floor - floor| = 0. Callers guarantee all
// keys lie in the universe. Both entry lists are sorted.
double merge_l1(const mdt::SparseRsrp& a, const mdt::SparseRsrp& b,
                double floor) {
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  std::size_t i = 0;
  std::size_t j = 0;
  double sum = 0.0;
  while (i < ea.size() || j < eb.size()) {
    if (j >= eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) {
      sum += std::abs(ea[i].second - floor);
      ++i;
    } else if (i >= ea.size() || eb[j].first < ea[i].first) {
      sum += std::abs(floor - eb[j].second);
      ++j;
    } else {
      sum += std::abs(ea[i].second - eb[j].second);
      ++i;
      ++j;
    }
  }
  return sum;
}

mdt::SparseRsrp restrict_to(const mdt::SparseRsrp& map,
                            std::span<const mdt::Pci> universe) {
  mdt::SparseRsrp out;
  for (const auto& [pci, v] : map.entries()) {
    if (std::binary_search(universe.begin(), universe.end(), pci)) {
      out.set(pci, v);
    }
  }
  return out;
}

}  // namespace

double fingerprint_distance(const mdt::SparseRsrp& a, const mdt::SparseRsrp& b,
                            std::span<const mdt::Pci> universe, double floor) {
  if (universe.empty()) throw UsageError("fingerprint_distance: empty universe");
  return merge_l1(restrict_to(a, universe), restrict_to(b, universe), floor);
}

double fingerprint_distance_common(const mdt::SparseRsrp& a,
                                   const mdt::SparseRsrp& b) {
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  std::size_t i = 0;
  std::size_t j = 0;
  double sum = 0.0;
  std::size_t shared = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].first < eb[j].first) {
      ++i;
    } else if (eb[j].first < ea[i].first) {
      ++j;
    } else {
      sum += std::abs(ea[i].second - eb[j].second);
      ++shared;
      ++i;
      ++j;
    }
  }
  if (shared == 0) return std::numeric_limits<double>::infinity();
  return sum;
}

PositionEstimate wknn_locate(const mdt::FingerprintDatabase& db,
                             const mdt::SparseRsrp& query,
                             const WknnConfig& cfg) {
  if (db.size() == 0) throw DataError("wknn_locate: empty database");
  if (cfg.k < 1) throw UsageError("wknn_locate: k must be >= 1");
  if (!(cfg.epsilon > 0.0)) throw UsageError("wknn_locate: epsilon must be > 0");
  if (cfg.missing_floor < mdt::kRsrpMinDbm ||
      cfg.missing_floor > mdt::kRsrpMaxDbm) {
    throw UsageError("wknn_locate: missing_floor outside RSRP range");
  }

  const mdt::SparseRsrp filtered = restrict_to(query, db.universe());
  if (filtered.empty()) throw DataError("unlocatable query: no PCI in universe");

  // Record keys are inside the universe by database invariant, so the
  // unchecked merge matches fingerprint_distance on the filtered query.
  const std::size_t m = db.size();
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d =
        cfg.common_pci_only
            ? fingerprint_distance_common(filtered, db.records()[j].rsrp)
            : merge_l1(filtered, db.records()[j].rsrp, cfg.missing_floor);
    dist[j] = {d, j};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), m);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                    dist.end());  // pair ordering breaks ties by index

  PositionEstimate est;
  est.neighbor_indices.reserve(k);
  est.weights.reserve(k);
  double wsum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(dist[i].first)) break;  // common-only mode: no overlap
    est.neighbor_indices.push_back(dist[i].second);
    const double w = 1.0 / (dist[i].first + cfg.epsilon);
    est.weights.push_back(w);
    wsum += w;
  }
  if (est.neighbor_indices.empty()) {
    throw DataError("unlocatable query: no record shares a PCI");
  }
  double x = 0.0;
  double y = 0.0;
  for (std::size_t i = 0; i < est.neighbor_indices.size(); ++i) {
    est.weights[i] /= wsum;
    const auto& loc = db.records()[est.neighbor_indices[i]].local;
    x += est.weights[i] * loc.x;
    y += est.weights[i] * loc.y;
  }
  est.point = {x, y};
  return est;
}

PositioningReport evaluate_positioning(const mdt::FingerprintDatabase& db,
                                       const mdt::FingerprintDatabase& test,
                                       const WknnConfig& cfg) {
  if (db.size() == 0 || test.size() == 0) {
    throw DataError("evaluate_positioning: empty database");
  }
  if (!(db.projection() == test.projection())) {
    throw DataError("evaluate_positioning: databases use different projections");
  }

  PositioningReport report;
  report.errors_m.reserve(test.size());
  for (const auto& rec : test.records()) {
    try {
      const PositionEstimate est = wknn_locate(db, rec.rsrp, cfg);
      report.errors_m.push_back(geo::position_error(est.point, rec.local));
    } catch (const DataError&) {
      ++report.unlocatable;
    }
  }
  if (report.errors_m.empty()) {
    throw DataError("evaluate_positioning: no locatable queries");
  }
  double total = 0.0;
  for (double e : report.errors_m) total += e;
  report.mean_m = total / static_cast<double>(report.errors_m.size());

  std::vector<double> sorted = report.errors_m;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  report.median_m = (n % 2 == 1)
                        ? sorted[n / 2]
                        : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return report;
}

}  // namespace mdaug::pos
