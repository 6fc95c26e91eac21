#ifndef MDAUG_SCENARIO_HPP
#define MDAUG_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mdaug/mdt.hpp"

namespace mdaug::scenario {

struct CellSite {
  mdt::Pci pci = 0;
  geo::LocalPoint location;        // generator frame, meters
  double tx_power_dbm = 46.0;      // must stay in [20, 60]
  double pathloss_exponent = 3.5;  // must stay in [2, 6]
  double pl0_db = 32.0;            // path loss at d0 = 1 m
};

struct UniformExtent {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

struct GaussianCluster {
  geo::LocalPoint center;
  double sigma_m = 0.0;
  double weight = 0.0;
};

struct LineSegmentSpec {
  geo::LocalPoint a;
  geo::LocalPoint b;
  // Lateral offsets are N(0, (corridor_width_m/3)^2), so essentially all
  // mass lies within corridor_width_m of the segment.
  double corridor_width_m = 0.0;
};

struct UserDistribution {
  enum class Kind { uniform, gaussian_clusters, line_segment };
  Kind kind = Kind::uniform;
  UniformExtent extent;
  std::vector<GaussianCluster> clusters;
  LineSegmentSpec segment;
};

struct ScenarioSpec {
  std::string name;
  std::string area_preset = "custom";
  std::vector<CellSite> cells;
  UserDistribution user_distribution;
  std::size_t m = 0;                    // user record count
  double sigma2_s = 0.0;                // shadow fading variance, dB^2
  double detect_threshold_dbm = -120.0;
  std::uint64_t seed = 0;
  geo::GeoPoint origin{44.4949, 11.3426};
  double area_km2 = 0.0;         // descriptor only
  double density_per_km2 = 0.0;  // descriptor only
};

// Log-distance link budget: tx - (pl0 + 10 n log10(d)) + shadow, with the
// distance floored at 1 m. No clamping here.
double rsrp_at(const CellSite& cell, const geo::LocalPoint& p,
               double shadow_db);

struct GeneratedScenario {
  mdt::FingerprintDatabase db;
  // Ground-truth locations of the kept records, in the db's projection
  // frame (identical to the records' local coordinates by construction).
  std::vector<geo::LocalPoint> truth;
  std::size_t dropped_users = 0;  // users that detected no cell
};

// Draws m user locations (per-user RNG streams), computes per-cell RSRP
// with iid shadowing, keeps cells above the detection threshold, and
// drops users that detect nothing. Locations are quantized to the CSV
// precision (1e-6 deg) before radio computation so that files, records
// and ground truth agree exactly.
GeneratedScenario generate(const ScenarioSpec& spec);

// Desk-scale analogs of the four reference regions. Shadowing variances
// and area descriptors carry the published per-region values; record and
// cell counts are scaled down roughly tenfold.
ScenarioSpec preset(std::string_view area);

}  // namespace mdaug::scenario

#endif  // MDAUG_SCENARIO_HPP
