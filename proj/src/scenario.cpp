#include "mdaug/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::scenario {

namespace {

constexpr double kGoldenAngle = 2.39996322972865332;

void validate(const ScenarioSpec& spec) {
  if (spec.m < 1) throw UsageError("scenario: m must be >= 1");
  if (spec.sigma2_s < 0.0) throw UsageError("scenario: sigma2_s must be >= 0");
  if (spec.cells.empty()) throw UsageError("scenario: no cells");
  std::set<mdt::Pci> seen;
  for (const auto& cell : spec.cells) {
    if (cell.tx_power_dbm < 20.0 || cell.tx_power_dbm > 60.0) {
      throw UsageError("scenario: tx_power_dbm outside [20, 60]");
    }
    if (cell.pathloss_exponent < 2.0 || cell.pathloss_exponent > 6.0) {
      throw UsageError("scenario: pathloss_exponent outside [2, 6]");
    }
    if (!seen.insert(cell.pci).second) {
      throw UsageError("scenario: duplicate PCI in cell list");
    }
  }
  const auto& ud = spec.user_distribution;
  switch (ud.kind) {
    case UserDistribution::Kind::uniform:
      if (!(ud.extent.x_max > ud.extent.x_min) ||
          !(ud.extent.y_max > ud.extent.y_min)) {
        throw UsageError("scenario: degenerate uniform extent");
      }
      break;
    case UserDistribution::Kind::gaussian_clusters: {
      if (ud.clusters.empty()) throw UsageError("scenario: no clusters");
      for (const auto& c : ud.clusters) {
        if (!(c.sigma_m > 0.0) || !(c.weight > 0.0)) {
          throw UsageError("scenario: cluster sigma and weight must be > 0");
        }
      }
      break;
    }
    case UserDistribution::Kind::line_segment: {
      const double dx = ud.segment.b.x - ud.segment.a.x;
      const double dy = ud.segment.b.y - ud.segment.a.y;
      if (dx * dx + dy * dy <= 0.0) {
        throw UsageError("scenario: degenerate line segment");
      }
      if (!(ud.segment.corridor_width_m > 0.0)) {
        throw UsageError("scenario: corridor width must be > 0");
      }
      break;
    }
  }
}

geo::LocalPoint draw_location(const UserDistribution& ud, stats::Rng& rng) {
  switch (ud.kind) {
    case UserDistribution::Kind::uniform: {
      const double x =
          ud.extent.x_min + rng.next_double() * (ud.extent.x_max - ud.extent.x_min);
      const double y =
          ud.extent.y_min + rng.next_double() * (ud.extent.y_max - ud.extent.y_min);
      return {x, y};
    }
    case UserDistribution::Kind::gaussian_clusters: {
      double total = 0.0;
      for (const auto& c : ud.clusters) total += c.weight;
      const double u = rng.next_double() * total;
      double acc = 0.0;
      std::size_t pick = ud.clusters.size() - 1;
      for (std::size_t i = 0; i < ud.clusters.size(); ++i) {
        acc += ud.clusters[i].weight;
        if (u < acc) {
          pick = i;
          break;
        }
      }
      const auto& c = ud.clusters[pick];
      return {c.center.x + c.sigma_m * rng.next_gaussian(),
              c.center.y + c.sigma_m * rng.next_gaussian()};
    }
    case UserDistribution::Kind::line_segment: {
      const double t = rng.next_double();
      const double dx = ud.segment.b.x - ud.segment.a.x;
      const double dy = ud.segment.b.y - ud.segment.a.y;
      const double len = std::hypot(dx, dy);
      const double lateral =
          (ud.segment.corridor_width_m / 3.0) * rng.next_gaussian();
      return {ud.segment.a.x + t * dx - lateral * dy / len,
              ud.segment.a.y + t * dy + lateral * dx / len};
    }
  }
  throw UsageError("scenario: unknown distribution kind");
}

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

double rsrp_at(const CellSite& cell, const geo::LocalPoint& p,
               double shadow_db) {
  const double d =
      std::max(std::hypot(p.x - cell.location.x, p.y - cell.location.y), 1.0);
  return cell.tx_power_dbm -
         (cell.pl0_db + 10.0 * cell.pathloss_exponent * std::log10(d)) +
         shadow_db;
}

GeneratedScenario generate(const ScenarioSpec& spec) {
  validate(spec);

  std::vector<CellSite> cells = spec.cells;
  std::sort(cells.begin(), cells.end(),
            [](const CellSite& a, const CellSite& b) { return a.pci < b.pci; });

  const geo::Projection gen_proj(spec.origin);
  const double sigma = std::sqrt(spec.sigma2_s);

  std::vector<mdt::FingerprintRecord> records;
  std::vector<geo::GeoPoint> locations;
  std::size_t dropped = 0;
  for (std::size_t u = 0; u < spec.m; ++u) {
    stats::Rng rng(spec.seed, u);
    const geo::LocalPoint raw = draw_location(spec.user_distribution, rng);
    geo::GeoPoint g = gen_proj.unproject(raw);
    g.lat = quantize6(g.lat);
    g.lon = quantize6(g.lon);
    const geo::LocalPoint p = gen_proj.project(g);

    mdt::FingerprintRecord rec;
    rec.location = g;
    for (const auto& cell : cells) {
      const double shadow = sigma * rng.next_gaussian();
      const double raw_rsrp = rsrp_at(cell, p, shadow);
      if (raw_rsrp > spec.detect_threshold_dbm) {
        rec.rsrp.set(cell.pci, std::clamp(raw_rsrp, mdt::kRsrpMinDbm,
                                          mdt::kRsrpMaxDbm));
      }
    }
    if (rec.rsrp.empty()) {
      ++dropped;
      continue;
    }
    locations.push_back(g);
    records.push_back(std::move(rec));
  }
  if (records.empty()) {
    throw DataError("scenario: all users below detection threshold");
  }

  std::set<mdt::Pci> universe_set;
  for (const auto& rec : records) {
    for (const auto& [pci, v] : rec.rsrp.entries()) universe_set.insert(pci);
  }
  std::vector<mdt::Pci> universe(universe_set.begin(), universe_set.end());

  const geo::Projection db_proj = geo::make_projection(locations);
  std::vector<geo::LocalPoint> truth;
  truth.reserve(records.size());
  for (auto& rec : records) {
    rec.local = db_proj.project(rec.location);
    truth.push_back(rec.local);
  }

  GeneratedScenario out{
      mdt::FingerprintDatabase(std::move(records), std::move(universe), db_proj),
      std::move(truth), dropped};
  return out;
}

namespace {

// Evenly spread cells over a disc of radius r_max (sunflower layout).
std::vector<CellSite> spiral_cells(int count, double r_max, double tx, double n,
                                   double pl0) {
  std::vector<CellSite> cells;
  cells.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double r = r_max * std::sqrt((i + 0.5) / count);
    const double theta = i * kGoldenAngle;
    cells.push_back({static_cast<mdt::Pci>(i + 1),
                     {r * std::cos(theta), r * std::sin(theta)},
                     tx,
                     n,
                     pl0});
  }
  return cells;
}

std::vector<CellSite> corridor_cells(int count, const geo::LocalPoint& a,
                                     const geo::LocalPoint& b, double offset_m,
                                     double tx, double n, double pl0) {
  std::vector<CellSite> cells;
  cells.reserve(count);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  for (int i = 0; i < count; ++i) {
    const double t = (i + 0.5) / count;
    const double side = (i % 2 == 0) ? 1.0 : -1.0;
    cells.push_back({static_cast<mdt::Pci>(i + 1),
                     {a.x + t * dx - side * offset_m * dy / len,
                      a.y + t * dy + side * offset_m * dx / len},
                     tx,
                     n,
                     pl0});
  }
  return cells;
}

}  // namespace

ScenarioSpec preset(std::string_view area) {
  ScenarioSpec spec;
  spec.area_preset = std::string(area);
  spec.name = std::string(area);
  spec.detect_threshold_dbm = -120.0;
  spec.seed = 1;

  if (area == "city_center") {
    spec.area_km2 = 2.05;
    spec.sigma2_s = 8.8;
    spec.m = 859;
    spec.cells = spiral_cells(14, 570.0, 30.0, 4.2, 32.0);
    spec.user_distribution.kind = UserDistribution::Kind::gaussian_clusters;
    spec.user_distribution.clusters = {
        {{0.0, 0.0}, 250.0, 0.35},    {{-350.0, 200.0}, 180.0, 0.20},
        {{300.0, -250.0}, 180.0, 0.20}, {{150.0, 350.0}, 150.0, 0.10},
        {{0.0, 0.0}, 550.0, 0.15},
    };
  } else if (area == "stadium") {
    spec.area_km2 = 3.20;
    spec.sigma2_s = 7.8;
    spec.m = 401;
    spec.cells = spiral_cells(10, 700.0, 32.0, 4.0, 32.0);
    spec.user_distribution.kind = UserDistribution::Kind::gaussian_clusters;
    spec.user_distribution.clusters = {
        {{0.0, 0.0}, 150.0, 0.50},      {{-400.0, -300.0}, 250.0, 0.20},
        {{450.0, 250.0}, 250.0, 0.15},  {{0.0, 0.0}, 700.0, 0.15},
    };
  } else if (area == "airport") {
    spec.area_km2 = 18.61;
    spec.sigma2_s = 7.8;
    spec.m = 1770;
    spec.cells = spiral_cells(21, 1700.0, 40.0, 3.8, 32.0);
    spec.user_distribution.kind = UserDistribution::Kind::gaussian_clusters;
    spec.user_distribution.clusters = {
        {{-800.0, -400.0}, 450.0, 0.35}, {{600.0, 300.0}, 600.0, 0.25},
        {{-1200.0, 800.0}, 500.0, 0.15}, {{0.0, 0.0}, 1500.0, 0.25},
    };
  } else if (area == "highway") {
    spec.area_km2 = 24.96;
    spec.sigma2_s = 8.0;
    spec.m = 225;
    spec.user_distribution.kind = UserDistribution::Kind::line_segment;
    spec.user_distribution.segment = {{-3400.0, -1700.0}, {3400.0, 1700.0}, 150.0};
    spec.cells = corridor_cells(5, spec.user_distribution.segment.a,
                                spec.user_distribution.segment.b, 300.0, 43.0,
                                3.6, 32.0);
  } else {
    throw UsageError("unknown preset '" + std::string(area) + "'");
  }
  spec.density_per_km2 = static_cast<double>(spec.m) / spec.area_km2;
  return spec;
}

}  // namespace mdaug::scenario
