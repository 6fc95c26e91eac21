#include "mdaug/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::pipeline {

namespace {

// Stream labels for deriving stage seeds from one augmentation seed.
constexpr std::uint64_t kStreamSpatialFit = 1;
constexpr std::uint64_t kStreamSample = 2;
constexpr std::uint64_t kStreamShadow = 3;
constexpr std::uint64_t kStreamGpr = 5;

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

template <typename Fn>
auto stage(const char* label, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(std::string(label) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(label) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(label) + ": " + e.what());
  }
}

// Index-based parallel loop; results must be written by index so the
// outcome is identical to serial execution.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(count);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<geo::LocalPoint> locals_of(const mdt::FingerprintDatabase& db) {
  std::vector<geo::LocalPoint> pts;
  pts.reserve(db.size());
  for (const auto& rec : db.records()) pts.push_back(rec.local);
  return pts;
}

}  // namespace

std::string to_string(SpatialModelKind kind) {
  return kind == SpatialModelKind::kde ? "kde" : "gmm";
}

std::string to_string(RadioModelKind kind) {
  switch (kind) {
    case RadioModelKind::knn: return "knn";
    case RadioModelKind::gpr_se: return "gpr_se";
    case RadioModelKind::gpr_rq: return "gpr_rq";
  }
  return "knn";
}

SpatialModelKind spatial_kind_from_string(const std::string& s) {
  if (s == "kde") return SpatialModelKind::kde;
  if (s == "gmm") return SpatialModelKind::gmm;
  throw UsageError("unknown spatial model '" + s + "' (expected kde|gmm)");
}

RadioModelKind radio_kind_from_string(const std::string& s) {
  if (s == "knn") return RadioModelKind::knn;
  if (s == "gpr_se") return RadioModelKind::gpr_se;
  if (s == "gpr_rq") return RadioModelKind::gpr_rq;
  throw UsageError("unknown radio model '" + s +
                   "' (expected knn|gpr_se|gpr_rq)");
}

// --- scenario config --------------------------------------------------------

json spec_to_json(const scenario::ScenarioSpec& spec) {
  json cells = json::array();
  for (const auto& c : spec.cells) {
    cells.push_back({{"pci", c.pci},
                     {"x", c.location.x},
                     {"y", c.location.y},
                     {"tx_power_dbm", c.tx_power_dbm},
                     {"pathloss_exponent", c.pathloss_exponent},
                     {"pl0_db", c.pl0_db}});
  }
  json ud;
  using Kind = scenario::UserDistribution::Kind;
  switch (spec.user_distribution.kind) {
    case Kind::uniform:
      ud["kind"] = "uniform";
      ud["extent"] = {{"x_min", spec.user_distribution.extent.x_min},
                      {"x_max", spec.user_distribution.extent.x_max},
                      {"y_min", spec.user_distribution.extent.y_min},
                      {"y_max", spec.user_distribution.extent.y_max}};
      break;
    case Kind::gaussian_clusters: {
      ud["kind"] = "gaussian_clusters";
      json clusters = json::array();
      for (const auto& c : spec.user_distribution.clusters) {
        clusters.push_back({{"x", c.center.x},
                            {"y", c.center.y},
                            {"sigma_m", c.sigma_m},
                            {"weight", c.weight}});
      }
      ud["clusters"] = clusters;
      break;
    }
    case Kind::line_segment:
      ud["kind"] = "line_segment";
      ud["segment"] = {
          {"x0", spec.user_distribution.segment.a.x},
          {"y0", spec.user_distribution.segment.a.y},
          {"x1", spec.user_distribution.segment.b.x},
          {"y1", spec.user_distribution.segment.b.y},
          {"corridor_width_m", spec.user_distribution.segment.corridor_width_m}};
      break;
  }
  return json{{"name", spec.name},
              {"area_preset", spec.area_preset},
              {"cells", cells},
              {"user_distribution", ud},
              {"m", spec.m},
              {"sigma2_s", spec.sigma2_s},
              {"detect_threshold_dbm", spec.detect_threshold_dbm},
              {"seed", spec.seed},
              {"origin", {{"lat", spec.origin.lat}, {"lon", spec.origin.lon}}},
              {"area_km2", spec.area_km2},
              {"density_per_km2", spec.density_per_km2}};
}

namespace {

scenario::UserDistribution user_distribution_from_json(const json& j) {
  scenario::UserDistribution ud;
  const std::string kind = j.at("kind").get<std::string>();
  using Kind = scenario::UserDistribution::Kind;
  if (kind == "uniform") {
    ud.kind = Kind::uniform;
    const auto& e = j.at("extent");
    ud.extent = {e.at("x_min").get<double>(), e.at("x_max").get<double>(),
                 e.at("y_min").get<double>(), e.at("y_max").get<double>()};
  } else if (kind == "gaussian_clusters") {
    ud.kind = Kind::gaussian_clusters;
    for (const auto& c : j.at("clusters")) {
      ud.clusters.push_back({{c.at("x").get<double>(), c.at("y").get<double>()},
                             c.at("sigma_m").get<double>(),
                             c.at("weight").get<double>()});
    }
  } else if (kind == "line_segment") {
    ud.kind = Kind::line_segment;
    const auto& s = j.at("segment");
    ud.segment = {{s.at("x0").get<double>(), s.at("y0").get<double>()},
                  {s.at("x1").get<double>(), s.at("y1").get<double>()},
                  s.at("corridor_width_m").get<double>()};
  } else {
    throw UsageError("user_distribution.kind must be uniform, "
                     "gaussian_clusters or line_segment");
  }
  return ud;
}

std::vector<scenario::CellSite> cells_from_json(const json& j) {
  std::vector<scenario::CellSite> cells;
  for (const auto& c : j) {
    scenario::CellSite site;
    site.pci = c.at("pci").get<mdt::Pci>();
    site.location = {c.at("x").get<double>(), c.at("y").get<double>()};
    if (c.contains("tx_power_dbm")) site.tx_power_dbm = c["tx_power_dbm"];
    if (c.contains("pathloss_exponent")) {
      site.pathloss_exponent = c["pathloss_exponent"];
    }
    if (c.contains("pl0_db")) site.pl0_db = c["pl0_db"];
    cells.push_back(site);
  }
  return cells;
}

}  // namespace

scenario::ScenarioSpec spec_from_json(const json& j) {
  scenario::ScenarioSpec spec;
  const std::string preset_name =
      j.contains("area_preset") ? j["area_preset"].get<std::string>() : "custom";
  if (preset_name != "custom") {
    spec = scenario::preset(preset_name);
  } else {
    spec.area_preset = "custom";
  }
  if (j.contains("name")) spec.name = j["name"].get<std::string>();
  if (spec.name.empty()) spec.name = "scenario";
  if (j.contains("m")) spec.m = j["m"].get<std::size_t>();
  if (j.contains("sigma2_s")) spec.sigma2_s = j["sigma2_s"].get<double>();
  if (j.contains("detect_threshold_dbm")) {
    spec.detect_threshold_dbm = j["detect_threshold_dbm"].get<double>();
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("origin")) {
    spec.origin = {j["origin"].at("lat").get<double>(),
                   j["origin"].at("lon").get<double>()};
  }
  if (j.contains("cells")) spec.cells = cells_from_json(j["cells"]);
  if (j.contains("user_distribution")) {
    spec.user_distribution = user_distribution_from_json(j["user_distribution"]);
  }
  if (j.contains("area_km2")) spec.area_km2 = j["area_km2"].get<double>();
  if (j.contains("density_per_km2")) {
    spec.density_per_km2 = j["density_per_km2"].get<double>();
  }
  if (spec.cells.empty() || spec.m == 0) {
    throw UsageError("scenario config needs at least cells and m "
                     "(or a valid area_preset)");
  }
  return spec;
}

GenerateOutputs write_generate_outputs(const scenario::ScenarioSpec& spec,
                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const scenario::GeneratedScenario gen = scenario::generate(spec);

  GenerateOutputs out;
  out.dataset_csv = out_dir / (spec.name + ".csv");
  out.truth_csv = out_dir / (spec.name + ".truth.csv");
  out.meta_json = out_dir / (spec.name + ".meta.json");
  out.records = gen.db.size();
  out.pci_count = gen.db.universe().size();
  out.dropped_users = gen.dropped_users;

  mdt::write_csv(gen.db, out.dataset_csv);
  write_truth_csv(gen.truth, out.truth_csv);

  json meta{{"spec", spec_to_json(spec)},
            {"outputs",
             {{"dataset_csv", out.dataset_csv.filename().string()},
              {"truth_csv", out.truth_csv.filename().string()}}},
            {"counts",
             {{"records", out.records},
              {"pci_count", out.pci_count},
              {"dropped_users", out.dropped_users}}}};
  std::ofstream f(out.meta_json, std::ios::binary);
  if (!f) throw DataError("cannot write '" + out.meta_json.string() + "'");
  f << meta.dump(2) << '\n';
  return out;
}

void write_truth_csv(std::span<const geo::LocalPoint> truth,
                     const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << "x,y\n";
  char buf[80];
  for (const auto& p : truth) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.x, p.y);
    f << buf;
  }
}

std::vector<geo::LocalPoint> load_truth_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(f, line)) {
    throw DataError("empty truth file '" + path.string() + "'");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y") {
    throw DataError("truth file '" + path.string() + "': header must be x,y");
  }
  std::vector<geo::LocalPoint> out;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("truth file row " + std::to_string(row) + ": bad format");
    }
    try {
      out.push_back({std::stod(line.substr(0, comma)),
                     std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw DataError("truth file row " + std::to_string(row) + ": bad number");
    }
    ++row;
  }
  return out;
}

mdt::FingerprintDatabase prepare_test_set(
    const mdt::FingerprintDatabase& test,
    std::span<const geo::LocalPoint> truth,
    const geo::Projection& db_frame) {
  if (truth.size() != test.size()) {
    throw DataError("truth row count (" + std::to_string(truth.size()) +
                    ") does not match test records (" +
                    std::to_string(test.size()) + ")");
  }
  std::vector<mdt::FingerprintRecord> records = test.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const geo::GeoPoint g = test.projection().unproject(truth[i]);
    records[i].local = db_frame.project(g);
  }
  return mdt::FingerprintDatabase(std::move(records), test.universe(), db_frame);
}

// --- spatial fit ------------------------------------------------------------

FittedSpatial fit_spatial(std::span<const geo::LocalPoint> train,
                          const SpatialFitConfig& cfg) {
  FittedSpatial fitted;
  fitted.kind = cfg.kind;
  if (cfg.kind == SpatialModelKind::kde) {
    if (train.size() < 2) {
      throw DataError("fit_spatial: need at least 2 points for KDE");
    }
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    stats::Rng rng(cfg.seed, kStreamSpatialFit);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::swap(idx[i], idx[rng.next_below(i + 1)]);
    }
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(cfg.val_frac * static_cast<double>(train.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, train.size() - 1);
    std::vector<geo::LocalPoint> fit_pts;
    std::vector<geo::LocalPoint> val_pts;
    fit_pts.reserve(train.size() - n_val);
    val_pts.reserve(n_val);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_val ? val_pts : fit_pts).push_back(train[idx[i]]);
    }
    const std::vector<double> grid = cfg.bandwidth_grid.empty()
                                         ? spatial::default_bandwidth_grid()
                                         : cfg.bandwidth_grid;
    const spatial::BandwidthSearch search =
        spatial::select_bandwidth(fit_pts, val_pts, grid);
    fitted.kde.centers.assign(train.begin(), train.end());
    fitted.kde.bandwidth_m = search.grid[search.chosen];
    fitted.fit_info = {{"kind", "kde"},
                       {"bandwidth_m", fitted.kde.bandwidth_m},
                       {"grid", search.grid},
                       {"val_nll", search.val_nll},
                       {"chosen", search.chosen}};
  } else {
    const int max_k = std::max(
        1, std::min<int>(cfg.gmm_max_k, static_cast<int>(train.size() / 2)));
    std::vector<int> k_grid(max_k);
    std::iota(k_grid.begin(), k_grid.end(), 1);
    fitted.gmm = spatial::gmm_fit(train, k_grid, cfg.seed);
    fitted.fit_info = {{"kind", "gmm"},
                       {"k_grid", fitted.gmm.k_grid},
                       {"bic", fitted.gmm.bic},
                       {"chosen_k", fitted.gmm.k_grid[fitted.gmm.chosen_index]}};
  }
  return fitted;
}

std::vector<geo::LocalPoint> sample_spatial(const FittedSpatial& model,
                                            std::size_t n, std::uint64_t seed) {
  if (model.kind == SpatialModelKind::kde) {
    return spatial::kde_sample(model.kde, n, seed);
  }
  return spatial::gmm_sample(model.gmm, n, seed);
}

void save_spatial_model(const FittedSpatial& model,
                        const std::string& dataset_path,
                        const std::filesystem::path& out_path) {
  json j;
  j["kind"] = to_string(model.kind);
  if (model.kind == SpatialModelKind::kde) {
    j["bandwidth_m"] = model.kde.bandwidth_m;
    j["dataset"] = dataset_path;
    std::vector<std::size_t> indices(model.kde.centers.size());
    std::iota(indices.begin(), indices.end(), 0);
    j["center_indices"] = indices;
  } else {
    json comps = json::array();
    for (const auto& c : model.gmm.components) {
      comps.push_back({{"weight", c.weight},
                       {"mean", {c.mean(0), c.mean(1)}},
                       {"covariance",
                        {c.covariance(0, 0), c.covariance(0, 1),
                         c.covariance(1, 1)}}});
    }
    j["components"] = comps;
  }
  j["fit_info"] = model.fit_info;
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + out_path.string() + "'");
  f << j.dump(2) << '\n';
}

FittedSpatial load_spatial_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError("model file '" + path.string() + "': " + e.what());
  }
  FittedSpatial model;
  model.kind = spatial_kind_from_string(j.at("kind").get<std::string>());
  if (model.kind == SpatialModelKind::kde) {
    model.kde.bandwidth_m = j.at("bandwidth_m").get<double>();
    std::filesystem::path dataset = j.at("dataset").get<std::string>();
    if (dataset.is_relative()) dataset = path.parent_path() / dataset;
    const mdt::FingerprintDatabase db = mdt::load_csv(dataset);
    for (const auto& idx : j.at("center_indices")) {
      const auto i = idx.get<std::size_t>();
      if (i >= db.size()) {
        throw DataError("model file: center index out of range");
      }
      model.kde.centers.push_back(db.records()[i].local);
    }
    if (model.kde.centers.empty()) {
      throw DataError("model file: no centers");
    }
  } else {
    for (const auto& c : j.at("components")) {
      spatial::GmmComponent comp;
      comp.weight = c.at("weight").get<double>();
      comp.mean << c.at("mean")[0].get<double>(), c.at("mean")[1].get<double>();
      const auto& cov = c.at("covariance");
      comp.covariance << cov[0].get<double>(), cov[1].get<double>(),
          cov[1].get<double>(), cov[2].get<double>();
      model.gmm.components.push_back(comp);
    }
    if (model.gmm.components.empty()) {
      throw DataError("model file: no components");
    }
  }
  if (j.contains("fit_info")) model.fit_info = j["fit_info"];
  return model;
}

// --- augmentation -----------------------------------------------------------

AugmentResult augment_database(const mdt::FingerprintDatabase& train,
                               const AugmentConfig& cfg) {
  if (cfg.rate < 1.0) throw UsageError("augment: rate must be >= 1");
  const std::size_t m = train.size();
  const auto n_syn = static_cast<std::size_t>(
      std::llround((cfg.rate - 1.0) * static_cast<double>(m)));

  json report{{"rate", cfg.rate},
              {"original_records", m},
              {"spatial_model", to_string(cfg.spatial)},
              {"radio_model", to_string(cfg.radio)},
              {"shadow_sigma2_db", cfg.shadow_sigma2_db},
              {"seed", cfg.seed}};

  if (n_syn == 0) {
    report["synthetic_records"] = 0;
    report["total_records"] = m;
    return AugmentResult{train, std::move(report)};
  }

  FittedSpatial local_fit;
  const FittedSpatial* fitted = cfg.prefit_spatial;
  if (fitted == nullptr) {
    local_fit = stage("spatial-fit", [&] {
      SpatialFitConfig fit_cfg = cfg.spatial_fit;
      fit_cfg.kind = cfg.spatial;
      fit_cfg.seed = stats::derive_stream(cfg.seed, kStreamSpatialFit);
      return fit_spatial(locals_of(train), fit_cfg);
    });
    fitted = &local_fit;
  }

  std::unique_ptr<radio::RadioModel> radio_model = stage("radio-fit", [&] {
    std::unique_ptr<radio::RadioModel> model;
    if (cfg.radio == RadioModelKind::knn) {
      radio::ShadowingSpec shadow{cfg.shadow_sigma2_db,
                                  stats::derive_stream(cfg.seed, kStreamShadow)};
      model = std::make_unique<radio::KnnRadioModel>(train, shadow, cfg.knn);
    } else {
      const radio::KernelKind kind = cfg.radio == RadioModelKind::gpr_se
                                         ? radio::KernelKind::se
                                         : radio::KernelKind::rq;
      model = std::make_unique<radio::GprRadioModel>(
          radio::gpr_fit(train, kind, cfg.gpr_grid, cfg.gpr_subsample_cap,
                         stats::derive_stream(cfg.seed, kStreamGpr)));
    }
    return model;
  });

  std::vector<mdt::FingerprintRecord> records = train.records();
  records.reserve(m + n_syn);
  std::size_t dropped_empty = 0;
  std::uint64_t clamped = 0;
  stage("synthesis", [&] {
    const std::vector<geo::LocalPoint> samples = sample_spatial(
        *fitted, n_syn, stats::derive_stream(cfg.seed, kStreamSample));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const radio::RadioPrediction pred = radio_model->predict(samples[i], i);
      if (pred.rsrp.empty()) {
        ++dropped_empty;
        continue;
      }
      clamped += pred.clamped;
      mdt::FingerprintRecord rec;
      geo::GeoPoint g = train.projection().unproject(samples[i]);
      g.lat = quantize6(g.lat);
      g.lon = quantize6(g.lon);
      rec.location = g;
      rec.local = train.projection().project(g);
      rec.rsrp = pred.rsrp;
      records.push_back(std::move(rec));
    }
    return 0;
  });

  report["synthetic_records"] = records.size() - m;
  report["total_records"] = records.size();
  report["clamped_values"] = clamped;
  report["dropped_empty_synthetic"] = dropped_empty;
  report["spatial_fit"] = fitted->fit_info;
  if (cfg.radio != RadioModelKind::knn) {
    const auto* gpr = dynamic_cast<const radio::GprRadioModel*>(radio_model.get());
    json skipped = json::array();
    for (const auto& [pci, reason] : gpr->model().skipped) {
      skipped.push_back({{"pci", pci}, {"reason", reason}});
    }
    report["gpr_skipped_pcis"] = skipped;
  }

  return AugmentResult{
      mdt::FingerprintDatabase(std::move(records), train.universe(),
                               train.projection()),
      std::move(report)};
}

// --- sweep ------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t base_seed, double rate, int run) {
  const auto rate_key =
      static_cast<std::uint64_t>(std::llround(rate * 1e6));
  return stats::derive_stream(stats::derive_stream(base_seed, rate_key),
                              static_cast<std::uint64_t>(run));
}

RateSummary summarize_runs(double rate, std::span<const double> means,
                           double alpha) {
  RateSummary s;
  s.rate = rate;
  const double n = static_cast<double>(means.size());
  s.mean_m = std::accumulate(means.begin(), means.end(), 0.0) / n;
  if (means.size() < 2) {
    s.ci_low = s.ci_high = s.mean_m;
    return s;
  }
  double var = 0.0;
  for (double v : means) var += (v - s.mean_m) * (v - s.mean_m);
  var /= (n - 1.0);
  const double se = std::sqrt(var / n);
  const double z = stats::normal_quantile(1.0 - alpha / 2.0);
  s.ci_low = s.mean_m - z * se;
  s.ci_high = s.mean_m + z * se;
  return s;
}

namespace {

void validate_rates(const std::vector<double>& rates) {
  if (rates.empty()) throw UsageError("rates must be non-empty");
  for (double r : rates) {
    if (r < 1.0) throw UsageError("rates must be >= 1");
  }
  if (!std::is_sorted(rates.begin(), rates.end())) {
    throw UsageError("rates must be ascending");
  }
  if (rates.front() != 1.0) throw UsageError("rates must include 1");
}

AugmentConfig make_augment_config(SpatialModelKind spatial,
                                  RadioModelKind radio, double rate,
                                  double shadow_sigma2, std::uint64_t seed,
                                  const SpatialFitConfig& fit_cfg,
                                  const radio::GprHyperGrid& gpr_grid,
                                  std::size_t gpr_cap) {
  AugmentConfig cfg;
  cfg.rate = rate;
  cfg.spatial = spatial;
  cfg.radio = radio;
  cfg.shadow_sigma2_db = shadow_sigma2;
  cfg.seed = seed;
  cfg.spatial_fit = fit_cfg;
  cfg.gpr_grid = gpr_grid;
  cfg.gpr_subsample_cap = gpr_cap;
  return cfg;
}

}  // namespace

SweepReport run_sweep(const mdt::FingerprintDatabase& train,
                      const mdt::FingerprintDatabase& test,
                      const SweepSpec& spec) {
  validate_rates(spec.rates);
  if (spec.n_runs < 1) throw UsageError("n_runs must be >= 1");
  if (!(train.projection() == test.projection())) {
    throw DataError("sweep: train and test must share a projection");
  }

  SweepReport report;
  const std::size_t n_tasks = spec.rates.size() * spec.n_runs;
  report.cells.resize(n_tasks);

  std::string failure;
  std::mutex failure_mutex;
  parallel_for(n_tasks, spec.threads, [&](std::size_t task) {
    const std::size_t rate_idx = task / spec.n_runs;
    const int run = static_cast<int>(task % spec.n_runs);
    const double rate = spec.rates[rate_idx];
    const std::uint64_t seed = run_seed(spec.seed, rate, run);
    SweepCell& cell = report.cells[task];
    cell.rate = rate;
    cell.run = run;
    cell.seed = seed;
    try {
      pos::PositioningReport eval;
      if (rate == 1.0) {
        eval = pos::evaluate_positioning(train, test, spec.wknn);
      } else {
        const AugmentResult aug = augment_database(
            train, make_augment_config(spec.spatial, spec.radio, rate,
                                       spec.shadow_sigma2_db, seed,
                                       spec.spatial_fit, spec.gpr_grid,
                                       spec.gpr_subsample_cap));
        eval = pos::evaluate_positioning(aug.augmented, test, spec.wknn);
      }
      cell.mean_m = eval.mean_m;
      cell.median_m = eval.median_m;
      cell.unlocatable = eval.unlocatable;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty()) {
        failure = "sweep failed at rate " + std::to_string(rate) + ", run " +
                  std::to_string(run) + ": " + e.what();
      }
    }
  });
  if (!failure.empty()) throw NumericalError(failure);

  std::map<double, std::vector<double>> by_rate;
  for (const auto& cell : report.cells) {
    by_rate[cell.rate].push_back(cell.mean_m);
  }
  for (double rate : spec.rates) {
    report.summary.push_back(summarize_runs(rate, by_rate[rate], spec.alpha));
  }
  if (spec.rates.size() >= 2 && spec.n_runs >= 10) {
    report.matrix = stats::significance_matrix(by_rate, spec.alpha);
  }

  report.provenance = {{"rates", spec.rates},
                       {"n_runs", spec.n_runs},
                       {"spatial_model", to_string(spec.spatial)},
                       {"radio_model", to_string(spec.radio)},
                       {"shadow_sigma2_db", spec.shadow_sigma2_db},
                       {"seed", spec.seed},
                       {"alpha", spec.alpha},
                       {"wknn",
                        {{"k", spec.wknn.k},
                         {"epsilon", spec.wknn.epsilon},
                         {"missing_floor", spec.wknn.missing_floor},
                         {"common_pci_only", spec.wknn.common_pci_only}}}};
  return report;
}

json significance_matrix_to_json(const stats::SignificanceMatrix& matrix) {
  json cells = json::array();
  for (std::size_t i = 0; i < matrix.levels.size(); ++i) {
    for (std::size_t j = 0; j < matrix.levels.size(); ++j) {
      if (i == j) continue;
      const auto& c = *matrix.cells[i][j];
      const char* verdict = c.verdict == stats::Verdict::a_better
                                ? "row_better"
                                : (c.verdict == stats::Verdict::b_better
                                       ? "row_worse"
                                       : "not_significant");
      cells.push_back({{"row_level", matrix.levels[i]},
                       {"col_level", matrix.levels[j]},
                       {"mean_diff", c.mean_diff},
                       {"ci_low", c.ci_low},
                       {"ci_high", c.ci_high},
                       {"verdict", verdict}});
    }
  }
  return json{{"levels", matrix.levels}, {"cells", cells}};
}

json sweep_report_to_json(const SweepReport& report) {
  json runs = json::array();
  for (const auto& cell : report.cells) {
    runs.push_back({{"rate", cell.rate},
                    {"run", cell.run},
                    {"mean_m", cell.mean_m},
                    {"median_m", cell.median_m},
                    {"unlocatable", cell.unlocatable},
                    {"seed", cell.seed}});
  }
  json summary = json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"rate", s.rate},
                       {"mean_m", s.mean_m},
                       {"ci_low", s.ci_low},
                       {"ci_high", s.ci_high}});
  }
  json out{{"runs", runs},
           {"summary", summary},
           {"provenance", report.provenance}};
  if (report.matrix.has_value()) {
    out["significance_matrix"] = significance_matrix_to_json(*report.matrix);
  }
  return out;
}

ModelPair model_pair_from_string(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    throw UsageError("model pair '" + s + "' must look like kde-knn");
  }
  return ModelPair{spatial_kind_from_string(s.substr(0, dash)),
                   radio_kind_from_string(s.substr(dash + 1))};
}

CompareReport run_compare_models(const mdt::FingerprintDatabase& train,
                                 const mdt::FingerprintDatabase& test,
                                 const CompareSpec& spec) {
  validate_rates(spec.rates);
  if (spec.models.size() < 2) {
    throw UsageError("compare-models: need at least 2 model configurations");
  }
  if (spec.n_runs < 1) throw UsageError("n_runs must be >= 1");
  if (!(train.projection() == test.projection())) {
    throw DataError("compare-models: train and test must share a projection");
  }

  CompareReport report;
  report.rates = spec.rates;
  for (const auto& mp : spec.models) {
    report.model_names.push_back(to_string(mp.spatial) + "-" +
                                 to_string(mp.radio));
  }
  const std::size_t n_models = spec.models.size();
  const std::size_t n_rates = spec.rates.size();
  const std::size_t runs = static_cast<std::size_t>(spec.n_runs);
  std::vector<double> means(n_models * n_rates * runs, 0.0);

  std::string failure;
  std::mutex failure_mutex;
  parallel_for(n_models * n_rates * runs, spec.threads, [&](std::size_t task) {
    const std::size_t model_idx = task / (n_rates * runs);
    const std::size_t rate_idx = (task / runs) % n_rates;
    const int run = static_cast<int>(task % runs);
    const double rate = spec.rates[rate_idx];
    const ModelPair mp = spec.models[model_idx];
    try {
      pos::PositioningReport eval;
      if (rate == 1.0) {
        eval = pos::evaluate_positioning(train, test, spec.wknn);
      } else {
        const AugmentResult aug = augment_database(
            train,
            make_augment_config(mp.spatial, mp.radio, rate,
                                spec.shadow_sigma2_db,
                                run_seed(spec.seed, rate, run),
                                spec.spatial_fit, spec.gpr_grid,
                                spec.gpr_subsample_cap));
        eval = pos::evaluate_positioning(aug.augmented, test, spec.wknn);
      }
      means[task] = eval.mean_m;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty()) {
        failure = "compare-models failed for " +
                  report.model_names[model_idx] + " at rate " +
                  std::to_string(rate) + ", run " + std::to_string(run) + ": " +
                  e.what();
      }
    }
  });
  if (!failure.empty()) throw NumericalError(failure);

  report.cells.assign(n_rates, std::vector<CompareCell>(n_models));
  for (std::size_t r = 0; r < n_rates; ++r) {
    for (std::size_t mi = 0; mi < n_models; ++mi) {
      std::span<const double> slice(&means[(mi * n_rates + r) * runs], runs);
      const RateSummary s = summarize_runs(spec.rates[r], slice, spec.alpha);
      report.cells[r][mi] = CompareCell{s.mean_m, s.ci_low, s.ci_high};
    }
  }
  report.provenance = {{"rates", spec.rates},
                       {"models", report.model_names},
                       {"n_runs", spec.n_runs},
                       {"seed", spec.seed},
                       {"alpha", spec.alpha},
                       {"shadow_sigma2_db", spec.shadow_sigma2_db}};
  return report;
}

json compare_report_to_json(const CompareReport& report) {
  json rows = json::array();
  for (std::size_t r = 0; r < report.rates.size(); ++r) {
    json row{{"rate", report.rates[r]}};
    json models;
    for (std::size_t mi = 0; mi < report.model_names.size(); ++mi) {
      models[report.model_names[mi]] = {
          {"mean_m", report.cells[r][mi].mean_m},
          {"ci_low", report.cells[r][mi].ci_low},
          {"ci_high", report.cells[r][mi].ci_high}};
    }
    row["models"] = models;
    rows.push_back(row);
  }
  return json{{"table", rows}, {"provenance", report.provenance}};
}

std::string render_compare_table(const CompareReport& report) {
  const std::size_t col_width = 22;
  const auto pad = [&](const std::string& s) {
    std::string out = s;
    if (out.size() < col_width) out.resize(col_width, ' ');
    return out;
  };
  std::string out = pad("rate");
  for (const auto& name : report.model_names) out += pad(name);
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < report.rates.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "x%g", report.rates[r]);
    out += pad(buf);
    for (std::size_t mi = 0; mi < report.model_names.size(); ++mi) {
      const auto& c = report.cells[r][mi];
      std::snprintf(buf, sizeof(buf), "%.2f +/- %.2f", c.mean_m,
                    0.5 * (c.ci_high - c.ci_low));
      out += pad(buf);
    }
    out += '\n';
  }
  return out;
}

json ks_result_to_json(const stats::KsResult& result) {
  return json{{"statistic", result.statistic},
              {"p_value", result.p_value},
              {"n_permutations", result.n_permutations}};
}

}  // namespace mdaug::pipeline
