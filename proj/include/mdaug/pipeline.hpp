#ifndef MDAUG_PIPELINE_HPP
#define MDAUG_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdaug/mdt.hpp"
#include "mdaug/positioning.hpp"
#include "mdaug/radio.hpp"
#include "mdaug/scenario.hpp"
#include "mdaug/spatial.hpp"
#include "mdaug/stats.hpp"

namespace mdaug::pipeline {

using json = nlohmann::json;

enum class SpatialModelKind { kde, gmm };
enum class RadioModelKind { knn, gpr_se, gpr_rq };

std::string to_string(SpatialModelKind kind);
std::string to_string(RadioModelKind kind);
SpatialModelKind spatial_kind_from_string(const std::string& s);
RadioModelKind radio_kind_from_string(const std::string& s);

// --- scenario config / outputs -------------------------------------------

json spec_to_json(const scenario::ScenarioSpec& spec);
// Accepts either a full spec or {"area_preset": "<name>", ...overrides}.
scenario::ScenarioSpec spec_from_json(const json& j);

struct GenerateOutputs {
  std::filesystem::path dataset_csv;
  std::filesystem::path truth_csv;
  std::filesystem::path meta_json;
  std::size_t records = 0;
  std::size_t pci_count = 0;
  std::size_t dropped_users = 0;
};

// Writes <name>.csv, <name>.truth.csv and <name>.meta.json into out_dir.
GenerateOutputs write_generate_outputs(const scenario::ScenarioSpec& spec,
                                       const std::filesystem::path& out_dir);

void write_truth_csv(std::span<const geo::LocalPoint> truth,
                     const std::filesystem::path& path);
std::vector<geo::LocalPoint> load_truth_csv(const std::filesystem::path& path);

// Re-expresses `test` in `db_frame` and replaces each record's local
// coordinates with the sidecar ground truth (given in test's own frame).
mdt::FingerprintDatabase prepare_test_set(
    const mdt::FingerprintDatabase& test,
    std::span<const geo::LocalPoint> truth,
    const geo::Projection& db_frame);

// --- spatial model fit / serialization ------------------------------------

struct FittedSpatial {
  SpatialModelKind kind = SpatialModelKind::kde;
  spatial::KdeModel kde;
  spatial::GmmModel gmm;
  json fit_info;  // bandwidth search or BIC trace
};

struct SpatialFitConfig {
  SpatialModelKind kind = SpatialModelKind::kde;
  std::vector<double> bandwidth_grid;  // empty = default grid
  double val_frac = 0.2;               // internal bandwidth validation split
  int gmm_max_k = 16;
  std::uint64_t seed = 0;
};

FittedSpatial fit_spatial(std::span<const geo::LocalPoint> train,
                          const SpatialFitConfig& cfg);

std::vector<geo::LocalPoint> sample_spatial(const FittedSpatial& model,
                                            std::size_t n, std::uint64_t seed);

// Model handoff file for `fit-spatial` / `augment`. KDE centers are
// stored by reference (dataset path + row indices); GMM parameters are
// stored inline.
void save_spatial_model(const FittedSpatial& model,
                        const std::string& dataset_path,
                        const std::filesystem::path& out_path);
FittedSpatial load_spatial_model(const std::filesystem::path& path);

// --- augmentation ----------------------------------------------------------

struct AugmentConfig {
  double rate = 1.0;  // A >= 1; A = 1 means no synthesis
  SpatialModelKind spatial = SpatialModelKind::kde;
  RadioModelKind radio = RadioModelKind::knn;
  double shadow_sigma2_db = 0.0;
  std::uint64_t seed = 0;
  SpatialFitConfig spatial_fit;
  radio::KnnTransferConfig knn;
  radio::GprHyperGrid gpr_grid = radio::default_gpr_grid();
  std::size_t gpr_subsample_cap = 2000;
  const FittedSpatial* prefit_spatial = nullptr;  // optional, not owned
};

struct AugmentResult {
  mdt::FingerprintDatabase augmented;  // original rows first
  json report;
};

AugmentResult augment_database(const mdt::FingerprintDatabase& train,
                               const AugmentConfig& cfg);

// --- sweeps and model comparison -------------------------------------------

struct SweepSpec {
  std::vector<double> rates{1, 5, 10, 20, 30};
  int n_runs = 30;
  SpatialModelKind spatial = SpatialModelKind::kde;
  RadioModelKind radio = RadioModelKind::knn;
  pos::WknnConfig wknn;
  double shadow_sigma2_db = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  double alpha = 0.05;
  SpatialFitConfig spatial_fit;
  radio::GprHyperGrid gpr_grid = radio::default_gpr_grid();
  std::size_t gpr_subsample_cap = 2000;
};

struct SweepCell {
  double rate = 1.0;
  int run = 0;
  double mean_m = 0.0;
  double median_m = 0.0;
  std::size_t unlocatable = 0;
  std::uint64_t seed = 0;  // augmentation seed used for this run
};

struct RateSummary {
  double rate = 1.0;
  double mean_m = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SweepReport {
  std::vector<SweepCell> cells;          // |rates| x n_runs entries
  std::vector<RateSummary> summary;      // one per rate
  std::optional<stats::SignificanceMatrix> matrix;  // needs >= 2 rates, >= 10 runs
  json provenance;
};

// Augmentation seed for (base seed, rate, run); shared by sweep and
// compare-models so their cells agree for identical configurations.
std::uint64_t run_seed(std::uint64_t base_seed, double rate, int run);

SweepReport run_sweep(const mdt::FingerprintDatabase& train,
                      const mdt::FingerprintDatabase& test,
                      const SweepSpec& spec);

json sweep_report_to_json(const SweepReport& report);

struct ModelPair {
  SpatialModelKind spatial = SpatialModelKind::kde;
  RadioModelKind radio = RadioModelKind::knn;
};

// Parses "kde-knn", "kde-gpr_se", "gmm-gpr_rq", ...
ModelPair model_pair_from_string(const std::string& s);

struct CompareSpec {
  std::vector<ModelPair> models;
  std::vector<double> rates{1, 5, 10, 20, 30};
  int n_runs = 10;
  pos::WknnConfig wknn;
  double shadow_sigma2_db = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  double alpha = 0.05;
  SpatialFitConfig spatial_fit;
  radio::GprHyperGrid gpr_grid = radio::default_gpr_grid();
  std::size_t gpr_subsample_cap = 2000;
};

struct CompareCell {
  double mean_m = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct CompareReport {
  std::vector<double> rates;
  std::vector<std::string> model_names;
  std::vector<std::vector<CompareCell>> cells;  // [rate][model]
  json provenance;
};

CompareReport run_compare_models(const mdt::FingerprintDatabase& train,
                                 const mdt::FingerprintDatabase& test,
                                 const CompareSpec& spec);

json compare_report_to_json(const CompareReport& report);
std::string render_compare_table(const CompareReport& report);

// Mean +/- z-interval over per-run means.
RateSummary summarize_runs(double rate, std::span<const double> means,
                           double alpha);

json ks_result_to_json(const stats::KsResult& result);
json significance_matrix_to_json(const stats::SignificanceMatrix& matrix);

}  // namespace mdaug::pipeline

#endif  // MDAUG_PIPELINE_HPP
