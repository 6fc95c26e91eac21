// mdaug: mobile-data augmentation and fingerprinting positioning toolkit.
//
// Subcommands cover the pipeline stages (generate, fit-spatial, augment,
// evaluate) and the experiment protocols (sweep, compare-models, ks-test).
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdaug/errors.hpp"
#include "mdaug/pipeline.hpp"

namespace {

using mdaug::DataError;
using mdaug::NumericalError;
using mdaug::UsageError;
using json = nlohmann::json;
namespace fs = std::filesystem;
namespace pipe = mdaug::pipeline;

json load_json_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path.string() + "': " + e.what());
  }
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
}

void write_error_vector_csv(const std::vector<double>& errors,
                            const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << "error_m\n";
  char buf[48];
  for (double e : errors) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", e);
    f << buf;
  }
}

std::vector<double> parse_rates(const std::string& s) {
  std::vector<double> rates;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) {
        try {
          rates.push_back(std::stod(cur));
        } catch (const std::exception&) {
          throw UsageError("bad rate '" + cur + "'");
        }
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  return rates;
}

// Loads test fingerprints and swaps in the sidecar ground truth, all in
// the reference database's frame.
mdaug::mdt::FingerprintDatabase load_test_with_truth(
    const fs::path& test_csv, const fs::path& truth_csv,
    const mdaug::geo::Projection& db_frame) {
  const auto test = mdaug::mdt::load_csv(test_csv);
  const auto truth = pipe::load_truth_csv(truth_csv);
  return pipe::prepare_test_set(test, truth, db_frame);
}

struct WknnOptions {
  int k = 5;
  double epsilon = 1e-6;
  double missing_floor = -130.0;
  bool common_pci_only = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", k, "wKNN neighbor count");
    cmd->add_option("--epsilon", epsilon, "wKNN weight denominator guard (dB)");
    cmd->add_option("--floor", missing_floor,
                    "imputed RSRP for undetected PCIs (dBm)");
    cmd->add_flag("--common-pci-only", common_pci_only,
                  "restrict fingerprint distance to shared PCIs");
  }
  mdaug::pos::WknnConfig config() const {
    return {k, epsilon, missing_floor, common_pci_only};
  }
};

int run(int argc, char** argv) {
  CLI::App app{"mobile-data augmentation toolkit for RSS fingerprinting"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "base RNG seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for sweeps")
      ->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize an MDT-style dataset");
  std::string gen_config;
  gen->add_option("--config", gen_config, "scenario config JSON")->required();

  // fit-spatial
  auto* fit = app.add_subcommand("fit-spatial", "fit a spatial density model");
  std::string fit_train, fit_model = "kde", fit_out;
  fit->add_option("--train", fit_train, "training dataset CSV")->required();
  fit->add_option("--model", fit_model, "kde|gmm")->capture_default_str();
  fit->add_option("--model-out", fit_out, "output model JSON")->required();

  // augment
  auto* aug = app.add_subcommand("augment", "augment a fingerprint database");
  std::string aug_train, aug_out, aug_spatial = "kde", aug_radio = "knn";
  std::string aug_model_file;
  double aug_rate = 1.0, aug_sigma2 = 0.0;
  aug->add_option("--train", aug_train, "training dataset CSV")->required();
  aug->add_option("--out-csv", aug_out, "augmented dataset CSV")->required();
  aug->add_option("--rate", aug_rate, "augmentation rate A >= 1")->required();
  aug->add_option("--spatial", aug_spatial, "kde|gmm")->capture_default_str();
  aug->add_option("--radio", aug_radio, "knn|gpr_se|gpr_rq")
      ->capture_default_str();
  aug->add_option("--shadow-sigma2", aug_sigma2,
                  "shadowing variance added to transfers (dB^2)")
      ->capture_default_str();
  aug->add_option("--spatial-model", aug_model_file,
                  "pre-fitted spatial model JSON (from fit-spatial)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "run wKNN positioning");
  std::string eval_db, eval_test, eval_truth;
  WknnOptions eval_wknn;
  eval->add_option("--db", eval_db, "reference database CSV")->required();
  eval->add_option("--test", eval_test, "test fingerprints CSV")->required();
  eval->add_option("--truth", eval_truth, "ground-truth sidecar CSV")
      ->required();
  eval_wknn.attach(eval);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "augmentation-rate sweep");
  std::string sw_train, sw_test, sw_truth, sw_rates = "1,5,10,20,30";
  std::string sw_spatial = "kde", sw_radio = "knn";
  int sw_runs = 30;
  double sw_sigma2 = 0.0;
  WknnOptions sw_wknn;
  sweep->add_option("--train", sw_train, "training dataset CSV")->required();
  sweep->add_option("--test", sw_test, "test fingerprints CSV")->required();
  sweep->add_option("--truth", sw_truth, "ground-truth sidecar CSV")->required();
  sweep->add_option("--rates", sw_rates, "comma-separated rates, must include 1")
      ->capture_default_str();
  sweep->add_option("--runs", sw_runs, "independent runs per rate")
      ->capture_default_str();
  sweep->add_option("--spatial", sw_spatial, "kde|gmm")->capture_default_str();
  sweep->add_option("--radio", sw_radio, "knn|gpr_se|gpr_rq")
      ->capture_default_str();
  sweep->add_option("--shadow-sigma2", sw_sigma2, "shadowing variance (dB^2)")
      ->capture_default_str();
  sw_wknn.attach(sweep);

  // compare-models
  auto* cmp = app.add_subcommand("compare-models",
                                 "baseline table across augmentation rates");
  std::string cm_train, cm_test, cm_truth, cm_rates = "1,5,10,20,30";
  std::string cm_models = "kde-knn,kde-gpr_se,kde-gpr_rq";
  int cm_runs = 10;
  double cm_sigma2 = 0.0;
  WknnOptions cm_wknn;
  cmp->add_option("--train", cm_train, "training dataset CSV")->required();
  cmp->add_option("--test", cm_test, "test fingerprints CSV")->required();
  cmp->add_option("--truth", cm_truth, "ground-truth sidecar CSV")->required();
  cmp->add_option("--models", cm_models, "comma-separated spatial-radio pairs")
      ->capture_default_str();
  cmp->add_option("--rates", cm_rates, "comma-separated rates")
      ->capture_default_str();
  cmp->add_option("--runs", cm_runs, "independent runs per cell")
      ->capture_default_str();
  cmp->add_option("--shadow-sigma2", cm_sigma2, "shadowing variance (dB^2)")
      ->capture_default_str();
  cm_wknn.attach(cmp);

  // ks-test
  auto* ks = app.add_subcommand("ks-test",
                                "2-D two-sample KS test on dataset locations");
  std::string ks_a, ks_b;
  int ks_perms = 200;
  ks->add_option("--a", ks_a, "first dataset CSV")->required();
  ks->add_option("--b", ks_b, "second dataset CSV")->required();
  ks->add_option("--permutations", ks_perms, "permutation count")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // CLI11 prints the message; exit code 1 on error
  }

  const fs::path out(out_dir);

  if (gen->parsed()) {
    const fs::path config_path(gen_config);
    if (!fs::exists(config_path)) {
      throw UsageError("config file '" + config_path.string() +
                       "' does not exist");
    }
    const auto spec = pipe::spec_from_json(load_json_file(config_path));
    const auto outputs = pipe::write_generate_outputs(spec, out);
    std::printf("wrote %s (%zu records, %zu PCIs, %zu users dropped)\n",
                outputs.dataset_csv.string().c_str(), outputs.records,
                outputs.pci_count, outputs.dropped_users);
    return 0;
  }

  if (fit->parsed()) {
    const auto db = mdaug::mdt::load_csv(fit_train);
    std::vector<mdaug::geo::LocalPoint> pts;
    pts.reserve(db.size());
    for (const auto& rec : db.records()) pts.push_back(rec.local);
    pipe::SpatialFitConfig cfg;
    cfg.kind = pipe::spatial_kind_from_string(fit_model);
    cfg.seed = seed;
    const auto fitted = pipe::fit_spatial(pts, cfg);
    pipe::save_spatial_model(fitted, fit_train, fit_out);
    std::printf("wrote %s\n", fit_out.c_str());
    return 0;
  }

  if (aug->parsed()) {
    const auto train = mdaug::mdt::load_csv(aug_train);
    pipe::AugmentConfig cfg;
    cfg.rate = aug_rate;
    cfg.spatial = pipe::spatial_kind_from_string(aug_spatial);
    cfg.radio = pipe::radio_kind_from_string(aug_radio);
    cfg.shadow_sigma2_db = aug_sigma2;
    cfg.seed = seed;
    pipe::FittedSpatial prefit;
    if (!aug_model_file.empty()) {
      prefit = pipe::load_spatial_model(aug_model_file);
      cfg.prefit_spatial = &prefit;
      cfg.spatial = prefit.kind;
    }
    auto result = pipe::augment_database(train, cfg);
    if (aug_rate == 1.0) {
      // No synthesis at A = 1: the output is a byte-identical copy.
      fs::copy_file(aug_train, aug_out, fs::copy_options::overwrite_existing);
    } else {
      mdaug::mdt::write_csv(result.augmented, aug_out);
    }
    result.report["input"] = aug_train;
    result.report["output"] = aug_out;
    write_json_file(result.report, fs::path(aug_out).string() + ".report.json");
    std::printf("wrote %s (%zu records)\n", aug_out.c_str(),
                result.augmented.size());
    return 0;
  }

  if (eval->parsed()) {
    const auto db = mdaug::mdt::load_csv(eval_db);
    const auto test = load_test_with_truth(eval_test, eval_truth,
                                           db.projection());
    const auto report = mdaug::pos::evaluate_positioning(db, test,
                                                         eval_wknn.config());
    fs::create_directories(out);
    const fs::path errors_csv = out / "errors.csv";
    write_error_vector_csv(report.errors_m, errors_csv);
    json summary{{"mean_m", report.mean_m},
                 {"median_m", report.median_m},
                 {"located", report.errors_m.size()},
                 {"unlocatable", report.unlocatable},
                 {"errors_csv", errors_csv.filename().string()},
                 {"provenance",
                  {{"db", eval_db},
                   {"test", eval_test},
                   {"truth", eval_truth},
                   {"k", eval_wknn.k},
                   {"epsilon", eval_wknn.epsilon},
                   {"floor", eval_wknn.missing_floor},
                   {"common_pci_only", eval_wknn.common_pci_only}}}};
    write_json_file(summary, out / "evaluation.json");
    std::printf("mean error %.2f m, median %.2f m over %zu records "
                "(%zu unlocatable)\n",
                report.mean_m, report.median_m, report.errors_m.size(),
                report.unlocatable);
    return 0;
  }

  if (sweep->parsed()) {
    const auto train = mdaug::mdt::load_csv(sw_train);
    const auto test = load_test_with_truth(sw_test, sw_truth,
                                           train.projection());
    pipe::SweepSpec spec;
    spec.rates = parse_rates(sw_rates);
    spec.n_runs = sw_runs;
    spec.spatial = pipe::spatial_kind_from_string(sw_spatial);
    spec.radio = pipe::radio_kind_from_string(sw_radio);
    spec.wknn = sw_wknn.config();
    spec.shadow_sigma2_db = sw_sigma2;
    spec.seed = seed;
    spec.threads = threads;
    const auto report = pipe::run_sweep(train, test, spec);
    fs::create_directories(out);
    auto j = pipe::sweep_report_to_json(report);
    j["provenance"]["train"] = sw_train;
    j["provenance"]["test"] = sw_test;
    j["provenance"]["truth"] = sw_truth;
    write_json_file(j, out / "sweep.json");
    {
      std::ofstream runs_csv(out / "sweep_runs.csv", std::ios::binary);
      runs_csv << "rate,run,mean_m,median_m,unlocatable\n";
      char buf[128];
      for (const auto& cell : report.cells) {
        std::snprintf(buf, sizeof(buf), "%g,%d,%.17g,%.17g,%zu\n", cell.rate,
                      cell.run, cell.mean_m, cell.median_m, cell.unlocatable);
        runs_csv << buf;
      }
    }
    for (const auto& s : report.summary) {
      std::printf("x%-6g mean %.2f m  CI [%.2f, %.2f]\n", s.rate, s.mean_m,
                  s.ci_low, s.ci_high);
    }
    if (report.matrix.has_value()) {
      std::printf("%s", mdaug::stats::render_text_grid(*report.matrix).c_str());
    }
    return 0;
  }

  if (cmp->parsed()) {
    const auto train = mdaug::mdt::load_csv(cm_train);
    const auto test = load_test_with_truth(cm_test, cm_truth,
                                           train.projection());
    pipe::CompareSpec spec;
    spec.rates = parse_rates(cm_rates);
    spec.n_runs = cm_runs;
    spec.wknn = cm_wknn.config();
    spec.shadow_sigma2_db = cm_sigma2;
    spec.seed = seed;
    spec.threads = threads;
    std::string cur;
    for (char c : cm_models + ",") {
      if (c == ',') {
        if (!cur.empty()) {
          spec.models.push_back(pipe::model_pair_from_string(cur));
          cur.clear();
        }
      } else {
        cur.push_back(c);
      }
    }
    const auto report = pipe::run_compare_models(train, test, spec);
    fs::create_directories(out);
    auto j = pipe::compare_report_to_json(report);
    j["provenance"]["train"] = cm_train;
    j["provenance"]["test"] = cm_test;
    j["provenance"]["truth"] = cm_truth;
    write_json_file(j, out / "compare_models.json");
    std::printf("%s", pipe::render_compare_table(report).c_str());
    return 0;
  }

  if (ks->parsed()) {
    const auto db_a = mdaug::mdt::load_csv(ks_a);
    const auto db_b = mdaug::mdt::load_csv(ks_b);
    // Both samples must live in one frame; use A's projection.
    std::vector<mdaug::geo::LocalPoint> pa, pb;
    pa.reserve(db_a.size());
    pb.reserve(db_b.size());
    for (const auto& rec : db_a.records()) pa.push_back(rec.local);
    for (const auto& rec : db_b.records()) {
      pb.push_back(db_a.projection().project(rec.location));
    }
    const auto result = mdaug::stats::ks2d_test(pa, pb, ks_perms, seed);
    fs::create_directories(out);
    auto j = pipe::ks_result_to_json(result);
    j["provenance"] = {{"a", ks_a}, {"b", ks_b}, {"seed", seed}};
    write_json_file(j, out / "ks_test.json");
    std::printf("D = %.4f, p = %.4f (%d permutations)\n", result.statistic,
                result.p_value, result.n_permutations);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
