// End-to-end checks of the command-line surface: exit codes, file
// outputs, and cross-command consistency. Runs the built binary via
// std::system.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ok]   %s\n", what.c_str());
  } else {
    std::printf("[FAIL] %s\n", what.c_str());
    ++failures;
  }
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MDAUG_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "mdaug_cli_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Missing config: usage error, exit 1.
  check(run_cli("generate --config " + (dir / "nope.json").string() +
                " --out " + dir.string()) == 1,
        "missing config exits 1");

  // Generate a small scenario.
  {
    json config{{"area_preset", "highway"}, {"name", "hw"}, {"m", 160},
                {"seed", 5}};
    std::ofstream f(dir / "hw.json");
    f << config.dump();
  }
  check(run_cli("generate --config " + (dir / "hw.json").string() + " --out " +
                dir.string()) == 0,
        "generate succeeds");
  check(fs::exists(dir / "hw.csv") && fs::exists(dir / "hw.truth.csv") &&
            fs::exists(dir / "hw.meta.json"),
        "generate writes dataset, truth and meta files");

  // Determinism: regenerate into a second directory and compare bytes.
  const fs::path dir2 = dir / "again";
  fs::create_directories(dir2);
  check(run_cli("generate --config " + (dir / "hw.json").string() + " --out " +
                dir2.string()) == 0,
        "regenerate succeeds");
  check(read_text(dir / "hw.csv") == read_text(dir2 / "hw.csv"),
        "regenerated dataset is byte-identical");

  // Corrupt CSV: data error, exit 2.
  {
    std::ofstream f(dir / "bad.csv");
    f << "Longitude,Latitude,RSRP_PCI_1\n11.0,44.0,-20\n";  // out of range
  }
  check(run_cli("evaluate --db " + (dir / "bad.csv").string() + " --test " +
                (dir / "hw.csv").string() + " --truth " +
                (dir / "hw.truth.csv").string() + " --out " + dir.string()) ==
            2,
        "range-violating CSV exits 2");

  // Augment at A = 1 must be a byte-identical copy.
  check(run_cli("augment --train " + (dir / "hw.csv").string() + " --out-csv " +
                (dir / "hw_x1.csv").string() + " --rate 1") == 0,
        "augment at rate 1 succeeds");
  check(read_text(dir / "hw.csv") == read_text(dir / "hw_x1.csv"),
        "rate-1 output equals the input byte for byte");

  // Augment at A = 3: row count and original-rows-first prefix.
  check(run_cli("augment --train " + (dir / "hw.csv").string() + " --out-csv " +
                (dir / "hw_x3.csv").string() +
                " --rate 3 --shadow-sigma2 8 --seed 2") == 0,
        "augment at rate 3 succeeds");
  {
    const std::string original = read_text(dir / "hw.csv");
    const std::string augmented = read_text(dir / "hw_x3.csv");
    check(augmented.compare(0, original.size(), original) == 0,
          "augmented file starts with the original rows");
    const auto rows = [](const std::string& s) {
      return std::count(s.begin(), s.end(), '\n') - 1;
    };
    check(rows(augmented) == 3 * rows(original),
          "augmented row count is A times the original");
    check(fs::exists(dir / "hw_x3.csv.report.json"),
          "augment writes a sidecar report");
  }

  // fit-spatial handoff into augment.
  check(run_cli("fit-spatial --train " + (dir / "hw.csv").string() +
                " --model kde --model-out " + (dir / "hw_kde.json").string() +
                " --seed 3") == 0,
        "fit-spatial succeeds");
  check(run_cli("augment --train " + (dir / "hw.csv").string() + " --out-csv " +
                (dir / "hw_pre.csv").string() +
                " --rate 2 --spatial-model " + (dir / "hw_kde.json").string() +
                " --seed 4") == 0,
        "augment accepts a pre-fitted spatial model");

  // Evaluate self-test with k = 1: zero mean error.
  const fs::path eval_dir = dir / "eval";
  check(run_cli("evaluate --db " + (dir / "hw.csv").string() + " --test " +
                (dir / "hw.csv").string() + " --truth " +
                (dir / "hw.truth.csv").string() + " --k 1 --out " +
                eval_dir.string()) == 0,
        "evaluate succeeds");
  {
    std::ifstream f(eval_dir / "evaluation.json");
    const auto summary = json::parse(f);
    check(summary["mean_m"].get<double>() == 0.0,
          "self-evaluation with k=1 has zero mean error");
    check(fs::exists(eval_dir / "errors.csv"), "evaluate writes the error vector");
    // Summary mean equals the mean of the error-vector file.
    std::ifstream ev(eval_dir / "errors.csv");
    std::string line;
    std::getline(ev, line);
    double total = 0.0;
    std::size_t n = 0;
    while (std::getline(ev, line)) {
      if (line.empty()) continue;
      total += std::stod(line);
      ++n;
    }
    check(n == summary["located"].get<std::size_t>(),
          "error vector row count matches the summary");
    check(std::abs(total / n - summary["mean_m"].get<double>()) < 1e-12,
          "summary mean equals the error-vector mean");
  }

  // Generate a test set from the same spec with a different seed, sweep.
  {
    json config{{"area_preset", "highway"}, {"name", "hw_test"}, {"m", 60},
                {"seed", 6}};
    std::ofstream f(dir / "hw_test.json");
    f << config.dump();
  }
  check(run_cli("generate --config " + (dir / "hw_test.json").string() +
                " --out " + dir.string()) == 0,
        "generate test set");
  const fs::path sweep_dir = dir / "sweep";
  check(run_cli("sweep --train " + (dir / "hw.csv").string() + " --test " +
                (dir / "hw_test.csv").string() + " --truth " +
                (dir / "hw_test.truth.csv").string() +
                " --rates 1,3 --runs 10 --shadow-sigma2 8 --seed 7 --out " +
                sweep_dir.string() + " --threads 2") == 0,
        "sweep succeeds");
  {
    std::ifstream f(sweep_dir / "sweep.json");
    const auto report = json::parse(f);
    check(report["runs"].size() == 20, "sweep report has |rates| x runs rows");
    check(report.contains("significance_matrix"),
          "sweep report carries the significance matrix");
    // Antisymmetry of the produced matrix.
    bool antisym = true;
    const auto& cells = report["significance_matrix"]["cells"];
    for (const auto& c : cells) {
      for (const auto& d : cells) {
        if (c["row_level"] == d["col_level"] &&
            c["col_level"] == d["row_level"]) {
          const std::string v1 = c["verdict"], v2 = d["verdict"];
          const bool ok = (v1 == "not_significant" && v2 == "not_significant") ||
                          (v1 == "row_better" && v2 == "row_worse") ||
                          (v1 == "row_worse" && v2 == "row_better");
          if (!ok) antisym = false;
        }
      }
    }
    check(antisym, "significance matrix is antisymmetric");
    check(fs::exists(sweep_dir / "sweep_runs.csv"), "sweep writes the runs CSV");
  }

  // ks-test subcommand.
  const fs::path ks_dir = dir / "ks";
  check(run_cli("ks-test --a " + (dir / "hw.csv").string() + " --b " +
                (dir / "hw_test.csv").string() + " --permutations 100 --out " +
                ks_dir.string()) == 0,
        "ks-test succeeds");
  {
    std::ifstream f(ks_dir / "ks_test.json");
    const auto ksj = json::parse(f);
    check(ksj["p_value"].get<double>() > 0.0, "ks-test p-value is positive");
  }

  // Unknown model name: usage error.
  check(run_cli("augment --train " + (dir / "hw.csv").string() + " --out-csv " +
                (dir / "x.csv").string() + " --rate 2 --radio forest") == 1,
        "unknown radio model exits 1");

  std::printf("%s: %d failure(s)\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
