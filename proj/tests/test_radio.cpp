#include "mdaug/radio.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

using namespace mdaug;
using geo::LocalPoint;
using mdt::Pci;

namespace {

const geo::Projection kFrame(geo::GeoPoint{44.0, 11.0});

mdt::FingerprintDatabase make_db(
    const std::vector<std::pair<LocalPoint,
                                std::vector<std::pair<Pci, double>>>>& rows) {
  std::vector<mdt::FingerprintRecord> recs;
  std::vector<Pci> universe;
  for (const auto& [loc, values] : rows) {
    mdt::FingerprintRecord rec;
    rec.local = loc;
    rec.location = kFrame.unproject(loc);
    for (const auto& [pci, v] : values) {
      rec.rsrp.set(pci, v);
      if (std::find(universe.begin(), universe.end(), pci) == universe.end()) {
        universe.push_back(pci);
      }
    }
    recs.push_back(std::move(rec));
  }
  std::sort(universe.begin(), universe.end());
  return mdt::FingerprintDatabase(std::move(recs), std::move(universe), kFrame);
}

radio::GprHyperGrid fixed_grid(double sf2, double ell, double sn2,
                               double alpha = 1.0) {
  radio::GprHyperGrid grid;
  grid.length_scales_m = {ell};
  grid.sf2_values = {sf2};
  grid.sf2_absolute = true;
  grid.sn2_values_db2 = {sn2};
  grid.alphas = {alpha};
  return grid;
}

}  // namespace

TEST_SUITE("radio") {

TEST_CASE("nearest_index basics and tie rule") {
  const auto db = make_db({{{0, 0}, {{1, -80}}},
                           {{10, 0}, {{1, -82}}},
                           {{20, 0}, {{1, -84}}},
                           {{30, 0}, {{1, -86}}}});
  CHECK(radio::nearest_index(db, {30.0, 0.0}) == 3);
  // (15, 0) is equidistant from records 1 and 2: smaller index wins.
  CHECK(radio::nearest_index(db, {15.0, 0.0}) == 1);
}

TEST_CASE("nearest_index agrees with a linear-scan oracle") {
  stats::Rng rng(42, 0);
  std::vector<std::pair<LocalPoint, std::vector<std::pair<Pci, double>>>> rows;
  for (int i = 0; i < 200; ++i) {
    rows.push_back({{rng.next_gaussian() * 500, rng.next_gaussian() * 500},
                    {{1, -90.0}}});
  }
  const auto db = make_db(rows);
  for (int q = 0; q < 1000; ++q) {
    const LocalPoint p{rng.next_gaussian() * 600, rng.next_gaussian() * 600};
    std::size_t oracle = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < db.size(); ++j) {
      const auto& loc = db.records()[j].local;
      const double d = std::hypot(p.x - loc.x, p.y - loc.y);
      if (d < best) {
        best = d;
        oracle = j;
      }
    }
    CHECK(radio::nearest_index(db, p) == oracle);
  }
}

TEST_CASE("knn_transfer with zero shadowing copies the nearest record") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {3, -95}}},
                           {{100, 0}, {{2, -70}}}});
  const auto pred = radio::knn_transfer(db, {0.5, -0.5}, {0.0, 9});
  CHECK(pred.rsrp == db.records()[0].rsrp);
  CHECK(pred.provenance == "knn");
  CHECK(pred.clamped == 0);
}

TEST_CASE("knn_transfer keeps absent PCIs absent") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {3, -95}}},
                           {{100, 0}, {{2, -70}}}});
  const auto pred = radio::knn_transfer(db, {1.0, 0.0}, {4.0, 7});
  CHECK(pred.rsrp.contains(1));
  CHECK(pred.rsrp.contains(3));
  CHECK_FALSE(pred.rsrp.contains(2));
}

TEST_CASE("knn_transfer output PCI set equals the nearest record's set") {
  stats::Rng rng(6, 0);
  std::vector<std::pair<LocalPoint, std::vector<std::pair<Pci, double>>>> rows;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::pair<Pci, double>> vals;
    for (Pci c = 1; c <= 6; ++c) {
      if (rng.next_double() < 0.5) vals.push_back({c, -80.0 - 5.0 * c});
    }
    if (vals.empty()) vals.push_back({1, -81.0});
    rows.push_back({{rng.next_gaussian() * 300, rng.next_gaussian() * 300}, vals});
  }
  const auto db = make_db(rows);
  for (int q = 0; q < 100; ++q) {
    const LocalPoint p{rng.next_gaussian() * 350, rng.next_gaussian() * 350};
    const auto j = radio::nearest_index(db, p);
    const auto pred = radio::knn_transfer(db, p, {6.0, 3}, q);
    REQUIRE(pred.rsrp.size() == db.records()[j].rsrp.size());
    for (std::size_t e = 0; e < pred.rsrp.entries().size(); ++e) {
      CHECK(pred.rsrp.entries()[e].first ==
            db.records()[j].rsrp.entries()[e].first);
    }
  }
}

TEST_CASE("knn_transfer shadowing variance matches the spec preset") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {2, -95}}}});
  const double sigma2 = 8.8;  // city-center preset value
  std::vector<double> s1, s2;
  for (int i = 0; i < 10000; ++i) {
    const auto pred = radio::knn_transfer(db, {0, 0}, {sigma2, 11},
                                          static_cast<std::uint64_t>(i));
    s1.push_back(*pred.rsrp.get(1) - (-80.0));
    s2.push_back(*pred.rsrp.get(2) - (-95.0));
  }
  for (const auto* s : {&s1, &s2}) {
    double mean = 0.0;
    for (double v : *s) mean += v;
    mean /= s->size();
    double var = 0.0;
    for (double v : *s) var += (v - mean) * (v - mean);
    var /= (s->size() - 1);
    CHECK(var == doctest::Approx(sigma2).epsilon(0.05));
  }
}

TEST_CASE("knn_transfer draws are reproducible per (seed, ordinal)") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {2, -95}, {7, -101}}}});
  const auto a = radio::knn_transfer(db, {3, 4}, {5.0, 42}, 17);
  const auto b = radio::knn_transfer(db, {3, 4}, {5.0, 42}, 17);
  CHECK(a.rsrp == b.rsrp);
  const auto c = radio::knn_transfer(db, {3, 4}, {5.0, 42}, 18);
  CHECK(a.rsrp != c.rsrp);
}

TEST_CASE("knn_transfer clamps into the RSRP validity range") {
  const auto db = make_db({{{0, 0}, {{1, -159.5}}}});
  int clamped = 0;
  for (int i = 0; i < 200; ++i) {
    const auto pred = radio::knn_transfer(db, {0, 0}, {25.0, 5},
                                          static_cast<std::uint64_t>(i));
    const double v = *pred.rsrp.get(1);
    CHECK(v >= mdt::kRsrpMinDbm);
    CHECK(v <= mdt::kRsrpMaxDbm);
    clamped += pred.clamped;
  }
  CHECK(clamped > 0);
}

TEST_CASE("RQ kernel approaches SE as alpha grows") {
  for (double r : {0.0, 10.0, 150.0, 900.0}) {
    const double se = radio::kernel_value(radio::KernelKind::se, r, 2.0, 120.0, 0);
    const double rq =
        radio::kernel_value(radio::KernelKind::rq, r, 2.0, 120.0, 1e6);
    CHECK(rq == doctest::Approx(se).epsilon(1e-6));
  }
}

TEST_CASE("gpr interpolates a single training point") {
  const std::vector<LocalPoint> x{{10.0, 20.0}};
  Eigen::VectorXd y(1);
  y << -77.0;
  const auto g = radio::gpr_fit_single(x, y, radio::KernelKind::se,
                                       fixed_grid(4.0, 100.0, 1e-12));
  CHECK(radio::gpr_posterior_mean(g, radio::KernelKind::se, {10.0, 20.0}) ==
        doctest::Approx(-77.0).epsilon(1e-4));
}

TEST_CASE("gpr matches the hand-rolled 2x2 closed form") {
  const std::vector<LocalPoint> x{{0.0, 0.0}, {100.0, 0.0}};
  Eigen::VectorXd y(2);
  y << -80.0, -90.0;
  const double sf2 = 9.0, ell = 70.0, sn2 = 0.5;
  const auto g = radio::gpr_fit_single(x, y, radio::KernelKind::se,
                                       fixed_grid(sf2, ell, sn2));
  const LocalPoint q{30.0, 10.0};

  // Oracle: k*' (K + sn2 I)^-1 (y - mean) + mean with an explicit inverse.
  const double mean = -85.0;
  const auto kse = [&](double d) {
    return sf2 * std::exp(-d * d / (2.0 * ell * ell));
  };
  const double k12 = kse(100.0);
  const double a11 = sf2 + sn2, a22 = sf2 + sn2;
  const double det = a11 * a22 - k12 * k12;
  const double y1 = -80.0 - mean, y2 = -90.0 - mean;
  const double w1 = (a22 * y1 - k12 * y2) / det;
  const double w2 = (-k12 * y1 + a11 * y2) / det;
  const double k1 = kse(std::hypot(q.x, q.y));
  const double k2 = kse(std::hypot(q.x - 100.0, q.y));
  const double oracle = mean + k1 * w1 + k2 * w2;

  CHECK(radio::gpr_posterior_mean(g, radio::KernelKind::se, q) ==
        doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("gpr matches a dense-solve oracle on 5-point sets") {
  stats::Rng rng(33, 0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<LocalPoint> x;
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) {
      x.push_back({rng.next_gaussian() * 200, rng.next_gaussian() * 200});
      y(i) = -90.0 + rng.next_gaussian() * 4.0;
    }
    const double sf2 = 6.0, ell = 150.0, sn2 = 1.0;
    const auto g = radio::gpr_fit_single(x, y, radio::KernelKind::se,
                                         fixed_grid(sf2, ell, sn2));

    // Gaussian elimination with partial pivoting, written out in full.
    double a[5][6];
    const double mean = y.mean();
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double d = std::hypot(x[i].x - x[j].x, x[i].y - x[j].y);
        a[i][j] = sf2 * std::exp(-d * d / (2.0 * ell * ell));
      }
      a[i][i] += sn2;
      a[i][5] = y(i) - mean;
    }
    for (int col = 0; col < 5; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 5; ++r) {
        if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
      }
      for (int c = 0; c < 6; ++c) std::swap(a[col][c], a[pivot][c]);
      for (int r = 0; r < 5; ++r) {
        if (r == col) continue;
        const double f = a[r][col] / a[col][col];
        for (int c = 0; c < 6; ++c) a[r][c] -= f * a[col][c];
      }
    }
    double w[5];
    for (int i = 0; i < 5; ++i) w[i] = a[i][5] / a[i][i];

    const LocalPoint q{rng.next_gaussian() * 150, rng.next_gaussian() * 150};
    double oracle = mean;
    for (int i = 0; i < 5; ++i) {
      const double d = std::hypot(q.x - x[i].x, q.y - x[i].y);
      oracle += sf2 * std::exp(-d * d / (2.0 * ell * ell)) * w[i];
    }
    CHECK(radio::gpr_posterior_mean(g, radio::KernelKind::se, q) ==
          doctest::Approx(oracle).epsilon(1e-11));
  }
}

TEST_CASE("gpr far-field prediction reverts to the prior mean") {
  stats::Rng rng(8, 0);
  std::vector<LocalPoint> x;
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    x.push_back({rng.next_gaussian() * 30, rng.next_gaussian() * 30});
    y(i) = -85.0 + rng.next_gaussian() * 3.0;
  }
  const double ell = 50.0;
  const auto g = radio::gpr_fit_single(x, y, radio::KernelKind::se,
                                       fixed_grid(9.0, ell, 0.5));
  const double far = 12.0 * ell;
  CHECK(radio::gpr_posterior_mean(g, radio::KernelKind::se, {far, far}) ==
        doctest::Approx(g.prior_mean_dbm).epsilon(1e-10));
  CHECK(std::abs(radio::gpr_posterior_mean(g, radio::KernelKind::se,
                                           {far, 0.0}) -
                 g.prior_mean_dbm) < 1e-3);
}

TEST_CASE("gpr grid selection maximizes the log marginal likelihood") {
  stats::Rng rng(44, 0);
  std::vector<LocalPoint> x;
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    x.push_back({rng.next_gaussian() * 250, rng.next_gaussian() * 250});
    y(i) = -90.0 + 8.0 * std::sin(x.back().x / 200.0) + rng.next_gaussian();
  }
  radio::GprHyperGrid grid;
  grid.length_scales_m = {30.0, 100.0, 300.0, 1000.0};
  grid.sf2_values = {2.0, 8.0, 32.0};
  grid.sf2_absolute = true;
  grid.sn2_values_db2 = {0.1, 1.0, 10.0};
  const auto g = radio::gpr_fit_single(x, y, radio::KernelKind::se, grid);

  const Eigen::VectorXd yc = y.array() - y.mean();
  double best = -std::numeric_limits<double>::infinity();
  for (double ell : grid.length_scales_m) {
    for (double sf2 : grid.sf2_values) {
      for (double sn2 : grid.sn2_values_db2) {
        best = std::max(best, radio::gpr_log_marginal(
                                  x, yc, radio::KernelKind::se, sf2, ell, sn2,
                                  1.0));
      }
    }
  }
  CHECK(g.log_marginal == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("gpr posterior mean is linear in the targets") {
  stats::Rng rng(55, 0);
  std::vector<LocalPoint> x;
  Eigen::VectorXd y1(6), y2(6);
  for (int i = 0; i < 6; ++i) {
    x.push_back({rng.next_gaussian() * 100, rng.next_gaussian() * 100});
    y1(i) = -95.0 + rng.next_gaussian() * 2.0;
    y2(i) = -55.0 + rng.next_gaussian() * 1.5;
  }
  const auto grid = fixed_grid(5.0, 120.0, 0.7);
  const auto ga = radio::gpr_fit_single(x, y1, radio::KernelKind::se, grid);
  const auto gb = radio::gpr_fit_single(x, y2, radio::KernelKind::se, grid);
  const auto gsum =
      radio::gpr_fit_single(x, Eigen::VectorXd(y1 + y2), radio::KernelKind::se,
                            grid);
  for (int i = 0; i < 10; ++i) {
    const LocalPoint q{rng.next_gaussian() * 120, rng.next_gaussian() * 120};
    const double sum_of_preds =
        radio::gpr_posterior_mean(ga, radio::KernelKind::se, q) +
        radio::gpr_posterior_mean(gb, radio::KernelKind::se, q);
    const double pred_of_sum =
        radio::gpr_posterior_mean(gsum, radio::KernelKind::se, q);
    CHECK(pred_of_sum == doctest::Approx(sum_of_preds).epsilon(1e-9));
  }
}

TEST_CASE("gpr_fit skips thin PCIs and subsamples deterministically") {
  stats::Rng rng(66, 0);
  std::vector<std::pair<LocalPoint, std::vector<std::pair<Pci, double>>>> rows;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::pair<Pci, double>> vals{{1, -85.0 + rng.next_gaussian()}};
    if (i < 3) vals.push_back({9, -100.0});  // PCI 9: only 3 observations
    rows.push_back({{rng.next_gaussian() * 100, rng.next_gaussian() * 100},
                    vals});
  }
  const auto db = make_db(rows);
  const auto grid = fixed_grid(4.0, 100.0, 1.0);
  const auto model = radio::gpr_fit(db, radio::KernelKind::se, grid, 20, 5);
  CHECK(model.per_pci.count(1) == 1);
  CHECK(model.per_pci.count(9) == 0);
  REQUIRE(model.skipped.size() == 1);
  CHECK(model.skipped[0].first == 9);
  CHECK(model.per_pci.at(1).train_x.size() == 20);  // capped

  const auto again = radio::gpr_fit(db, radio::KernelKind::se, grid, 20, 5);
  CHECK(again.per_pci.at(1).train_y == model.per_pci.at(1).train_y);
}

TEST_CASE("mae_evaluate: exact predictor has zero error") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {2, -90}}},
                           {{50, 0}, {{1, -85}}},
                           {{0, 50}, {{2, -95}}}});
  const radio::KnnRadioModel model(db, {0.0, 0});
  const auto report = radio::mae_evaluate(model, db);
  CHECK(report.aggregate_mae == 0.0);
  CHECK(report.coverage == doctest::Approx(1.0));
  CHECK(report.observed_pairs == 4);
}

namespace {

class BiasModel final : public radio::RadioModel {
 public:
  BiasModel(const mdt::FingerprintDatabase& db, double bias)
      : db_(&db), bias_(bias) {}
  radio::RadioPrediction predict(const LocalPoint& p,
                                 std::uint64_t) const override {
    radio::RadioPrediction pred;
    pred.provenance = "bias";
    const auto j = radio::nearest_index(*db_, p);
    for (const auto& [pci, v] : db_->records()[j].rsrp.entries()) {
      pred.rsrp.set(pci, v + bias_);
    }
    return pred;
  }
  std::string name() const override { return "bias"; }

 private:
  const mdt::FingerprintDatabase* db_;
  double bias_;
};

}  // namespace

TEST_CASE("mae_evaluate: constant bias is reported exactly") {
  const auto db = make_db({{{0, 0}, {{1, -80}, {2, -90}}},
                           {{50, 0}, {{1, -85}}},
                           {{0, 50}, {{2, -95}}}});
  const BiasModel model(db, 2.0);
  const auto report = radio::mae_evaluate(model, db);
  CHECK(report.aggregate_mae == doctest::Approx(2.0));
}

namespace {

// Emits a fixed prediction per test-record ordinal.
class TableModel final : public radio::RadioModel {
 public:
  explicit TableModel(std::vector<mdt::SparseRsrp> rows)
      : rows_(std::move(rows)) {}
  radio::RadioPrediction predict(const LocalPoint&,
                                 std::uint64_t ordinal) const override {
    radio::RadioPrediction pred;
    pred.provenance = "table";
    pred.rsrp = rows_.at(ordinal);
    return pred;
  }
  std::string name() const override { return "table"; }

 private:
  std::vector<mdt::SparseRsrp> rows_;
};

}  // namespace

TEST_CASE("mae_evaluate: mixed toy case averages to 2.0") {
  // Observed pairs and hand-set absolute errors: {1, 3, 2}.
  const auto test = make_db({{{0, 0}, {{1, -80}}},
                             {{10, 0}, {{1, -90}}},
                             {{20, 0}, {{2, -100}}}});
  std::vector<mdt::SparseRsrp> rows(3);
  rows[0].set(1, -79.0);   // error 1
  rows[1].set(1, -87.0);   // error 3
  rows[2].set(2, -102.0);  // error 2
  const TableModel model(std::move(rows));
  const auto report = radio::mae_evaluate(model, test);
  CHECK(report.aggregate_mae == doctest::Approx(2.0));
  CHECK(report.per_pci_mae.at(1) == doctest::Approx(2.0));
  CHECK(report.per_pci_mae.at(2) == doctest::Approx(2.0));
  CHECK(report.coverage == doctest::Approx(1.0));
}

TEST_CASE("mae_evaluate: no overlapping PCIs is an error") {
  const auto test = make_db({{{0, 0}, {{1, -80}}}});
  std::vector<mdt::SparseRsrp> rows(1);
  rows[0].set(2, -90.0);  // different PCI than observed
  const TableModel model(std::move(rows));
  CHECK_THROWS_WITH_AS(radio::mae_evaluate(model, test),
                       doctest::Contains("no overlapping"), DataError);
}

TEST_CASE("coverage counts pairs without predictions") {
  const auto test = make_db({{{0, 0}, {{1, -80}, {2, -90}}}});
  std::vector<mdt::SparseRsrp> rows(1);
  rows[0].set(1, -80.5);  // PCI 2 left unpredicted
  const TableModel model(std::move(rows));
  const auto report = radio::mae_evaluate(model, test);
  CHECK(report.coverage == doctest::Approx(0.5));
  CHECK(report.evaluated_pairs == 1);
  CHECK(report.observed_pairs == 2);
}

}  // TEST_SUITE
