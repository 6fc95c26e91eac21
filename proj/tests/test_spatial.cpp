#include "mdaug/spatial.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

using namespace mdaug;
using geo::LocalPoint;
using spatial::KdeModel;

namespace {

std::vector<LocalPoint> gaussian_points(std::size_t n, double sigma,
                                        std::uint64_t seed, double cx = 0.0,
                                        double cy = 0.0) {
  stats::Rng rng(seed, 0);
  std::vector<LocalPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({cx + sigma * rng.next_gaussian(),
                   cy + sigma * rng.next_gaussian()});
  }
  return pts;
}

}  // namespace

TEST_SUITE("spatial") {

TEST_CASE("kde density peak of a single unit-bandwidth kernel") {
  const KdeModel model{{{0.0, 0.0}}, 1.0};
  CHECK(spatial::kde_density(model, {0.0, 0.0}) ==
        doctest::Approx(1.0 / (2.0 * geo::kPi)).epsilon(1e-12));
  CHECK(spatial::kde_density(model, {0.0, 0.0}) ==
        doctest::Approx(0.1591549).epsilon(1e-6));
}

TEST_CASE("kde density is symmetric for a symmetric center set") {
  const KdeModel model{{{-3.0, 0.0}, {3.0, 0.0}}, 1.7};
  for (double b : {0.5, 1.0, 2.5}) {
    CHECK(spatial::kde_density(model, {0.0, b}) ==
          doctest::Approx(spatial::kde_density(model, {0.0, -b})).epsilon(1e-14));
  }
}

TEST_CASE("kde density equals the explicit two-term sum") {
  const LocalPoint c1{12.0, -5.0};
  const LocalPoint c2{-7.0, 3.0};
  const double h = 9.0;
  const KdeModel model{{c1, c2}, h};
  const LocalPoint q{2.0, 1.0};
  const auto term = [&](const LocalPoint& c) {
    const double d2 = (q.x - c.x) * (q.x - c.x) + (q.y - c.y) * (q.y - c.y);
    return std::exp(-d2 / (2.0 * h * h)) / (2.0 * geo::kPi * h * h);
  };
  CHECK(spatial::kde_density(model, q) ==
        doctest::Approx(0.5 * (term(c1) + term(c2))).epsilon(1e-14));
}

TEST_CASE("kde log-likelihood basics") {
  const KdeModel model{{{0.0, 0.0}}, 1.0};
  const std::vector<LocalPoint> at_center{{0.0, 0.0}};
  CHECK(spatial::kde_log_likelihood(model, at_center) ==
        doctest::Approx(std::log(1.0 / (2.0 * geo::kPi))).epsilon(1e-12));
  CHECK(spatial::kde_log_likelihood(model, at_center) ==
        doctest::Approx(-1.83788).epsilon(1e-5));

  std::vector<LocalPoint> with_far = at_center;
  with_far.push_back({50.0, 0.0});
  CHECK(spatial::kde_log_likelihood(model, with_far) <
        spatial::kde_log_likelihood(model, at_center));

  // Far points stay finite through the log-sum-exp path.
  const std::vector<LocalPoint> very_far{{5.0e5, -3.0e5}};
  CHECK(std::isfinite(spatial::kde_log_likelihood(model, very_far)));
  CHECK_THROWS_AS(spatial::kde_log_likelihood(model, {}), DataError);
}

TEST_CASE("kde log-likelihood composes from per-point densities") {
  const auto centers = gaussian_points(40, 30.0, 5);
  const KdeModel model{centers, 12.0};
  const auto eval = gaussian_points(25, 45.0, 6);
  double direct = 0.0;
  for (const auto& p : eval) direct += std::log(spatial::kde_density(model, p));
  CHECK(spatial::kde_log_likelihood(model, eval) ==
        doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("select_bandwidth trivial grids") {
  const auto train = gaussian_points(50, 10.0, 1);
  const auto val = gaussian_points(20, 10.0, 2);
  const std::vector<double> single{25.0};
  CHECK(spatial::select_bandwidth(train, val, single).chosen == 0);

  const std::vector<double> grid{1.0, 10.0, 1000.0};
  const auto search = spatial::select_bandwidth(train, val, grid);
  for (double nll : search.val_nll) {
    CHECK(search.val_nll[search.chosen] <= nll);
  }

  // An exact duplicate candidate ties; the first (smallest h) wins.
  const std::vector<double> dup{5.0, 5.0};
  CHECK(spatial::select_bandwidth(train, val, dup).chosen == 0);

  CHECK_THROWS_AS(spatial::select_bandwidth(train, val, {}), UsageError);
}

TEST_CASE("select_bandwidth finds a sane bandwidth for a known Gaussian") {
  const auto train = gaussian_points(500, 50.0, 11);
  const auto val = gaussian_points(200, 50.0, 12);
  const auto grid = spatial::default_bandwidth_grid();
  const auto search = spatial::select_bandwidth(train, val, grid);
  const double chosen_h = search.grid[search.chosen];
  CHECK(chosen_h >= 10.0);
  CHECK(chosen_h <= 200.0);

  // Exhaustive recheck: the reported argmin is the global grid minimum.
  for (std::size_t i = 0; i < search.val_nll.size(); ++i) {
    CHECK(search.val_nll[search.chosen] <= search.val_nll[i]);
  }
}

TEST_CASE("kde_sample degenerates to the centers as h approaches 0") {
  const auto centers = gaussian_points(10, 100.0, 3);
  const KdeModel model{centers, 1e-9};
  const auto samples = spatial::kde_sample(model, 100, 77);
  for (const auto& s : samples) {
    double best = 1e30;
    for (const auto& c : centers) {
      best = std::min(best, std::hypot(s.x - c.x, s.y - c.y));
    }
    CHECK(best < 1e-6);
  }
}

TEST_CASE("kde_sample is deterministic given the seed") {
  const KdeModel model{gaussian_points(20, 10.0, 4), 5.0};
  const auto a = spatial::kde_sample(model, 50, 123);
  const auto b = spatial::kde_sample(model, 50, 123);
  CHECK(a == b);
  const auto c = spatial::kde_sample(model, 50, 124);
  CHECK(a != c);
}

TEST_CASE("kde_sample matches the kernel second moment") {
  const KdeModel model{{{0.0, 0.0}}, 10.0};
  const auto samples = spatial::kde_sample(model, 20000, 99);
  double sx = 0.0, sy = 0.0;
  for (const auto& p : samples) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(samples.size());
  const double mx = sx / n;
  const double my = sy / n;
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (const auto& p : samples) {
    cxx += (p.x - mx) * (p.x - mx);
    cyy += (p.y - my) * (p.y - my);
    cxy += (p.x - mx) * (p.y - my);
  }
  cxx /= n;
  cyy /= n;
  cxy /= n;
  CHECK(cxx == doctest::Approx(100.0).epsilon(0.05));
  CHECK(cyy == doctest::Approx(100.0).epsilon(0.05));
  CHECK(std::abs(cxy) < 5.0);  // 5% of the 100 m^2 variance scale
}

TEST_CASE("kde density integrates to 1 over a +/- 6h grid") {
  const auto centers = gaussian_points(5, 20.0, 8);
  const KdeModel model{centers, 37.0};
  double lo_x = 1e30, hi_x = -1e30, lo_y = 1e30, hi_y = -1e30;
  for (const auto& c : centers) {
    lo_x = std::min(lo_x, c.x);
    hi_x = std::max(hi_x, c.x);
    lo_y = std::min(lo_y, c.y);
    hi_y = std::max(hi_y, c.y);
  }
  const double pad = 6.0 * model.bandwidth_m;
  const int steps = 220;
  const double dx = (hi_x - lo_x + 2 * pad) / steps;
  const double dy = (hi_y - lo_y + 2 * pad) / steps;
  double mass = 0.0;
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j < steps; ++j) {
      const LocalPoint p{lo_x - pad + (i + 0.5) * dx,
                         lo_y - pad + (j + 0.5) * dy};
      mass += spatial::kde_density(model, p) * dx * dy;
    }
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("kde density is translation equivariant") {
  auto centers = gaussian_points(15, 25.0, 9);
  const KdeModel model{centers, 14.0};
  const LocalPoint q{7.0, -3.0};
  const double base = spatial::kde_density(model, q);
  const LocalPoint shift{1234.5, -987.5};
  for (auto& c : centers) {
    c.x += shift.x;
    c.y += shift.y;
  }
  const KdeModel moved{centers, 14.0};
  const double shifted =
      spatial::kde_density(moved, {q.x + shift.x, q.y + shift.y});
  CHECK(shifted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gmm with k = 1 recovers the sample mean and MLE covariance") {
  const auto pts = gaussian_points(200, 30.0, 14, 5.0, -8.0);
  const std::vector<int> ks{1};
  const auto model = spatial::gmm_fit(pts, ks, 0);
  REQUIRE(model.components.size() == 1);

  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (const auto& p : pts) {
    cxx += (p.x - mx) * (p.x - mx);
    cyy += (p.y - my) * (p.y - my);
    cxy += (p.x - mx) * (p.y - my);
  }
  cxx /= pts.size();  // MLE normalizer 1/m
  cyy /= pts.size();
  cxy /= pts.size();

  const auto& comp = model.components[0];
  CHECK(comp.weight == doctest::Approx(1.0));
  CHECK(comp.mean(0) == doctest::Approx(mx).epsilon(1e-9));
  CHECK(comp.mean(1) == doctest::Approx(my).epsilon(1e-9));
  CHECK(comp.covariance(0, 0) == doctest::Approx(cxx).epsilon(1e-9));
  CHECK(comp.covariance(1, 1) == doctest::Approx(cyy).epsilon(1e-9));
  CHECK(comp.covariance(0, 1) == doctest::Approx(cxy).epsilon(1e-6));
}

TEST_CASE("gmm EM log-likelihood is non-decreasing") {
  auto pts = gaussian_points(150, 20.0, 15);
  const auto far = gaussian_points(150, 20.0, 16, 300.0, 0.0);
  pts.insert(pts.end(), far.begin(), far.end());
  const std::vector<int> ks{3};
  const auto model = spatial::gmm_fit(pts, ks, 2);
  const auto& history = model.ll_history[0];
  REQUIRE(history.size() >= 2);
  for (std::size_t i = 1; i < history.size(); ++i) {
    CHECK(history[i] >= history[i - 1] - 1e-9 * std::abs(history[i - 1]));
  }
}

TEST_CASE("gmm covariances stay SPD through every EM iteration") {
  auto pts = gaussian_points(120, 15.0, 17);
  const auto far = gaussian_points(80, 10.0, 18, 200.0, 150.0);
  pts.insert(pts.end(), far.begin(), far.end());
  const std::vector<int> ks{1, 2, 4};
  const auto model = spatial::gmm_fit(pts, ks, 3);
  for (const auto& per_k : model.min_eigenvalue) {
    for (double eig : per_k) CHECK(eig > 0.0);
  }
}

TEST_CASE("gmm BIC selects two components for two separated clusters") {
  // Separation 100x the cluster sigma.
  auto pts = gaussian_points(150, 5.0, 19, 0.0, 0.0);
  const auto far = gaussian_points(150, 5.0, 20, 500.0, 0.0);
  pts.insert(pts.end(), far.begin(), far.end());
  const std::vector<int> ks{1, 2};
  const auto model = spatial::gmm_fit(pts, ks, 4);

  // Recompute both BIC values from the reported log-likelihoods.
  const double log_m = std::log(static_cast<double>(pts.size()));
  const double bic1 = -2.0 * model.final_log_likelihood[0] + 5.0 * log_m;
  const double bic2 = -2.0 * model.final_log_likelihood[1] + 11.0 * log_m;
  CHECK(model.bic[0] == doctest::Approx(bic1));
  CHECK(model.bic[1] == doctest::Approx(bic2));
  CHECK(bic2 < bic1);
  CHECK(model.chosen_index == 1);
  CHECK(model.components.size() == 2);
}

TEST_CASE("gmm density: single component peak") {
  spatial::GmmModel model;
  spatial::GmmComponent comp;
  comp.weight = 1.0;
  comp.mean << 0.0, 0.0;
  const double sigma2 = 16.0;
  comp.covariance = sigma2 * Eigen::Matrix2d::Identity();
  model.components.push_back(comp);
  CHECK(spatial::gmm_density(model, {0.0, 0.0}) ==
        doctest::Approx(1.0 / (2.0 * geo::kPi * sigma2)).epsilon(1e-12));
}

TEST_CASE("gmm with kernel-shaped components equals the kde density") {
  const auto centers = gaussian_points(12, 40.0, 21);
  const double h = 18.0;
  const KdeModel kde{centers, h};
  spatial::GmmModel gmm;
  for (const auto& c : centers) {
    spatial::GmmComponent comp;
    comp.weight = 1.0 / static_cast<double>(centers.size());
    comp.mean << c.x, c.y;
    comp.covariance = h * h * Eigen::Matrix2d::Identity();
    gmm.components.push_back(comp);
  }
  stats::Rng rng(22, 0);
  for (int i = 0; i < 40; ++i) {
    const LocalPoint q{rng.next_gaussian() * 60.0, rng.next_gaussian() * 60.0};
    const double kd = spatial::kde_density(kde, q);
    const double gd = spatial::gmm_density(gmm, q);
    CHECK(gd == doctest::Approx(kd).epsilon(1e-12));
  }
}

TEST_CASE("gmm sampling matches the mixture mean") {
  spatial::GmmModel model;
  spatial::GmmComponent a, b;
  a.weight = 0.3;
  a.mean << -50.0, 10.0;
  a.covariance = 25.0 * Eigen::Matrix2d::Identity();
  b.weight = 0.7;
  b.mean << 40.0, -20.0;
  b.covariance = 49.0 * Eigen::Matrix2d::Identity();
  model.components = {a, b};

  const std::size_t n = 20000;
  const auto samples = spatial::gmm_sample(model, n, 55);
  double mx = 0.0, my = 0.0;
  for (const auto& p : samples) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  const double ex = 0.3 * -50.0 + 0.7 * 40.0;
  const double ey = 0.3 * 10.0 + 0.7 * -20.0;
  // Component spread dominates the standard error of the mean.
  const double spread_x = std::sqrt(0.3 * 0.7) * 90.0;  // between-mean distance
  const double se = 3.0 * spread_x / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mx - ex) < se);
  CHECK(std::abs(my - ey) < se);
}

TEST_CASE("gmm_fit rejects insufficient data") {
  const auto pts = gaussian_points(10, 5.0, 23);
  const std::vector<int> ks{8};
  CHECK_THROWS_AS(spatial::gmm_fit(pts, ks, 0), DataError);
}

}  // TEST_SUITE
