#ifndef MDAUG_SPATIAL_HPP
#define MDAUG_SPATIAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mdaug/geo.hpp"

namespace mdaug::spatial {

// Gaussian KDE over projected locations. Density is the bivariate
// product kernel f(p) = (1/m) sum_i (2 pi h^2)^-1 exp(-|p - p_i|^2 / 2h^2),
// which integrates to 1 over R^2.
struct KdeModel {
  std::vector<geo::LocalPoint> centers;
  double bandwidth_m = 0.0;
};

double kde_density(const KdeModel& model, const geo::LocalPoint& p);
double kde_log_density(const KdeModel& model, const geo::LocalPoint& p);

// Total log-likelihood of eval_set under the model (log-sum-exp inside,
// so far-away points stay finite).
double kde_log_likelihood(const KdeModel& model,
                          std::span<const geo::LocalPoint> eval_set);

struct BandwidthSearch {
  std::vector<double> grid;     // candidate bandwidths, ascending (meters)
  std::size_t chosen = 0;       // argmin of val_nll; ties -> smallest h
  std::vector<double> val_nll;  // validation negative log-likelihood
};

// Validation-NLL bandwidth selection over an explicit grid.
BandwidthSearch select_bandwidth(std::span<const geo::LocalPoint> train,
                                 std::span<const geo::LocalPoint> val,
                                 std::span<const double> grid);

// 20 log-spaced candidates in [1, 1000] m: GPS-noise scale up to region
// scale.
std::vector<double> default_bandwidth_grid();

// Smoothed bootstrap: uniformly chosen center plus isotropic Gaussian
// offset with std h per axis. Deterministic given seed.
std::vector<geo::LocalPoint> kde_sample(const KdeModel& model, std::size_t n,
                                        std::uint64_t seed);

struct GmmComponent {
  double weight = 0.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

struct GmmModel {
  std::vector<GmmComponent> components;

  // Fit diagnostics.
  std::vector<int> k_grid;
  std::vector<double> bic;                          // per k_grid entry
  std::vector<double> final_log_likelihood;         // per k_grid entry
  std::vector<std::vector<double>> ll_history;      // per k_grid entry, per EM iteration
  std::vector<std::vector<double>> min_eigenvalue;  // per k_grid entry, per EM iteration
  std::size_t chosen_index = 0;
};

// EM with full 2x2 covariances, seeded farthest-point initialization,
// K chosen by BIC = -2 logL + (6K - 1) log m. Covariance eigenvalues are
// floored at 1e-6 m^2.
GmmModel gmm_fit(std::span<const geo::LocalPoint> train,
                 std::span<const int> k_grid, std::uint64_t seed,
                 double tol = 1e-6, int max_iter = 500);

double gmm_density(const GmmModel& model, const geo::LocalPoint& p);
std::vector<geo::LocalPoint> gmm_sample(const GmmModel& model, std::size_t n,
                                        std::uint64_t seed);

}  // namespace mdaug::spatial

#endif  // MDAUG_SPATIAL_HPP
