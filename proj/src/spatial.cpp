#include "mdaug/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::spatial {

namespace {

constexpr double kTwoPi = 2.0 * geo::kPi;
constexpr double kCovEigenFloorM2 = 1e-6;

void check_kde(const KdeModel& model) {
  if (model.centers.empty()) throw DataError("kde: no centers");
  if (!(model.bandwidth_m > 0.0)) throw DataError("kde: bandwidth must be > 0");
}

double sq_dist(const geo::LocalPoint& a, const geo::LocalPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Floors the eigenvalues of a symmetric 2x2 matrix.
Eigen::Matrix2d floor_spd(const Eigen::Matrix2d& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double log_gaussian2(const Eigen::Vector2d& x, const Eigen::Vector2d& mean,
                     const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const Eigen::Vector2d d = x - mean;
  // Inverse of a 2x2 symmetric matrix, inlined.
  const double q = (cov(1, 1) * d(0) * d(0) - 2.0 * cov(0, 1) * d(0) * d(1) +
                    cov(0, 0) * d(1) * d(1)) / det;
  return -std::log(kTwoPi) - 0.5 * std::log(det) - 0.5 * q;
}

}  // namespace

double kde_density(const KdeModel& model, const geo::LocalPoint& p) {
  check_kde(model);
  const double h2 = model.bandwidth_m * model.bandwidth_m;
  const double norm = 1.0 / (kTwoPi * h2);
  double sum = 0.0;
  for (const auto& c : model.centers) {
    sum += std::exp(-sq_dist(p, c) / (2.0 * h2));
  }
  return norm * sum / static_cast<double>(model.centers.size());
}

double kde_log_density(const KdeModel& model, const geo::LocalPoint& p) {
  check_kde(model);
  const double h2 = model.bandwidth_m * model.bandwidth_m;
  double max_e = -std::numeric_limits<double>::infinity();
  for (const auto& c : model.centers) {
    max_e = std::max(max_e, -sq_dist(p, c) / (2.0 * h2));
  }
  double sum = 0.0;
  for (const auto& c : model.centers) {
    sum += std::exp(-sq_dist(p, c) / (2.0 * h2) - max_e);
  }
  return max_e + std::log(sum) - std::log(kTwoPi * h2) -
         std::log(static_cast<double>(model.centers.size()));
}

double kde_log_likelihood(const KdeModel& model,
                          std::span<const geo::LocalPoint> eval_set) {
  if (eval_set.empty()) throw DataError("kde_log_likelihood: empty eval set");
  double total = 0.0;
  for (const auto& p : eval_set) total += kde_log_density(model, p);
  return total;
}

BandwidthSearch select_bandwidth(std::span<const geo::LocalPoint> train,
                                 std::span<const geo::LocalPoint> val,
                                 std::span<const double> grid) {
  if (grid.empty()) throw UsageError("select_bandwidth: empty grid");
  if (train.empty()) throw DataError("select_bandwidth: empty train set");
  if (val.empty()) throw DataError("select_bandwidth: empty validation set");
  for (double h : grid) {
    if (!(h > 0.0)) throw UsageError("select_bandwidth: bandwidths must be > 0");
  }

  BandwidthSearch search;
  search.grid.assign(grid.begin(), grid.end());
  search.val_nll.reserve(grid.size());
  KdeModel model{{train.begin(), train.end()}, 0.0};
  for (double h : grid) {
    model.bandwidth_m = h;
    search.val_nll.push_back(-kde_log_likelihood(model, val));
  }
  search.chosen = 0;
  for (std::size_t i = 1; i < search.val_nll.size(); ++i) {
    if (search.val_nll[i] < search.val_nll[search.chosen]) search.chosen = i;
  }
  return search;
}

std::vector<double> default_bandwidth_grid() {
  std::vector<double> grid(20);
  const double lo = std::log(1.0);
  const double hi = std::log(1000.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(grid.size() - 1));
  }
  return grid;
}

std::vector<geo::LocalPoint> kde_sample(const KdeModel& model, std::size_t n,
                                        std::uint64_t seed) {
  check_kde(model);
  if (n < 1) throw UsageError("kde_sample: n must be >= 1");
  stats::Rng rng(seed, 0);
  std::vector<geo::LocalPoint> out;
  out.reserve(n);
  const auto m = static_cast<std::uint64_t>(model.centers.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = model.centers[rng.next_below(m)];
    const double gx = rng.next_gaussian();
    const double gy = rng.next_gaussian();
    out.push_back({c.x + model.bandwidth_m * gx, c.y + model.bandwidth_m * gy});
  }
  return out;
}

namespace {

struct EmState {
  std::vector<GmmComponent> comps;
  std::vector<double> ll_history;
  std::vector<double> min_eig;
  double final_ll = 0.0;
};

EmState run_em(const std::vector<Eigen::Vector2d>& pts, int k,
               std::uint64_t seed, double tol, int max_iter) {
  const std::size_t m = pts.size();
  stats::Rng rng(seed, static_cast<std::uint64_t>(k));

  // Farthest-point init: first center uniform, then repeatedly the point
  // farthest from its nearest chosen center.
  std::vector<Eigen::Vector2d> centers;
  centers.push_back(pts[rng.next_below(m)]);
  std::vector<double> nearest_d2(m, 0.0);
  while (centers.size() < static_cast<std::size_t>(k)) {
    std::size_t far_idx = 0;
    double far_d2 = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      double d2 = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d2 = std::min(d2, (pts[i] - c).squaredNorm());
      nearest_d2[i] = d2;
      if (d2 > far_d2) {
        far_d2 = d2;
        far_idx = i;
      }
    }
    centers.push_back(pts[far_idx]);
  }

  // Hard assignment to the init centers seeds weights/means/covariances.
  std::vector<int> assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d2 = (pts[i] - centers[c]).squaredNorm();
      if (d2 < best) {
        best = d2;
        assign[i] = c;
      }
    }
  }
  EmState st;
  st.comps.resize(k);
  for (int c = 0; c < k; ++c) {
    Eigen::Vector2d mu = Eigen::Vector2d::Zero();
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (assign[i] == c) {
        mu += pts[i];
        ++cnt;
      }
    }
    if (cnt == 0) {
      st.comps[c].mean = centers[c];
      st.comps[c].weight = 1.0 / static_cast<double>(m);
      st.comps[c].covariance = Eigen::Matrix2d::Identity();
      continue;
    }
    mu /= static_cast<double>(cnt);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < m; ++i) {
      if (assign[i] == c) {
        const Eigen::Vector2d d = pts[i] - mu;
        cov += d * d.transpose();
      }
    }
    cov /= static_cast<double>(cnt);
    st.comps[c].mean = mu;
    st.comps[c].weight = static_cast<double>(cnt) / static_cast<double>(m);
    st.comps[c].covariance = floor_spd(cov, kCovEigenFloorM2);
  }
  double wsum = 0.0;
  for (const auto& comp : st.comps) wsum += comp.weight;
  for (auto& comp : st.comps) comp.weight /= wsum;

  std::vector<double> log_resp(m * k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // E-step with log-sum-exp per point.
    double ll = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double max_l = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double l = std::log(st.comps[c].weight) +
                         log_gaussian2(pts[i], st.comps[c].mean,
                                       st.comps[c].covariance);
        log_resp[i * k + c] = l;
        max_l = std::max(max_l, l);
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(log_resp[i * k + c] - max_l);
      const double log_norm = max_l + std::log(sum);
      ll += log_norm;
      for (int c = 0; c < k; ++c) log_resp[i * k + c] -= log_norm;
    }
    st.ll_history.push_back(ll);

    // M-step.
    double iter_min_eig = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      double nk = 0.0;
      Eigen::Vector2d mu = Eigen::Vector2d::Zero();
      for (std::size_t i = 0; i < m; ++i) {
        const double r = std::exp(log_resp[i * k + c]);
        nk += r;
        mu += r * pts[i];
      }
      nk = std::max(nk, 1e-12);
      mu /= nk;
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      for (std::size_t i = 0; i < m; ++i) {
        const double r = std::exp(log_resp[i * k + c]);
        const Eigen::Vector2d d = pts[i] - mu;
        cov += r * (d * d.transpose());
      }
      cov /= nk;
      st.comps[c].weight = nk / static_cast<double>(m);
      st.comps[c].mean = mu;
      st.comps[c].covariance = floor_spd(cov, kCovEigenFloorM2);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(st.comps[c].covariance);
      iter_min_eig = std::min(iter_min_eig, es.eigenvalues().minCoeff());
    }
    st.min_eig.push_back(iter_min_eig);

    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) <= tol * std::abs(prev_ll)) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
  }
  st.final_ll = prev_ll;
  return st;
}

}  // namespace

GmmModel gmm_fit(std::span<const geo::LocalPoint> train,
                 std::span<const int> k_grid, std::uint64_t seed, double tol,
                 int max_iter) {
  if (k_grid.empty()) throw UsageError("gmm_fit: empty k grid");
  int max_k = 0;
  for (int k : k_grid) {
    if (k < 1) throw UsageError("gmm_fit: k must be >= 1");
    max_k = std::max(max_k, k);
  }
  if (train.size() < 2 * static_cast<std::size_t>(max_k)) {
    throw DataError("gmm_fit: insufficient data for requested k grid");
  }

  std::vector<Eigen::Vector2d> pts;
  pts.reserve(train.size());
  for (const auto& p : train) pts.emplace_back(p.x, p.y);
  const double log_m = std::log(static_cast<double>(train.size()));

  GmmModel model;
  model.k_grid.assign(k_grid.begin(), k_grid.end());
  std::vector<EmState> states;
  states.reserve(k_grid.size());
  for (int k : k_grid) {
    states.push_back(run_em(pts, k, seed, tol, max_iter));
    const double nu = 6.0 * k - 1.0;
    model.final_log_likelihood.push_back(states.back().final_ll);
    model.bic.push_back(-2.0 * states.back().final_ll + nu * log_m);
    model.ll_history.push_back(states.back().ll_history);
    model.min_eigenvalue.push_back(states.back().min_eig);
  }
  model.chosen_index = 0;
  for (std::size_t i = 1; i < model.bic.size(); ++i) {
    if (model.bic[i] < model.bic[model.chosen_index]) model.chosen_index = i;
  }
  model.components = states[model.chosen_index].comps;
  return model;
}

double gmm_density(const GmmModel& model, const geo::LocalPoint& p) {
  if (model.components.empty()) throw DataError("gmm: empty model");
  const Eigen::Vector2d x(p.x, p.y);
  double sum = 0.0;
  for (const auto& comp : model.components) {
    sum += comp.weight * std::exp(log_gaussian2(x, comp.mean, comp.covariance));
  }
  return sum;
}

std::vector<geo::LocalPoint> gmm_sample(const GmmModel& model, std::size_t n,
                                        std::uint64_t seed) {
  if (model.components.empty()) throw DataError("gmm: empty model");
  if (n < 1) throw UsageError("gmm_sample: n must be >= 1");
  stats::Rng rng(seed, 0);

  std::vector<double> cum;
  cum.reserve(model.components.size());
  double acc = 0.0;
  for (const auto& comp : model.components) {
    acc += comp.weight;
    cum.push_back(acc);
  }
  std::vector<Eigen::Matrix2d> chol;
  chol.reserve(model.components.size());
  for (const auto& comp : model.components) {
    chol.push_back(Eigen::LLT<Eigen::Matrix2d>(comp.covariance).matrixL());
  }

  std::vector<geo::LocalPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.next_double() * acc;
    std::size_t c = 0;
    while (c + 1 < cum.size() && u >= cum[c]) ++c;
    const Eigen::Vector2d g(rng.next_gaussian(), rng.next_gaussian());
    const Eigen::Vector2d x = model.components[c].mean + chol[c] * g;
    out.push_back({x(0), x(1)});
  }
  return out;
}

}  // namespace mdaug::spatial
