#include "mdaug/radio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::radio {

namespace {

double clamp_rsrp(double v, std::uint32_t* clamp_count) {
  if (v < mdt::kRsrpMinDbm) {
    ++*clamp_count;
    return mdt::kRsrpMinDbm;
  }
  if (v > mdt::kRsrpMaxDbm) {
    ++*clamp_count;
    return mdt::kRsrpMaxDbm;
  }
  return v;
}

}  // namespace

std::size_t nearest_index(const mdt::FingerprintDatabase& db,
                          const geo::LocalPoint& p) {
  if (db.size() == 0) throw DataError("nearest_index: empty database");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < db.size(); ++j) {
    const auto& q = db.records()[j].local;
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {  // strict: ties keep the smaller index
      best_d2 = d2;
      best = j;
    }
  }
  return best;
}

RadioPrediction knn_transfer(const mdt::FingerprintDatabase& db,
                             const geo::LocalPoint& p,
                             const ShadowingSpec& shadow,
                             std::uint64_t ordinal,
                             const KnnTransferConfig& cfg) {
  if (db.size() == 0) throw DataError("knn_transfer: empty database");
  if (cfg.k < 1) throw UsageError("knn_transfer: k must be >= 1");
  if (shadow.sigma2_db < 0.0) {
    throw UsageError("knn_transfer: shadowing variance must be >= 0");
  }

  RadioPrediction pred;
  pred.provenance = "knn";

  mdt::SparseRsrp base;
  if (cfg.k == 1) {
    base = db.records()[nearest_index(db, p)].rsrp;
  } else {
    // Distance-weighted average over the k nearest locations, per PCI
    // over the neighbors that detected it.
    const std::size_t k = std::min<std::size_t>(cfg.k, db.size());
    std::vector<std::pair<double, std::size_t>> dist(db.size());
    for (std::size_t j = 0; j < db.size(); ++j) {
      const auto& q = db.records()[j].local;
      dist[j] = {std::hypot(p.x - q.x, p.y - q.y), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                      dist.end());
    std::map<mdt::Pci, std::pair<double, double>> acc;  // pci -> (w*v, w)
    for (std::size_t i = 0; i < k; ++i) {
      const double w = 1.0 / (dist[i].first + cfg.epsilon_m);
      for (const auto& [pci, v] : db.records()[dist[i].second].rsrp.entries()) {
        auto& slot = acc[pci];
        slot.first += w * v;
        slot.second += w;
      }
    }
    for (const auto& [pci, wv] : acc) base.set(pci, wv.first / wv.second);
  }

  const double sigma = std::sqrt(shadow.sigma2_db);
  stats::Rng rng(shadow.seed, ordinal);
  for (const auto& [pci, v] : base.entries()) {
    const double s = sigma > 0.0 ? sigma * rng.next_gaussian() : 0.0;
    pred.rsrp.set(pci, clamp_rsrp(v + s, &pred.clamped));
  }
  return pred;
}

double kernel_value(KernelKind kind, double dist_m, double sf2, double ell,
                    double alpha_rq) {
  const double r2 = dist_m * dist_m;
  if (kind == KernelKind::se) {
    return sf2 * std::exp(-r2 / (2.0 * ell * ell));
  }
  return sf2 * std::pow(1.0 + r2 / (2.0 * alpha_rq * ell * ell), -alpha_rq);
}

GprHyperGrid default_gpr_grid() {
  GprHyperGrid grid;
  grid.length_scales_m.resize(8);
  const double lo = std::log(10.0);
  const double hi = std::log(5000.0);
  for (std::size_t i = 0; i < grid.length_scales_m.size(); ++i) {
    grid.length_scales_m[i] =
        std::exp(lo + (hi - lo) * static_cast<double>(i) / 7.0);
  }
  grid.sf2_values = {0.5, 1.0, 2.0};
  grid.sf2_absolute = false;
  grid.sn2_values_db2 = {0.1, 1.0, 10.0};
  grid.alphas = {0.5, 1.0, 2.0};
  return grid;
}

namespace {

Eigen::MatrixXd build_gram(const std::vector<geo::LocalPoint>& x,
                           KernelKind kind, double sf2, double ell,
                           double alpha_rq) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = sf2;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = std::hypot(x[i].x - x[j].x, x[i].y - x[j].y);
      const double v = kernel_value(kind, d, sf2, ell, alpha_rq);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Cholesky with diagonal jitter escalation: 1e-8 .. 1e-4 of the mean
// diagonal. Returns false if every attempt fails.
bool chol_with_jitter(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>* llt,
                      double* jitter_used) {
  const double diag_scale = k.trace() / static_cast<double>(k.rows());
  llt->compute(k);
  if (llt->info() == Eigen::Success) {
    *jitter_used = 0.0;
    return true;
  }
  for (double f = 1e-8; f <= 1e-4 * 1.0000001; f *= 10.0) {
    const double jitter = f * diag_scale;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt->compute(kj);
    if (llt->info() == Eigen::Success) {
      *jitter_used = jitter;
      return true;
    }
  }
  return false;
}

}  // namespace

double gpr_log_marginal(const std::vector<geo::LocalPoint>& x,
                        const Eigen::VectorXd& y_centered, KernelKind kind,
                        double sf2, double ell, double sn2, double alpha_rq,
                        double* jitter_used) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k = build_gram(x, kind, sf2, ell, alpha_rq);
  k.diagonal().array() += sn2;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  if (!chol_with_jitter(k, &llt, &jitter)) {
    throw NumericalError("ill-conditioned kernel");
  }
  if (jitter_used != nullptr) *jitter_used = jitter;
  const Eigen::VectorXd alpha = llt.solve(y_centered);
  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y_centered.dot(alpha) - 0.5 * log_det -
         0.5 * static_cast<double>(n) * std::log(2.0 * geo::kPi);
}

GprPerPci gpr_fit_single(const std::vector<geo::LocalPoint>& x,
                         const Eigen::VectorXd& y, KernelKind kind,
                         const GprHyperGrid& grid) {
  if (grid.length_scales_m.empty() || grid.sf2_values.empty() ||
      grid.sn2_values_db2.empty()) {
    throw UsageError("gpr: empty hyperparameter grid");
  }
  if (kind == KernelKind::rq && grid.alphas.empty()) {
    throw UsageError("gpr: RQ kernel needs alpha candidates");
  }
  if (x.empty() || static_cast<Eigen::Index>(x.size()) != y.size()) {
    throw DataError("gpr: empty or mismatched training arrays");
  }
  const std::vector<double> alphas =
      kind == KernelKind::rq ? grid.alphas : std::vector<double>{1.0};

  const auto n = y.size();
  const double prior_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - prior_mean;
  double target_var =
      yc.squaredNorm() / std::max<double>(1.0, static_cast<double>(n - 1));
  if (target_var < 1e-6) target_var = 1e-6;

  GprPerPci best;
  double best_lml = -std::numeric_limits<double>::infinity();
  bool any_ok = false;
  for (double ell : grid.length_scales_m) {
    for (double sf2_raw : grid.sf2_values) {
      const double sf2 = grid.sf2_absolute ? sf2_raw : sf2_raw * target_var;
      for (double sn2 : grid.sn2_values_db2) {
        for (double a : alphas) {
          double jitter = 0.0;
          double lml;
          try {
            lml = gpr_log_marginal(x, yc, kind, sf2, ell, sn2, a, &jitter);
          } catch (const NumericalError&) {
            continue;  // this combo is unusable; others may succeed
          }
          any_ok = true;
          if (lml > best_lml) {
            best_lml = lml;
            best.sf2 = sf2;
            best.ell_m = ell;
            best.sn2_db2 = sn2;
            best.alpha_rq = a;
            best.jitter_used = jitter;
          }
        }
      }
    }
  }
  if (!any_ok) throw NumericalError("ill-conditioned kernel");

  best.train_x = x;
  best.train_y = y;
  best.prior_mean_dbm = prior_mean;
  best.log_marginal = best_lml;
  Eigen::MatrixXd k =
      build_gram(best.train_x, kind, best.sf2, best.ell_m, best.alpha_rq);
  k.diagonal().array() += best.sn2_db2 + best.jitter_used;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("ill-conditioned kernel");
  }
  best.chol_l = llt.matrixL();
  best.weights = llt.solve(yc);
  return best;
}

double gpr_posterior_mean(const GprPerPci& g, KernelKind kind,
                          const geo::LocalPoint& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.train_x.size(); ++i) {
    const double d = std::hypot(p.x - g.train_x[i].x, p.y - g.train_x[i].y);
    acc += kernel_value(kind, d, g.sf2, g.ell_m, g.alpha_rq) *
           g.weights(static_cast<Eigen::Index>(i));
  }
  return g.prior_mean_dbm + acc;
}

GprModel gpr_fit(const mdt::FingerprintDatabase& db, KernelKind kind,
                 const GprHyperGrid& grid, std::size_t subsample_cap,
                 std::uint64_t seed) {
  if (subsample_cap < 5) throw UsageError("gpr_fit: subsample cap too small");

  GprModel model;
  model.kind = kind;
  for (mdt::Pci pci : db.universe()) {
    std::vector<geo::LocalPoint> x;
    std::vector<double> y;
    for (const auto& rec : db.records()) {
      if (auto v = rec.rsrp.get(pci)) {
        x.push_back(rec.local);
        y.push_back(*v);
      }
    }
    if (x.size() < 5) {
      model.skipped.emplace_back(pci, "fewer than 5 observations");
      continue;
    }
    if (x.size() > subsample_cap) {
      std::vector<std::size_t> idx(x.size());
      std::iota(idx.begin(), idx.end(), 0);
      stats::Rng rng(seed, pci);
      for (std::size_t i = idx.size() - 1; i > 0; --i) {
        std::swap(idx[i], idx[rng.next_below(i + 1)]);
      }
      idx.resize(subsample_cap);
      std::sort(idx.begin(), idx.end());
      std::vector<geo::LocalPoint> xs;
      std::vector<double> ys;
      xs.reserve(subsample_cap);
      ys.reserve(subsample_cap);
      for (std::size_t i : idx) {
        xs.push_back(x[i]);
        ys.push_back(y[i]);
      }
      x.swap(xs);
      y.swap(ys);
    }

    Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
      yv(static_cast<Eigen::Index>(i)) = y[i];
    }
    try {
      model.per_pci.emplace(pci, gpr_fit_single(x, yv, kind, grid));
    } catch (const NumericalError&) {
      model.skipped.emplace_back(pci, "ill-conditioned kernel");
    }
  }
  return model;
}

RadioPrediction gpr_predict(const GprModel& model, const geo::LocalPoint& p) {
  RadioPrediction pred;
  pred.provenance = model.kind == KernelKind::se ? "gpr_se" : "gpr_rq";
  for (const auto& [pci, g] : model.per_pci) {
    pred.rsrp.set(pci,
                  clamp_rsrp(gpr_posterior_mean(g, model.kind, p), &pred.clamped));
  }
  return pred;
}

MaeReport mae_evaluate(const RadioModel& predictor,
                       const mdt::FingerprintDatabase& test) {
  if (test.size() == 0) throw DataError("mae_evaluate: empty test set");

  MaeReport report;
  std::map<mdt::Pci, double> abs_err;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& rec = test.records()[i];
    const RadioPrediction pred = predictor.predict(rec.local, i);
    for (const auto& [pci, truth] : rec.rsrp.entries()) {
      ++report.observed_pairs;
      if (auto v = pred.rsrp.get(pci)) {
        abs_err[pci] += std::abs(*v - truth);
        ++report.per_pci_pairs[pci];
        ++report.evaluated_pairs;
      }
    }
  }
  if (report.evaluated_pairs == 0) throw DataError("no overlapping PCIs");

  double total = 0.0;
  for (const auto& [pci, sum] : abs_err) {
    report.per_pci_mae[pci] =
        sum / static_cast<double>(report.per_pci_pairs[pci]);
    total += sum;
  }
  report.aggregate_mae = total / static_cast<double>(report.evaluated_pairs);
  report.coverage = static_cast<double>(report.evaluated_pairs) /
                    static_cast<double>(report.observed_pairs);
  return report;
}

}  // namespace mdaug::radio
