#ifndef MDAUG_RADIO_HPP
#define MDAUG_RADIO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdaug/mdt.hpp"

namespace mdaug::radio {

struct ShadowingSpec {
  double sigma2_db = 0.0;  // shadowing variance, dB^2
  std::uint64_t seed = 0;
};

struct RadioPrediction {
  mdt::SparseRsrp rsrp;
  std::string provenance;       // "knn" | "gpr_se" | "gpr_rq"
  std::uint32_t clamped = 0;    // values pulled back into [-160, -30]
};

// Index of the record whose location is closest to p (Euclidean);
// ties resolve to the smallest index.
std::size_t nearest_index(const mdt::FingerprintDatabase& db,
                          const geo::LocalPoint& p);

struct KnnTransferConfig {
  int k = 1;                // paper rule is k = 1; k > 1 distance-weights
  double epsilon_m = 1e-6;  // weight denominator guard for k > 1
};

// Copies the fingerprint of the nearest record and perturbs each present
// PCI with an independent N(0, sigma2) dB draw. Absent PCIs stay absent.
// The (seed, ordinal) pair fixes the shadowing draws, so batched queries
// can run in any order.
RadioPrediction knn_transfer(const mdt::FingerprintDatabase& db,
                             const geo::LocalPoint& p,
                             const ShadowingSpec& shadow,
                             std::uint64_t ordinal = 0,
                             const KnnTransferConfig& cfg = {});

enum class KernelKind { se, rq };

// k(r): SE = sf2 * exp(-r^2 / (2 l^2)); RQ = sf2 * (1 + r^2/(2 a l^2))^-a.
double kernel_value(KernelKind kind, double dist_m, double sf2, double ell,
                    double alpha_rq);

struct GprHyperGrid {
  std::vector<double> length_scales_m;  // default 8 log-spaced in [10, 5000]
  std::vector<double> sf2_values;       // factors of target variance, or absolute
  bool sf2_absolute = false;
  std::vector<double> sn2_values_db2;   // default {0.1, 1, 10}
  std::vector<double> alphas;           // RQ only, default {0.5, 1, 2}
};

GprHyperGrid default_gpr_grid();

struct GprPerPci {
  std::vector<geo::LocalPoint> train_x;
  Eigen::VectorXd train_y;       // raw targets, dBm
  double prior_mean_dbm = 0.0;
  double sf2 = 1.0;
  double ell_m = 1.0;
  double sn2_db2 = 1.0;
  double alpha_rq = 1.0;
  double log_marginal = 0.0;
  double jitter_used = 0.0;
  Eigen::MatrixXd chol_l;        // lower factor of K + sn2 I (+ jitter)
  Eigen::VectorXd weights;       // (K + sn2 I)^-1 (y - prior_mean)
};

struct GprModel {
  KernelKind kind = KernelKind::se;
  std::map<mdt::Pci, GprPerPci> per_pci;
  std::vector<std::pair<mdt::Pci, std::string>> skipped;  // pci, reason
};

// Per-PCI GPR: prior mean = training mean of that PCI, hyperparameters by
// maximum log marginal likelihood over the grid, training set subsampled
// (seeded) to subsample_cap when larger. PCIs with < 5 observations are
// skipped and recorded.
GprModel gpr_fit(const mdt::FingerprintDatabase& db, KernelKind kind,
                 const GprHyperGrid& grid = default_gpr_grid(),
                 std::size_t subsample_cap = 2000, std::uint64_t seed = 0);

// Single-target fit on explicit (location, value) arrays; no minimum
// observation rule. Throws NumericalError if no grid point factorizes.
GprPerPci gpr_fit_single(const std::vector<geo::LocalPoint>& x,
                         const Eigen::VectorXd& y, KernelKind kind,
                         const GprHyperGrid& grid);

// Unclamped posterior mean of a single-PCI model.
double gpr_posterior_mean(const GprPerPci& g, KernelKind kind,
                          const geo::LocalPoint& p);

// Posterior mean per fitted PCI, clamped into the RSRP validity range.
RadioPrediction gpr_predict(const GprModel& model, const geo::LocalPoint& p);

// Log marginal likelihood for explicit hyperparameters; used by the fit
// and exposed so the grid-selection can be rechecked exhaustively.
// Throws NumericalError if the Cholesky fails after jitter escalation.
double gpr_log_marginal(const std::vector<geo::LocalPoint>& x,
                        const Eigen::VectorXd& y_centered, KernelKind kind,
                        double sf2, double ell, double sn2, double alpha_rq,
                        double* jitter_used = nullptr);

// Common interface for the synthesis stage and for MAE evaluation.
class RadioModel {
 public:
  virtual ~RadioModel() = default;
  virtual RadioPrediction predict(const geo::LocalPoint& p,
                                  std::uint64_t ordinal) const = 0;
  virtual std::string name() const = 0;
};

class KnnRadioModel final : public RadioModel {
 public:
  KnnRadioModel(const mdt::FingerprintDatabase& db, ShadowingSpec shadow,
                KnnTransferConfig cfg = {})
      : db_(&db), shadow_(shadow), cfg_(cfg) {}
  RadioPrediction predict(const geo::LocalPoint& p,
                          std::uint64_t ordinal) const override {
    return knn_transfer(*db_, p, shadow_, ordinal, cfg_);
  }
  std::string name() const override { return "knn"; }

 private:
  const mdt::FingerprintDatabase* db_;
  ShadowingSpec shadow_;
  KnnTransferConfig cfg_;
};

class GprRadioModel final : public RadioModel {
 public:
  explicit GprRadioModel(GprModel model) : model_(std::move(model)) {}
  RadioPrediction predict(const geo::LocalPoint& p,
                          std::uint64_t) const override {
    return gpr_predict(model_, p);
  }
  std::string name() const override {
    return model_.kind == KernelKind::se ? "gpr_se" : "gpr_rq";
  }
  const GprModel& model() const { return model_; }

 private:
  GprModel model_;
};

struct MaeReport {
  std::map<mdt::Pci, double> per_pci_mae;
  std::map<mdt::Pci, std::size_t> per_pci_pairs;
  double aggregate_mae = 0.0;    // mean |pred - true| over evaluated pairs
  std::size_t observed_pairs = 0;
  std::size_t evaluated_pairs = 0;
  double coverage = 0.0;         // evaluated / observed
};

// For each test record and each PCI observed in it, accumulates
// |prediction - truth| when the predictor emits that PCI.
MaeReport mae_evaluate(const RadioModel& predictor,
                       const mdt::FingerprintDatabase& test);

}  // namespace mdaug::radio

#endif  // MDAUG_RADIO_HPP
