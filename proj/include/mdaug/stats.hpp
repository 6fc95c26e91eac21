#ifndef MDAUG_STATS_HPP
#define MDAUG_STATS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdaug/geo.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::stats {

struct KsResult {
  double statistic = 0.0;  // D in [0, 1]
  double p_value = 1.0;    // resolution 1/(n_permutations + 1)
  int n_permutations = 0;
};

// Two-sample KS statistic in 2-D (Fasano-Franceschini quadrant variant):
// for every sample point, the plane is split into four open quadrants
// (points on the dividing lines belong to none) and D is the largest
// absolute difference in empirical quadrant mass, averaged between
// anchoring on A and anchoring on B. Both samples need >= 10 points.
double ks2d_statistic(std::span<const geo::LocalPoint> a,
                      std::span<const geo::LocalPoint> b);

// Permutation test for ks2d_statistic with the add-one rule
// p = (1 + #{permuted D >= observed D}) / (n_permutations + 1).
KsResult ks2d_test(std::span<const geo::LocalPoint> a,
                   std::span<const geo::LocalPoint> b,
                   int n_permutations = 200, std::uint64_t seed = 0);

enum class Verdict {
  a_better,         // errors_a significantly smaller
  b_better,         // errors_b significantly smaller
  not_significant,  // CI for mean(e_a) - mean(e_b) contains zero
};

struct PairwiseComparison {
  double mean_diff = 0.0;  // mean(errors_a) - mean(errors_b)
  double ci_low = 0.0;
  double ci_high = 0.0;
  Verdict verdict = Verdict::not_significant;
  std::size_t n_runs = 0;
  double alpha = 0.05;
  bool small_sample = false;  // 10 <= n < 30: CLT assumption is shaky
};

// CLT z-interval on the mean difference of two equally sized error
// samples: d = mean_a - mean_b, sd = sqrt((var_a + var_b)/n) with
// unbiased variances, CI = d +/- z_{alpha/2} * sd. The verdict follows
// the CI sign (errors: entirely below zero means A is better).
PairwiseComparison pairwise_compare(std::span<const double> errors_a,
                                    std::span<const double> errors_b,
                                    double alpha = 0.05);

struct SignificanceMatrix {
  std::vector<double> levels;  // ascending augmentation rates
  // cells[i][j] compares level i (as A) against level j (as B);
  // diagonal entries are empty.
  std::vector<std::vector<std::optional<PairwiseComparison>>> cells;

  const PairwiseComparison& at(std::size_t i, std::size_t j) const;
};

// Fills all ordered pairs via pairwise_compare and checks antisymmetry.
SignificanceMatrix significance_matrix(
    const std::map<double, std::vector<double>>& error_sets,
    double alpha = 0.05);

// Aligned text grid: '+' row better than column, '-' worse, '=' not
// significant, '.' diagonal.
std::string render_text_grid(const SignificanceMatrix& matrix);

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

}  // namespace mdaug::stats

#endif  // MDAUG_STATS_HPP
