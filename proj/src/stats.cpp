#include "mdaug/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mdaug/errors.hpp"

namespace mdaug::stats {

namespace {

// Largest |quadrant mass in A - quadrant mass in B| over the four open
// quadrants anchored at each point of `anchors`.
double max_quadrant_diff(std::span<const geo::LocalPoint> anchors,
                         std::span<const geo::LocalPoint> a,
                         std::span<const geo::LocalPoint> b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double best = 0.0;
  for (const auto& t : anchors) {
    int a_pp = 0, a_pm = 0, a_mp = 0, a_mm = 0;
    for (const auto& p : a) {
      if (p.x > t.x) {
        if (p.y > t.y) ++a_pp;
        else if (p.y < t.y) ++a_pm;
      } else if (p.x < t.x) {
        if (p.y > t.y) ++a_mp;
        else if (p.y < t.y) ++a_mm;
      }
    }
    int b_pp = 0, b_pm = 0, b_mp = 0, b_mm = 0;
    for (const auto& p : b) {
      if (p.x > t.x) {
        if (p.y > t.y) ++b_pp;
        else if (p.y < t.y) ++b_pm;
      } else if (p.x < t.x) {
        if (p.y > t.y) ++b_mp;
        else if (p.y < t.y) ++b_mm;
      }
    }
    best = std::max(best, std::abs(a_pp / na - b_pp / nb));
    best = std::max(best, std::abs(a_pm / na - b_pm / nb));
    best = std::max(best, std::abs(a_mp / na - b_mp / nb));
    best = std::max(best, std::abs(a_mm / na - b_mm / nb));
  }
  return best;
}

}  // namespace

double ks2d_statistic(std::span<const geo::LocalPoint> a,
                      std::span<const geo::LocalPoint> b) {
  // The permutation test requires >= 10 points per sample; the raw
  // statistic stays usable on tiny samples for oracle checks.
  if (a.empty() || b.empty()) {
    throw DataError("ks2d_statistic: empty sample");
  }
  const double d_a = max_quadrant_diff(a, a, b);
  const double d_b = max_quadrant_diff(b, a, b);
  return 0.5 * (d_a + d_b);
}

KsResult ks2d_test(std::span<const geo::LocalPoint> a,
                   std::span<const geo::LocalPoint> b, int n_permutations,
                   std::uint64_t seed) {
  if (a.size() < 10 || b.size() < 10) {
    throw DataError("ks2d_test: both samples need at least 10 points");
  }
  if (n_permutations < 1) throw UsageError("ks2d_test: n_permutations >= 1");

  const double observed = ks2d_statistic(a, b);

  std::vector<geo::LocalPoint> pool;
  pool.reserve(a.size() + b.size());
  pool.insert(pool.end(), a.begin(), a.end());
  pool.insert(pool.end(), b.begin(), b.end());

  int exceed = 0;
  std::vector<geo::LocalPoint> shuffled(pool.size());
  for (int k = 0; k < n_permutations; ++k) {
    shuffled = pool;
    Rng rng(seed, static_cast<std::uint64_t>(k) + 1);  // per-permutation stream
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
      const std::size_t j = rng.next_below(i + 1);
      std::swap(shuffled[i], shuffled[j]);
    }
    const std::span<const geo::LocalPoint> pa(shuffled.data(), a.size());
    const std::span<const geo::LocalPoint> pb(shuffled.data() + a.size(),
                                              b.size());
    if (ks2d_statistic(pa, pb) >= observed) ++exceed;
  }
  KsResult res;
  res.statistic = observed;
  res.n_permutations = n_permutations;
  res.p_value = (1.0 + exceed) / (n_permutations + 1.0);
  return res;
}

PairwiseComparison pairwise_compare(std::span<const double> errors_a,
                                    std::span<const double> errors_b,
                                    double alpha) {
  if (errors_a.size() != errors_b.size()) {
    throw DataError("pairwise_compare: length mismatch");
  }
  const std::size_t n = errors_a.size();
  if (n < 10) throw DataError("pairwise_compare: need at least 10 runs");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw UsageError("pairwise_compare: alpha must be in (0, 1)");
  }

  const auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
  };
  const auto var_unbiased = [](std::span<const double> v, double mu) {
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
  };

  const double mean_a = mean(errors_a);
  const double mean_b = mean(errors_b);
  const double var_a = var_unbiased(errors_a, mean_a);
  const double var_b = var_unbiased(errors_b, mean_b);

  PairwiseComparison cmp;
  cmp.n_runs = n;
  cmp.alpha = alpha;
  cmp.small_sample = n < 30;
  cmp.mean_diff = mean_a - mean_b;
  const double sd = std::sqrt((var_a + var_b) / static_cast<double>(n));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  cmp.ci_low = cmp.mean_diff - z * sd;
  cmp.ci_high = cmp.mean_diff + z * sd;
  if (cmp.ci_high < 0.0) {
    cmp.verdict = Verdict::a_better;  // A's error is smaller
  } else if (cmp.ci_low > 0.0) {
    cmp.verdict = Verdict::b_better;
  } else {
    cmp.verdict = Verdict::not_significant;
  }
  return cmp;
}

const PairwiseComparison& SignificanceMatrix::at(std::size_t i,
                                                 std::size_t j) const {
  if (i >= levels.size() || j >= levels.size() || i == j ||
      !cells[i][j].has_value()) {
    throw UsageError("significance matrix: invalid cell access");
  }
  return *cells[i][j];
}

SignificanceMatrix significance_matrix(
    const std::map<double, std::vector<double>>& error_sets, double alpha) {
  if (error_sets.size() < 2) {
    throw UsageError("significance_matrix: need at least 2 levels");
  }
  SignificanceMatrix m;
  std::vector<const std::vector<double>*> sets;
  for (const auto& [level, errs] : error_sets) {
    m.levels.push_back(level);
    sets.push_back(&errs);
  }
  const std::size_t n = m.levels.size();
  m.cells.assign(n, std::vector<std::optional<PairwiseComparison>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      m.cells[i][j] = pairwise_compare(*sets[i], *sets[j], alpha);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Verdict ij = m.cells[i][j]->verdict;
      const Verdict ji = m.cells[j][i]->verdict;
      const bool ok =
          (ij == Verdict::a_better && ji == Verdict::b_better) ||
          (ij == Verdict::b_better && ji == Verdict::a_better) ||
          (ij == Verdict::not_significant && ji == Verdict::not_significant);
      if (!ok) throw NumericalError("significance_matrix: antisymmetry violated");
    }
  }
  return m;
}

std::string render_text_grid(const SignificanceMatrix& matrix) {
  const auto label = [](double level) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "x%g", level);
    return std::string(buf);
  };
  std::size_t width = 4;
  std::vector<std::string> labels;
  for (double lv : matrix.levels) {
    labels.push_back(label(lv));
    width = std::max(width, labels.back().size() + 1);
  }
  const auto pad = [&](const std::string& s) {
    std::string out = s;
    out.resize(width, ' ');
    return out;
  };

  std::string out = pad("");
  for (const auto& l : labels) out += pad(l);
  out += '\n';
  for (std::size_t i = 0; i < matrix.levels.size(); ++i) {
    out += pad(labels[i]);
    for (std::size_t j = 0; j < matrix.levels.size(); ++j) {
      if (i == j) {
        out += pad(".");
        continue;
      }
      switch (matrix.cells[i][j]->verdict) {
        case Verdict::a_better: out += pad("+"); break;
        case Verdict::b_better: out += pad("-"); break;
        case Verdict::not_significant: out += pad("="); break;
      }
    }
    out += '\n';
  }
  out += "legend: + row better than column, - row worse, = not significant\n";
  return out;
}

// Wichura (1988), algorithm AS 241 (PPND16).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw UsageError("normal_quantile: p must be in (0, 1)");
  }
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

}  // namespace mdaug::stats
