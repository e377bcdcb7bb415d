#include "ergo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace ergo::stats {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-15;
constexpr int kMaxIter = 10000;

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw RuntimeError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta needs 0 <= x <= 1");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw ValidationError("F distribution needs positive degrees of freedom");
  if (std::isinf(f)) return 0.0;
  if (!(f > 0.0)) return 1.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

void RepeatedMeasuresTable::validate() const {
  if (values.rows() < 2) throw ValidationError("repeated-measures table needs at least 2 subjects");
  if (values.cols() < 2) throw ValidationError("repeated-measures table needs at least 2 conditions");
  if (!values.allFinite()) throw ValidationError("repeated-measures table has missing or non-finite cells");
  if (!subjects.empty() && static_cast<Eigen::Index>(subjects.size()) != values.rows())
    throw ValidationError("subject labels do not match table rows");
  if (!conditions.empty() && static_cast<Eigen::Index>(conditions.size()) != values.cols())
    throw ValidationError("condition labels do not match table columns");
}

double greenhouse_geisser_epsilon(const Eigen::MatrixXd& values) {
  const auto n = values.rows();
  const auto k = values.cols();
  const Eigen::MatrixXd centered = values.rowwise() - values.colwise().mean();
  const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::MatrixXd C =
      Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
  const Eigen::MatrixXd Sc = C * S * C;
  const double tr = Sc.trace();
  const double denom = static_cast<double>(k - 1) * Sc.squaredNorm();
  if (!(denom > 0.0)) return 1.0;
  return std::clamp(tr * tr / denom, 1.0 / static_cast<double>(k - 1), 1.0);
}

TestResult rm_anova(const RepeatedMeasuresTable& table, const AnovaOptions& options) {
  table.validate();
  const Eigen::MatrixXd& Y = table.values;
  const auto n = static_cast<double>(Y.rows());
  const auto k = static_cast<double>(Y.cols());
  const double grand = Y.mean();

  const double ss_total = (Y.array() - grand).square().sum();
  const double ss_cond = n * (Y.colwise().mean().array() - grand).square().sum();
  const double ss_subj = k * (Y.rowwise().mean().array() - grand).square().sum();
  double ss_error = ss_total - ss_cond - ss_subj;
  const double floor = 1e-14 * std::max(ss_total, std::numeric_limits<double>::min());

  TestResult r;
  r.alpha = options.alpha;
  r.df1 = k - 1.0;
  r.df2 = (k - 1.0) * (n - 1.0);
  if (options.sphericity == SphericityCorrection::GreenhouseGeisser) {
    const double eps = greenhouse_geisser_epsilon(Y);
    r.df1 *= eps;
    r.df2 *= eps;
  }

  if (ss_cond <= floor) {
    r.statistic = 0.0;
    r.p = 1.0;
  } else if (ss_error <= floor) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.p_exact = false;
  } else {
    const double ms_cond = ss_cond / (k - 1.0);
    const double ms_error = ss_error / ((k - 1.0) * (n - 1.0));
    r.statistic = ms_cond / ms_error;
    r.p = f_upper_tail(r.statistic, r.df1, r.df2);
  }
  r.significant = r.p < r.alpha;
  return r;
}

TestResult paired_t(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double alpha) {
  if (x.size() != y.size()) throw ValidationError("paired t test needs samples of equal length");
  if (x.size() < 2) throw ValidationError("paired t test needs at least 2 pairs");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("paired t test samples must be finite");
  const Eigen::VectorXd d = x - y;
  const auto n = static_cast<double>(d.size());
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / (n - 1.0);
  if (!(var > 1e-28 * std::max(1.0, mean * mean)))
    throw ValidationError("paired t test undefined: differences have zero variance");
  TestResult r;
  r.alpha = alpha;
  r.statistic = mean / std::sqrt(var / n);
  r.df1 = n - 1.0;
  r.p = t_two_sided(r.statistic, r.df1);
  r.significant = r.p < alpha;
  return r;
}

std::vector<double> adjust_p_values(const std::vector<double>& p, MultipleComparison correction) {
  std::vector<double> out = p;
  const auto m = static_cast<double>(p.size());
  if (correction == MultipleComparison::Bonferroni) {
    for (auto& x : out) x = std::min(1.0, x * m);
  } else if (correction == MultipleComparison::Holm) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    double running = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      running = std::max(running, std::min(1.0, (m - static_cast<double>(r)) * p[order[r]]));
      out[order[r]] = running;
    }
  }
  return out;
}

std::vector<PairwiseResult> posthoc_matrix(const RepeatedMeasuresTable& table, double alpha,
                                           MultipleComparison correction) {
  table.validate();
  const auto k = static_cast<int>(table.values.cols());
  std::vector<PairwiseResult> out;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      PairwiseResult pr;
      pr.first = i;
      pr.second = j;
      pr.test = paired_t(table.values.col(i), table.values.col(j), alpha);
      pr.p_adjusted = pr.test.p;
      out.push_back(pr);
    }
  }
  std::vector<double> p;
  for (const auto& pr : out) p.push_back(pr.test.p);
  const auto adjusted = adjust_p_values(p, correction);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].p_adjusted = adjusted[i];
    if (correction != MultipleComparison::None) out[i].test.significant = adjusted[i] < alpha;
  }
  return out;
}

}  // namespace ergo::stats
