#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ergo/types.hpp"

namespace ergo::stats {

/// Regularised incomplete beta I_x(a, b), evaluated with Lentz's continued
/// fraction. Iterates until the relative change of a step is below 1e-15
/// (at most 10000 steps) and throws if that never happens.
double incomplete_beta(double a, double b, double x);

/// P(F > f) for an F(d1, d2) variable.
double f_upper_tail(double f, double d1, double d2);
/// P(|T| > |t|) for a Student t variable with df degrees of freedom.
double t_two_sided(double t, double df);

struct TestResult {
  double statistic = 0.0;  // F or t
  double df1 = 0.0;        // numerator df (F) or df (t)
  double df2 = 0.0;        // denominator df (F); 0 for t
  double p = 1.0;
  bool significant = false;
  /// False when p underflowed (zero error variance with unequal means); p is then an upper bound of 0.
  bool p_exact = true;
  double alpha = 0.05;
};

/// subjects x conditions matrix of one index at one joint.
struct RepeatedMeasuresTable {
  Eigen::MatrixXd values;
  std::vector<std::string> subjects;
  std::vector<std::string> conditions;

  void validate() const;
};

enum class SphericityCorrection { None, GreenhouseGeisser };

struct AnovaOptions {
  double alpha = 0.05;
  SphericityCorrection sphericity = SphericityCorrection::None;
};

/// One-way repeated-measures ANOVA with the subject effect removed.
TestResult rm_anova(const RepeatedMeasuresTable& table, const AnovaOptions& options = {});

/// Greenhouse-Geisser epsilon of the condition covariance.
double greenhouse_geisser_epsilon(const Eigen::MatrixXd& values);

/// Two-sided paired t test on x - y.
TestResult paired_t(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double alpha = 0.05);

enum class MultipleComparison { None, Bonferroni, Holm };

struct PairwiseResult {
  int first = 0;
  int second = 0;
  TestResult test;
  /// p after the multiple-comparison correction (equals test.p for None).
  double p_adjusted = 1.0;
};

/// p values adjusted for a family of tests, in input order.
std::vector<double> adjust_p_values(const std::vector<double>& p, MultipleComparison correction);

/// Paired t tests between every pair of conditions.
std::vector<PairwiseResult> posthoc_matrix(const RepeatedMeasuresTable& table, double alpha = 0.05,
                                           MultipleComparison correction = MultipleComparison::None);

}  // namespace ergo::stats
