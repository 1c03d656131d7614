#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Small statistics kernel: rank correlation, one-way ANOVA and the F
// distribution tail, with no numerical dependencies.
namespace legible::stats {

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
};

struct AnovaResult {
  double f_value = 0.0;
  double p_value = 1.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Arithmetic mean and Bessel-corrected standard deviation. Needs >= 2 values.
MeanSd mean_sd(std::span<const double> x);

/// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> mid_ranks(std::span<const double> x);

/// Pearson correlation of the mid-ranks of x and y.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

/// Classic one-way ANOVA: F = MSB / MSW with p from the F(k-1, N-k) tail.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

/// I_x(a, b), evaluated by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(F > f) for F ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

}  // namespace legible::stats
