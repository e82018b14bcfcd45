#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "dance/dataset.hpp"

namespace dance {

/// H0: det(Sigma_{left,right}) = 0 for the 2x2 block with rows `left` and
/// columns `right`. The four variables must be distinct.
struct TetradSpec {
  std::array<std::string, 2> left;
  std::array<std::string, 2> right;
};

struct TetradResult {
  TetradSpec spec;
  double d_hat = 0.0;
  double sigma_hat = 0.0;
  double w_stat = 0.0;
  double p_value = 0.0;
  bool vanishes = false;
  double alpha = 0.0;
  /// Set when the variance estimate was not positive; the tetrad is then
  /// reported as not vanishing with p_value = 0.
  bool degenerate = false;
};

/// Two-sided standard normal tail, 2 * (1 - Phi(|z|)).
double two_sided_normal_p(double z);

/// Inverse of `two_sided_normal_p`: the |z| at which the two-sided p equals `p`.
double two_sided_normal_quantile(double p);

/// Estimated variance of the tetrad determinant under H0:
///   {D_ab,ab * D_cd,cd * (n+1)/(n-1) - D_abcd,abcd} / (n-2).
/// Throws TooFewSamples for n < 3 and InvalidArgument for repeated variables.
double wishart_variance(const CovMatrix& cov, const TetradSpec& spec, std::size_t n);

/// Index-based overload for hot loops (indices into `cov`).
double wishart_variance(const CovMatrix& cov, std::array<std::size_t, 4> abcd, std::size_t n);

/// Throws DegenerateVariance when the variance estimate is <= 0.
TetradResult wishart_test(const CovMatrix& cov, const TetradSpec& spec, std::size_t n,
                          double alpha);

/// Vanishing-tetrad test interface. The Wishart test is the only
/// implementation; alternatives plug in here.
class VanishingTetradTest {
 public:
  virtual ~VanishingTetradTest() = default;
  /// Never throws on degenerate data: returns a non-vanishing result with
  /// `degenerate = true` instead.
  virtual TetradResult operator()(const CovMatrix& cov, const TetradSpec& spec, std::size_t n,
                                   double alpha) const = 0;
};

class WishartTetradTest final : public VanishingTetradTest {
 public:
  TetradResult operator()(const CovMatrix& cov, const TetradSpec& spec, std::size_t n,
                          double alpha) const override;
};

}  // namespace dance
