#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dance/dataset.hpp"

namespace dance {

/// Negative-control exposure `z` and negative-control outcome `w`.
struct NcPair {
  std::string z;
  std::string w;

  friend auto operator<=>(const NcPair&, const NcPair&) = default;
};

/// Linear outcome bridge h(W, T, X) = alpha0 + alpha1 * W + delta * T + beta_x' X.
struct BridgeParams {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double delta = 0.0;
  std::vector<double> beta_x;
};

enum class EstimateMethod { ClosedForm, GmmLinear, GmmLinearX, NaiveOls };
std::string to_string(EstimateMethod m);

struct AteEstimate {
  double delta_hat = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  EstimateMethod method = EstimateMethod::ClosedForm;
  std::optional<NcPair> pair;
  std::optional<BridgeParams> bridge;
  /// Condition number of the equilibrated moment matrix (GMM only).
  std::optional<double> condition_number;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Fills se and the 95% normal interval.
void attach_normal_ci(AteEstimate& est, double se);

/// Delta = [cov(T,O)cov(Z,W) - cov(Z,O)cov(T,W)] / [cov(T,T)cov(Z,W) - cov(T,Z)cov(T,W)].
/// Throws SingularDenominator when the denominator is numerically zero.
AteEstimate closed_form_ate(const CovMatrix& cov, const NcPair& pair, const std::string& treatment,
                            const std::string& outcome);

/// The second closed form, using cov(W,O)cov(T,Z) in the numerator. Equal to
/// `closed_form_ate` in population when the (Z,O),(T,W) tetrad vanishes.
AteEstimate closed_form_ate_alt(const CovMatrix& cov, const NcPair& pair,
                                const std::string& treatment, const std::string& outcome);

/// Per-pair exactly identified linear-bridge moment system, solved at theta_hat.
///
/// Parameters are ordered (alpha0, alpha1, delta, beta_x...); instruments are
/// (1, Z, T, X...). `moments` holds one row per observation,
///   g_i = q_i * (O_i - r_i' theta_hat),   r_i = (1, W_i, T_i, X_i).
/// `jacobian` is A_n = d gbar / d theta = -(1/n) sum_i q_i r_i'.
struct PairMoments {
  NcPair pair;
  Eigen::VectorXd theta;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd moments;
  double condition_number = 0.0;

  static constexpr Eigen::Index kDeltaIndex = 2;
};

/// Solves the moment system; throws SingularMomentMatrix (with the condition
/// number in the message) when the cross-moment matrix is rank deficient.
PairMoments fit_linear_bridge(const Dataset& data, const NcPair& pair, const std::string& treatment,
                              const std::string& outcome,
                              const std::vector<std::string>& covariates = {});

/// Sample moment vector gbar(theta) for an arbitrary theta; used by the
/// Jacobian check and the stacked joint estimator.
Eigen::VectorXd linear_bridge_gbar(const Dataset& data, const NcPair& pair,
                                   const std::string& treatment, const std::string& outcome,
                                   const std::vector<std::string>& covariates,
                                   const Eigen::VectorXd& theta);

/// Sandwich covariance of theta_hat for one or more stacked exactly identified
/// systems: V = A^{-1} S A^{-T} / n with S = (1/n) sum_i g_i g_i'.
Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& moments);

AteEstimate gmm_linear_ate(const Dataset& data, const NcPair& pair, const std::string& treatment,
                           const std::string& outcome,
                           const std::vector<std::string>& covariates = {});

/// OLS of O on (1, T, X) with heteroskedasticity-robust se. Ignores unmeasured
/// confounding; the baseline every negative-control method is compared to.
AteEstimate naive_ols_ate(const Dataset& data, const std::string& treatment,
                          const std::string& outcome,
                          const std::vector<std::string>& covariates = {});

}  // namespace dance
