#include "dance/estimation.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dance/error.hpp"

namespace dance {

std::string to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::ClosedForm: return "closed_form";
    case EstimateMethod::GmmLinear: return "gmm_linear";
    case EstimateMethod::GmmLinearX: return "gmm_linear_x";
    case EstimateMethod::NaiveOls: return "naive_ols";
  }
  return "unknown";
}

void attach_normal_ci(AteEstimate& est, double se) {
  est.se = se;
  est.ci_low = est.delta_hat - kZ95 * se;
  est.ci_high = est.delta_hat + kZ95 * se;
}

namespace {

void check_pair_roles(const NcPair& pair, const std::string& t, const std::string& o) {
  if (pair.z == pair.w) throw Error(ErrorKind::InvalidArgument, "z and w must differ");
  if (t == o) throw Error(ErrorKind::InvalidArgument, "treatment and outcome must differ");
  for (const auto* id : {&pair.z, &pair.w})
    if (*id == t || *id == o)
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("negative control '{}' is the treatment or outcome", *id));
}

AteEstimate closed_form_impl(const CovMatrix& cov, const NcPair& pair, const std::string& t,
                             const std::string& o, bool alt) {
  check_pair_roles(pair, t, o);
  const double c_to = cov.at(t, o);
  const double c_zw = cov.at(pair.z, pair.w);
  const double c_zo = cov.at(pair.z, o);
  const double c_tw = cov.at(t, pair.w);
  const double c_wo = cov.at(pair.w, o);
  const double c_tz = cov.at(t, pair.z);
  const double c_tt = cov.at(t, t);

  const double den = c_tt * c_zw - c_tz * c_tw;
  const double scale = c_tt * (std::fabs(c_zw) + std::fabs(c_tw) + std::numeric_limits<double>::min());
  if (den == 0.0 || std::fabs(den) < 1e-12 * scale)
    throw Error(ErrorKind::SingularDenominator,
                fmt::format("denominator {} for (z={}, w={})", den, pair.z, pair.w));
  const double num = alt ? c_to * c_zw - c_wo * c_tz : c_to * c_zw - c_zo * c_tw;

  AteEstimate est;
  est.delta_hat = num / den;
  est.method = EstimateMethod::ClosedForm;
  est.pair = pair;
  return est;
}

struct Design {
  Eigen::MatrixXd q;  // instruments (1, Z, T, X)
  Eigen::MatrixXd r;  // regressors  (1, W, T, X)
  Eigen::VectorXd y;
};

Design build_design(const Dataset& data, const NcPair& pair, const std::string& t,
                    const std::string& o, const std::vector<std::string>& covariates) {
  check_pair_roles(pair, t, o);
  for (const auto& x : covariates)
    if (x == t || x == o || x == pair.z || x == pair.w)
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("covariate '{}' overlaps the treatment, outcome or pair", x));
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto k = static_cast<Eigen::Index>(3 + covariates.size());
  Design d{Eigen::MatrixXd(n, k), Eigen::MatrixXd(n, k), data.column(o)};
  d.q.col(0).setOnes();
  d.r.col(0).setOnes();
  d.q.col(1) = data.column(pair.z);
  d.r.col(1) = data.column(pair.w);
  d.q.col(2) = data.column(t);
  d.r.col(2) = data.column(t);
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(3 + j);
    d.q.col(col) = data.column(covariates[j]);
    d.r.col(col) = data.column(covariates[j]);
  }
  return d;
}

}  // namespace

AteEstimate closed_form_ate(const CovMatrix& cov, const NcPair& pair, const std::string& treatment,
                            const std::string& outcome) {
  return closed_form_impl(cov, pair, treatment, outcome, false);
}

AteEstimate closed_form_ate_alt(const CovMatrix& cov, const NcPair& pair,
                                const std::string& treatment, const std::string& outcome) {
  return closed_form_impl(cov, pair, treatment, outcome, true);
}

PairMoments fit_linear_bridge(const Dataset& data, const NcPair& pair, const std::string& treatment,
                              const std::string& outcome,
                              const std::vector<std::string>& covariates) {
  const Design d = build_design(data, pair, treatment, outcome, covariates);
  const auto n = d.q.rows();
  const auto k = d.q.cols();
  const double nn = static_cast<double>(n);

  // Solve on centered columns: the intercept row of the moment system forces
  // the residual mean to zero, so the slopes solve the centered system and the
  // intercept is recovered from the means. Same solution, better conditioning.
  const Eigen::RowVectorXd q_mean = d.q.colwise().mean();
  const Eigen::RowVectorXd r_mean = d.r.colwise().mean();
  const double y_mean = d.y.mean();
  const Eigen::MatrixXd qc = (d.q.rightCols(k - 1).rowwise() - q_mean.tail(k - 1));
  const Eigen::MatrixXd rc = (d.r.rightCols(k - 1).rowwise() - r_mean.tail(k - 1));
  const Eigen::VectorXd yc = d.y.array() - y_mean;

  // Equilibrate columns to unit RMS for the rank/conditioning diagnosis.
  Eigen::VectorXd q_scale(k - 1), r_scale(k - 1);
  for (Eigen::Index j = 0; j < k - 1; ++j) {
    q_scale(j) = qc.col(j).norm() / std::sqrt(nn);
    r_scale(j) = rc.col(j).norm() / std::sqrt(nn);
  }
  PairMoments out;
  out.pair = pair;
  if ((q_scale.array() == 0.0).any() || (r_scale.array() == 0.0).any())
    throw Error(ErrorKind::SingularMomentMatrix,
                fmt::format("constant column in design for (z={}, w={}); condition number inf",
                            pair.z, pair.w));
  const Eigen::MatrixXd m_c = qc.transpose() * rc / nn;
  const Eigen::MatrixXd m_eq = q_scale.cwiseInverse().asDiagonal() * m_c * r_scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_eq);
  const auto& sv = svd.singularValues();
  out.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                  : std::numeric_limits<double>::infinity();
  if (!(out.condition_number < 1e12))
    throw Error(ErrorKind::SingularMomentMatrix,
                fmt::format("moment matrix for (z={}, w={}) is rank deficient; condition number {:.3g}",
                            pair.z, pair.w, out.condition_number));

  const Eigen::VectorXd slopes = m_c.fullPivLu().solve(qc.transpose() * yc / nn);
  out.theta.resize(k);
  out.theta.tail(k - 1) = slopes;
  out.theta(0) = y_mean - r_mean.tail(k - 1).dot(slopes);

  const Eigen::VectorXd resid = d.y - d.r * out.theta;
  out.moments = d.q.array().colwise() * resid.array();
  out.jacobian = -(d.q.transpose() * d.r) / nn;
  return out;
}

Eigen::VectorXd linear_bridge_gbar(const Dataset& data, const NcPair& pair,
                                   const std::string& treatment, const std::string& outcome,
                                   const std::vector<std::string>& covariates,
                                   const Eigen::VectorXd& theta) {
  const Design d = build_design(data, pair, treatment, outcome, covariates);
  if (theta.size() != d.r.cols())
    throw Error(ErrorKind::InvalidArgument, "theta has the wrong dimension");
  const Eigen::VectorXd resid = d.y - d.r * theta;
  return d.q.transpose() * resid / static_cast<double>(d.q.rows());
}

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& moments) {
  const double n = static_cast<double>(moments.rows());
  const Eigen::MatrixXd meat = moments.transpose() * moments / n;
  const Eigen::MatrixXd a_inv = jacobian.fullPivLu().inverse();
  Eigen::MatrixXd v = a_inv * meat * a_inv.transpose() / n;
  return 0.5 * (v + v.transpose());
}

AteEstimate gmm_linear_ate(const Dataset& data, const NcPair& pair, const std::string& treatment,
                           const std::string& outcome, const std::vector<std::string>& covariates) {
  const PairMoments pm = fit_linear_bridge(data, pair, treatment, outcome, covariates);
  const Eigen::MatrixXd v = sandwich_covariance(pm.jacobian, pm.moments);

  AteEstimate est;
  est.delta_hat = pm.theta(PairMoments::kDeltaIndex);
  est.method = covariates.empty() ? EstimateMethod::GmmLinear : EstimateMethod::GmmLinearX;
  est.pair = pair;
  est.condition_number = pm.condition_number;
  BridgeParams bp;
  bp.alpha0 = pm.theta(0);
  bp.alpha1 = pm.theta(1);
  bp.delta = pm.theta(2);
  for (Eigen::Index j = 3; j < pm.theta.size(); ++j) bp.beta_x.push_back(pm.theta(j));
  est.bridge = std::move(bp);
  attach_normal_ci(est, std::sqrt(std::max(0.0, v(2, 2))));
  return est;
}

AteEstimate naive_ols_ate(const Dataset& data, const std::string& treatment,
                          const std::string& outcome, const std::vector<std::string>& covariates) {
  if (treatment == outcome) throw Error(ErrorKind::InvalidArgument, "treatment and outcome must differ");
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto k = static_cast<Eigen::Index>(2 + covariates.size());
  Eigen::MatrixXd x(n, k);
  x.col(0).setOnes();
  x.col(1) = data.column(treatment);
  for (std::size_t j = 0; j < covariates.size(); ++j)
    x.col(static_cast<Eigen::Index>(2 + j)) = data.column(covariates[j]);
  const Eigen::VectorXd y = data.column(outcome);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) throw Error(ErrorKind::SingularMomentMatrix, "OLS design is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd e = y - x * beta;
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  const Eigen::MatrixXd xe = x.array().colwise() * e.array();
  const Eigen::MatrixXd v = xtx_inv * (xe.transpose() * xe) * xtx_inv;

  AteEstimate est;
  est.delta_hat = beta(1);
  est.method = EstimateMethod::NaiveOls;
  attach_normal_ci(est, std::sqrt(std::max(0.0, v(1, 1))));
  return est;
}

}  // namespace dance
