#include "dance/tetrad.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dance/error.hpp"

namespace dance {

double two_sided_normal_p(double z) { return std::erfc(std::fabs(z) / std::numbers::sqrt2); }

double two_sided_normal_quantile(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p must lie in (0, 1]");
  if (p == 1.0) return 0.0;
  // Bracket then bisect on the monotone tail; 200 halvings reach double precision.
  double lo = 0.0;
  double hi = 1.0;
  while (two_sided_normal_p(hi) > p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (two_sided_normal_p(mid) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double wishart_variance(const CovMatrix& cov, std::array<std::size_t, 4> abcd, std::size_t n) {
  if (n < 3) throw Error(ErrorKind::TooFewSamples, fmt::format("Wishart test needs n >= 3, got {}", n));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (abcd[i] == abcd[j])
        throw Error(ErrorKind::InvalidArgument, "tetrad variables must be pairwise distinct");

  const auto [a, b, c, d] = abcd;
  const double d_ab = sub_determinant(cov, a, b, a, b);
  const double d_cd = sub_determinant(cov, c, d, c, d);
  const double d_abcd = cov.block(abcd).determinant();
  const double nn = static_cast<double>(n);
  return (d_ab * d_cd * (nn + 1.0) / (nn - 1.0) - d_abcd) / (nn - 2.0);
}

double wishart_variance(const CovMatrix& cov, const TetradSpec& spec, std::size_t n) {
  return wishart_variance(cov,
                          {cov.index_of(spec.left[0]), cov.index_of(spec.left[1]),
                           cov.index_of(spec.right[0]), cov.index_of(spec.right[1])},
                          n);
}

namespace {

TetradResult run_wishart(const CovMatrix& cov, const TetradSpec& spec, std::size_t n, double alpha,
                         bool throw_on_degenerate) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::InvalidArgument, fmt::format("alpha must lie in (0,1), got {}", alpha));
  const std::array<std::size_t, 4> ids{cov.index_of(spec.left[0]), cov.index_of(spec.left[1]),
                                       cov.index_of(spec.right[0]), cov.index_of(spec.right[1])};
  TetradResult r;
  r.spec = spec;
  r.alpha = alpha;
  r.d_hat = sub_determinant(cov, ids[0], ids[1], ids[2], ids[3]);
  const double var = wishart_variance(cov, ids, n);
  if (!(var > 0.0) || !std::isfinite(var)) {
    if (throw_on_degenerate)
      throw Error(ErrorKind::DegenerateVariance,
                  fmt::format("variance estimate {} for ({},{}),({},{})", var, spec.left[0],
                              spec.left[1], spec.right[0], spec.right[1]));
    r.degenerate = true;
    r.p_value = 0.0;
    r.vanishes = false;
    return r;
  }
  r.sigma_hat = std::sqrt(var);
  r.w_stat = r.d_hat / r.sigma_hat;
  r.p_value = two_sided_normal_p(r.w_stat);
  r.vanishes = r.p_value > alpha;
  return r;
}

}  // namespace

TetradResult wishart_test(const CovMatrix& cov, const TetradSpec& spec, std::size_t n,
                          double alpha) {
  return run_wishart(cov, spec, n, alpha, true);
}

TetradResult WishartTetradTest::operator()(const CovMatrix& cov, const TetradSpec& spec,
                                           std::size_t n, double alpha) const {
  return run_wishart(cov, spec, n, alpha, false);
}

}  // namespace dance
