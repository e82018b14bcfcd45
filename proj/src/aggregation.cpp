#include "dance/aggregation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "dance/error.hpp"
#include "dance/rng.hpp"

namespace dance {

std::string to_string(AggregateMethod m) {
  switch (m) {
    case AggregateMethod::MajorityVote: return "majority_vote";
    case AggregateMethod::WeightedSandwich: return "weighted_sandwich";
    case AggregateMethod::WeightedBootstrap: return "weighted_bootstrap";
    case AggregateMethod::JointGmm: return "joint_gmm";
  }
  return "unknown";
}

PairFrequencyTable enumerate_pairs(const std::vector<Dnct>& dncts) {
  if (dncts.empty()) throw Error(ErrorKind::EmptyDnctList, "no DNCTs to aggregate");
  PairFrequencyTable table;
  for (const auto& d : dncts) {
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) ++table.entries[NcPair{d[i], d[j]}];
    table.total_pairs += 6;
  }
  return table;
}

std::pair<std::string, std::string> majority_pair(const PairFrequencyTable& table) {
  if (table.entries.empty()) throw Error(ErrorKind::EmptyDnctList, "empty pair table");
  std::map<std::pair<std::string, std::string>, int> combined;
  for (const auto& [pair, f] : table.entries) {
    auto key = pair.z < pair.w ? std::pair{pair.z, pair.w} : std::pair{pair.w, pair.z};
    combined[key] += f;
  }
  // std::map iterates in lexicographic order, so the first maximum wins ties.
  auto best = combined.begin();
  for (auto it = combined.begin(); it != combined.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

AggregateResult majority_vote_estimate(const Dataset& data, const PairFrequencyTable& table,
                                       const std::string& treatment, const std::string& outcome,
                                       const std::vector<std::string>& covariates) {
  const auto [a, b] = majority_pair(table);
  const NcPair pair{a, b};
  AteEstimate est = gmm_linear_ate(data, pair, treatment, outcome, covariates);

  AggregateResult r;
  r.method = AggregateMethod::MajorityVote;
  r.delta_hat = est.delta_hat;
  r.se = *est.se;
  r.ci_low = *est.ci_low;
  r.ci_high = *est.ci_high;
  const auto it = table.entries.find(pair);
  const auto it_rev = table.entries.find(NcPair{b, a});
  const int freq = (it != table.entries.end() ? it->second : 0) +
                   (it_rev != table.entries.end() ? it_rev->second : 0);
  r.per_pair.push_back({pair, std::move(est), 1.0, freq});
  return r;
}

std::vector<std::pair<NcPair, double>> aggregation_weights(const PairFrequencyTable& table,
                                                           PairOrientation orientation) {
  std::vector<std::pair<NcPair, double>> out;
  double total = 0.0;
  for (const auto& [pair, f] : table.entries) {
    if (orientation == PairOrientation::Unordered && !(pair.z < pair.w)) continue;
    out.emplace_back(pair, static_cast<double>(f));
    total += f;
  }
  if (out.empty()) throw Error(ErrorKind::EmptyDnctList, "empty pair table");
  for (auto& [pair, w] : out) w /= total;
  return out;
}

StackedSystem stack_pair_moments(const std::vector<PairMoments>& fits,
                                 const std::vector<double>& weights) {
  if (fits.empty() || fits.size() != weights.size())
    throw Error(ErrorKind::InvalidArgument, "need one weight per pair fit");
  const Eigen::Index n = fits.front().moments.rows();
  Eigen::Index dim = 0;
  for (const auto& f : fits) dim += f.theta.size();

  StackedSystem s;
  s.theta.resize(dim);
  s.jacobian = Eigen::MatrixXd::Zero(dim, dim);
  s.moments.resize(n, dim);
  s.omega = Eigen::VectorXd::Zero(dim);
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const auto kk = fits[k].theta.size();
    s.theta.segment(off, kk) = fits[k].theta;
    s.jacobian.block(off, off, kk, kk) = fits[k].jacobian;
    s.moments.middleCols(off, kk) = fits[k].moments;
    s.omega(off + PairMoments::kDeltaIndex) = weights[k];
    off += kk;
  }
  s.covariance = sandwich_covariance(s.jacobian, s.moments);
  return s;
}

namespace {

std::vector<PairMoments> fit_all(const Dataset& data,
                                 const std::vector<std::pair<NcPair, double>>& pairs,
                                 const std::string& t, const std::string& o,
                                 const std::vector<std::string>& covariates, Exec exec) {
  std::vector<PairMoments> fits(pairs.size());
  std::vector<std::string> errors(pairs.size());
  const auto m = static_cast<std::ptrdiff_t>(pairs.size());
  auto fit_one = [&](std::ptrdiff_t k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      fits[i] = fit_linear_bridge(data, pairs[i].first, t, o, covariates);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < m; ++k) fit_one(k);
  } else {
    for (std::ptrdiff_t k = 0; k < m; ++k) fit_one(k);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorKind::SingularMomentMatrix, e);
  return fits;
}

double weighted_delta(const Dataset& data, const std::vector<std::pair<NcPair, double>>& pairs,
                      const std::string& t, const std::string& o,
                      const std::vector<std::string>& covariates) {
  double d = 0.0;
  for (const auto& [pair, w] : pairs)
    d += w * fit_linear_bridge(data, pair, t, o, covariates).theta(PairMoments::kDeltaIndex);
  return d;
}

double quantile_type7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

AggregateResult weighted_estimate(const Dataset& data, const PairFrequencyTable& table,
                                  const std::string& treatment, const std::string& outcome,
                                  const std::vector<std::string>& covariates,
                                  const WeightedOptions& options) {
  const auto pairs = aggregation_weights(table, options.orientation);
  const auto fits = fit_all(data, pairs, treatment, outcome, covariates, options.exec);

  AggregateResult r;
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  // Influence of each observation on the weighted delta: sum_k w_k e_delta' A_k^{-1} g_ik.
  // Equals omega' V(theta) omega of the stacked sandwich without forming V.
  Eigen::VectorXd influence = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const auto& f = fits[k];
    const double w = pairs[k].second;
    r.delta_hat += w * f.theta(PairMoments::kDeltaIndex);
    const Eigen::MatrixXd a_inv = f.jacobian.fullPivLu().inverse();
    const Eigen::VectorXd row = a_inv.row(PairMoments::kDeltaIndex).transpose();
    influence += w * (f.moments * row);

    AteEstimate est;
    est.delta_hat = f.theta(PairMoments::kDeltaIndex);
    est.method = covariates.empty() ? EstimateMethod::GmmLinear : EstimateMethod::GmmLinearX;
    est.pair = f.pair;
    est.condition_number = f.condition_number;
    const Eigen::MatrixXd v = sandwich_covariance(f.jacobian, f.moments);
    attach_normal_ci(est, std::sqrt(std::max(0.0, v(2, 2))));
    const auto it = table.entries.find(f.pair);
    r.per_pair.push_back({f.pair, std::move(est), w, it == table.entries.end() ? 0 : it->second});
  }

  if (options.ci == CiMethod::Sandwich) {
    r.method = AggregateMethod::WeightedSandwich;
    const double nn = static_cast<double>(n);
    r.se = std::sqrt(influence.squaredNorm() / (nn * nn));
    r.ci_low = r.delta_hat - kZ95 * r.se;
    r.ci_high = r.delta_hat + kZ95 * r.se;
    return r;
  }

  r.method = AggregateMethod::WeightedBootstrap;
  const int b_count = options.bootstrap_b;
  if (b_count < 2) throw Error(ErrorKind::InvalidArgument, "bootstrap needs B >= 2");
  const long cap = 10L * b_count;
  std::vector<double> draws(static_cast<std::size_t>(b_count));
  std::vector<int> failures(static_cast<std::size_t>(b_count), 0);
  std::atomic<bool> exhausted{false};
  const std::size_t nrow = data.n();

  auto resample = [&](std::ptrdiff_t b) {
    std::vector<std::size_t> idx(nrow);
    for (long attempt = 0; attempt <= cap && !exhausted.load(std::memory_order_relaxed); ++attempt) {
      Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(b),
                                         static_cast<std::uint64_t>(attempt)}));
      std::uniform_int_distribution<std::size_t> pick(0, nrow - 1);
      for (auto& i : idx) i = pick(rng);
      try {
        draws[static_cast<std::size_t>(b)] =
            weighted_delta(data.select_rows(idx), pairs, treatment, outcome, covariates);
        return;
      } catch (const Error&) {
        ++failures[static_cast<std::size_t>(b)];
      }
    }
    exhausted = true;
  };
  if (options.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < b_count; ++b) resample(b);
  } else {
    for (std::ptrdiff_t b = 0; b < b_count; ++b) resample(b);
  }
  const long total_failures = std::accumulate(failures.begin(), failures.end(), 0L);
  if (exhausted || total_failures > cap)
    throw Error(ErrorKind::BootstrapDegenerate,
                fmt::format("{} failed resamples exceed the retry cap {}", total_failures, cap));
  r.bootstrap_redraws = static_cast<int>(total_failures);

  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / b_count;
  double ss = 0.0;
  for (double d : draws) ss += (d - mean) * (d - mean);
  r.se = std::sqrt(ss / (b_count - 1));
  if (options.interval == BootstrapInterval::Normal) {
    r.ci_low = r.delta_hat - kZ95 * r.se;
    r.ci_high = r.delta_hat + kZ95 * r.se;
  } else {
    r.ci_low = quantile_type7(draws, 0.025);
    r.ci_high = quantile_type7(draws, 0.975);
  }
  return r;
}

AggregateResult joint_gmm_triplet(const Dataset& data, const Dnct& dnct, const std::string& treatment,
                                  const std::string& outcome,
                                  const std::vector<std::string>& covariates) {
  const auto& ids = dnct.ids();
  for (const auto& id : ids)
    if (id == treatment || id == outcome)
      throw Error(ErrorKind::InvalidArgument, "triplet may not contain treatment or outcome");

  const auto n = static_cast<Eigen::Index>(data.n());
  const double nn = static_cast<double>(n);
  const auto nx = static_cast<Eigen::Index>(covariates.size());
  const Eigen::Index per_bridge = 2 + nx;   // alpha0, alpha1, beta_x
  const Eigen::Index dim = 1 + 3 * per_bridge;  // shared delta first
  const Eigen::Index kq = 3 + nx;           // instruments (1, Z, T, X)

  // Blocks: for each W in (A, B, C), Z runs over the other two members.
  struct Block {
    std::size_t w;
    std::size_t z;
  };
  std::vector<Block> blocks;
  for (std::size_t w = 0; w < 3; ++w)
    for (std::size_t z = 0; z < 3; ++z)
      if (z != w) blocks.push_back({w, z});

  const Eigen::VectorXd y = data.column(outcome);
  const Eigen::VectorXd t = data.column(treatment);
  Eigen::MatrixXd xcov(n, nx);
  for (Eigen::Index j = 0; j < nx; ++j) xcov.col(j) = data.column(covariates[static_cast<std::size_t>(j)]);

  // gbar(theta) = c - M theta, stacked over blocks.
  const Eigen::Index rows = static_cast<Eigen::Index>(blocks.size()) * kq;
  Eigen::MatrixXd m_mat = Eigen::MatrixXd::Zero(rows, dim);
  Eigen::VectorXd c_vec(rows);
  std::vector<Eigen::MatrixXd> q_blocks, r_blocks;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& blk = blocks[bi];
    Eigen::MatrixXd q(n, kq), r(n, dim);
    q.col(0).setOnes();
    q.col(1) = data.column(ids[blk.z]);
    q.col(2) = t;
    if (nx) q.rightCols(nx) = xcov;
    r.setZero();
    r.col(0) = t;
    const Eigen::Index off = 1 + static_cast<Eigen::Index>(blk.w) * per_bridge;
    r.col(off).setOnes();
    r.col(off + 1) = data.column(ids[blk.w]);
    if (nx) r.middleCols(off + 2, nx) = xcov;
    const auto row0 = static_cast<Eigen::Index>(bi) * kq;
    m_mat.middleRows(row0, kq) = q.transpose() * r / nn;
    c_vec.segment(row0, kq) = q.transpose() * y / nn;
    q_blocks.push_back(std::move(q));
    r_blocks.push_back(std::move(r));
  }

  Eigen::VectorXd col_scale(dim);
  for (Eigen::Index j = 0; j < dim; ++j) col_scale(j) = m_mat.col(j).norm();
  if ((col_scale.array() == 0.0).any())
    throw Error(ErrorKind::SingularMomentMatrix, "joint moment matrix has an empty column");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_mat * col_scale.cwiseInverse().asDiagonal());
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                            : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12))
    throw Error(ErrorKind::SingularMomentMatrix,
                fmt::format("joint moment matrix for ({}, {}, {}) is rank deficient; condition number {:.3g}",
                            ids[0], ids[1], ids[2], cond));

  // Damped Gauss-Newton on the identity-weighted objective gbar' gbar. The
  // residuals are linear in theta, so the undamped step lands on the minimizer.
  const Eigen::MatrixXd mtm = m_mat.transpose() * m_mat;
  const auto normal = mtm.ldlt();
  auto objective = [&](const Eigen::VectorXd& th) { return (c_vec - m_mat * th).squaredNorm(); };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  double obj = objective(theta);
  bool converged = false;
  for (int iter = 0; iter < 50 && !converged; ++iter) {
    const Eigen::VectorXd g = c_vec - m_mat * theta;
    const Eigen::VectorXd grad = -2.0 * m_mat.transpose() * g;
    if (grad.norm() <= 1e-10 * (1.0 + c_vec.norm())) {
      converged = true;
      break;
    }
    const Eigen::VectorXd step = normal.solve(m_mat.transpose() * g);
    double lambda = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half, lambda *= 0.5) {
      const Eigen::VectorXd cand = theta + lambda * step;
      const double cand_obj = objective(cand);
      if (cand_obj < obj) {
        const double reduction = obj - cand_obj;
        theta = cand;
        obj = cand_obj;
        improved = true;
        if (reduction < 1e-12) converged = true;
        break;
      }
    }
    if (!improved) {
      converged = true;
      break;
    }
  }
  const Eigen::VectorXd final_grad = -2.0 * m_mat.transpose() * (c_vec - m_mat * theta);
  if (!converged || final_grad.norm() > 1e-6)
    throw Error(ErrorKind::NonConvergence,
                fmt::format("Gauss-Newton stalled with gradient norm {:.3g}", final_grad.norm()));

  // Per-observation stacked moments at theta_hat.
  Eigen::MatrixXd moments(n, rows);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const Eigen::VectorXd resid = y - r_blocks[bi] * theta;
    moments.middleCols(static_cast<Eigen::Index>(bi) * kq, kq) =
        q_blocks[bi].array().colwise() * resid.array();
  }
  // Identity-weighted GMM sandwich: (G'G)^{-1} G' S G (G'G)^{-1} / n, G = -M.
  const Eigen::MatrixXd s = moments.transpose() * moments / nn;
  const Eigen::MatrixXd bread = mtm.inverse();
  const Eigen::MatrixXd v = bread * m_mat.transpose() * s * m_mat * bread / nn;

  AggregateResult r;
  r.method = AggregateMethod::JointGmm;
  r.delta_hat = theta(0);
  r.se = std::sqrt(std::max(0.0, v(0, 0)));
  r.ci_low = r.delta_hat - kZ95 * r.se;
  r.ci_high = r.delta_hat + kZ95 * r.se;
  r.parameters.emplace_back("delta", theta(0));
  for (std::size_t w = 0; w < 3; ++w) {
    const Eigen::Index off = 1 + static_cast<Eigen::Index>(w) * per_bridge;
    r.parameters.emplace_back(fmt::format("alpha0[{}]", ids[w]), theta(off));
    r.parameters.emplace_back(fmt::format("alpha1[{}]", ids[w]), theta(off + 1));
    for (Eigen::Index j = 0; j < nx; ++j)
      r.parameters.emplace_back(fmt::format("beta[{}][{}]", ids[w], covariates[static_cast<std::size_t>(j)]),
                                theta(off + 2 + j));
  }
  for (const auto& blk : blocks) {
    PairContribution pc;
    pc.pair = NcPair{ids[blk.z], ids[blk.w]};
    pc.weight = 1.0 / 6.0;
    pc.frequency = 1;
    pc.estimate.delta_hat = theta(0);
    pc.estimate.method = covariates.empty() ? EstimateMethod::GmmLinear : EstimateMethod::GmmLinearX;
    pc.estimate.pair = pc.pair;
    r.per_pair.push_back(std::move(pc));
  }
  return r;
}

}  // namespace dance
