#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dance/dataset.hpp"
#include "dance/dnct.hpp"
#include "dance/estimation.hpp"
#include "dance/parallel.hpp"

namespace dance {

/// Ordered pair (z, w) -> number of DNCTs containing both members.
struct PairFrequencyTable {
  std::map<NcPair, int> entries;
  /// Sum of all frequencies; 6 per DNCT.
  int total_pairs = 0;
};

PairFrequencyTable enumerate_pairs(const std::vector<Dnct>& dncts);

/// Which estimates a weighted aggregate averages over.
///  Ordered:   both role assignments of each pair, weight proportional to frequency.
///  Unordered: one estimate per unordered pair (z = smaller id), weight
///             proportional to the unordered frequency.
enum class PairOrientation { Ordered, Unordered };

enum class AggregateMethod { MajorityVote, WeightedSandwich, WeightedBootstrap, JointGmm };
std::string to_string(AggregateMethod m);

struct PairContribution {
  NcPair pair;
  AteEstimate estimate;
  double weight = 0.0;
  int frequency = 0;
};

struct AggregateResult {
  double delta_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  AggregateMethod method = AggregateMethod::WeightedSandwich;
  std::vector<PairContribution> per_pair;
  /// Named point estimates of every free parameter (joint GMM only).
  std::vector<std::pair<std::string, double>> parameters;
  /// Resamples that failed to solve and were redrawn (bootstrap only).
  int bootstrap_redraws = 0;
};

AggregateResult majority_vote_estimate(const Dataset& data, const PairFrequencyTable& table,
                                       const std::string& treatment, const std::string& outcome,
                                       const std::vector<std::string>& covariates = {});

/// The unordered pair chosen by majority vote (ties broken lexicographically).
std::pair<std::string, std::string> majority_pair(const PairFrequencyTable& table);

enum class CiMethod { Sandwich, Bootstrap };
enum class BootstrapInterval { Normal, Percentile };

struct WeightedOptions {
  CiMethod ci = CiMethod::Sandwich;
  int bootstrap_b = 500;
  BootstrapInterval interval = BootstrapInterval::Normal;
  std::uint64_t seed = 0;
  PairOrientation orientation = PairOrientation::Ordered;
  Exec exec = Exec::Parallel;
};

AggregateResult weighted_estimate(const Dataset& data, const PairFrequencyTable& table,
                                  const std::string& treatment, const std::string& outcome,
                                  const std::vector<std::string>& covariates = {},
                                  const WeightedOptions& options = {});

/// Pairs and weights the weighted estimator uses, in table order.
std::vector<std::pair<NcPair, double>> aggregation_weights(const PairFrequencyTable& table,
                                                           PairOrientation orientation);

/// Stacked sandwich over K exactly identified pair systems. `jacobian` is the
/// block-diagonal A_n, `moments` the n x (sum k) per-observation moments,
/// `covariance` = A^{-1} S A^{-T} / n, `omega` places each weight on its
/// pair's delta coordinate.
struct StackedSystem {
  Eigen::VectorXd theta;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd moments;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd omega;
};

StackedSystem stack_pair_moments(const std::vector<PairMoments>& fits,
                                 const std::vector<double>& weights);

AggregateResult joint_gmm_triplet(const Dataset& data, const Dnct& dnct, const std::string& treatment,
                                  const std::string& outcome,
                                  const std::vector<std::string>& covariates = {});

}  // namespace dance
