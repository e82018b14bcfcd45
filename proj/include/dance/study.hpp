#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dance/parallel.hpp"
#include "dance/sem.hpp"

namespace dance {

enum class StudyMethod { Naive, Random, Dance };
std::string to_string(StudyMethod m);
StudyMethod parse_study_method(const std::string& s);

/// How the Random baseline draws its pair.
///  OrderedPairs:    uniformly over all ordered (z, w) candidate pairs.
///  TripletThenPair: uniformly over candidate triples, then over its six pairs.
enum class RandomMode { OrderedPairs, TripletThenPair };

struct StudyConfig {
  /// Builtin design name ("simple" / "complex") unless `custom_graph` is set.
  std::string graph = "simple";
  Strength strength = Strength::Weak;
  Family family = Family::Gaussian;
  std::optional<GraphSpec> custom_graph;
  std::vector<std::size_t> sample_sizes{1000, 3000};
  int replications = 200;
  /// ROC thresholds; 1/n is always added per sample size.
  std::vector<double> alpha_grid;
  std::uint64_t master_seed = 0;
  /// Seed for the one-time coefficient draw; derived from master_seed if unset.
  std::optional<std::uint64_t> coefficient_seed;
  std::vector<StudyMethod> methods{StudyMethod::Naive, StudyMethod::Random, StudyMethod::Dance};
  RandomMode random_mode = RandomMode::OrderedPairs;
  bool compute_roc = true;
  Exec exec = Exec::Parallel;
};

/// Logarithmic grid 1e-6 .. 0.5 (25 points).
std::vector<double> default_alpha_grid();

/// Throws InvalidArgument on replications < 1, sample sizes < 10, or alphas
/// outside (0, 1).
void validate_study_config(const StudyConfig& config);

struct MethodMetrics {
  StudyMethod method = StudyMethod::Dance;
  std::size_t n = 0;
  int estimates = 0;
  int failures = 0;
  double bias = 0.0;
  double proportion_bias_pct = 0.0;
  double mc_se = 0.0;
  double mean_estimated_se = 0.0;
  double coverage_95 = 0.0;
};

struct RocPoint {
  std::size_t n = 0;
  double alpha = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RecoveryStats {
  std::size_t n = 0;
  double alpha = 0.0;
  /// Replications whose DNCT set equals the ground truth exactly.
  double exact_recovery_rate = 0.0;
  /// Passing triples among (replication, non-DNCT triple) pairs.
  double false_dnct_rate = 0.0;
  /// Failing triples among (replication, true DNCT) pairs.
  double missed_dnct_rate = 0.0;
  /// Mann-Whitney AUC of -max|W| as a score for DNCT membership.
  double auc = 0.0;
};

struct FailureRecord {
  StudyMethod method = StudyMethod::Dance;
  std::size_t n = 0;
  int replication = 0;
  std::string reason;
};

struct StudyResult {
  SemModel model;
  double true_delta = 0.0;
  std::vector<Dnct> truth;
  std::vector<MethodMetrics> metrics;
  std::vector<RocPoint> roc;
  std::vector<RecoveryStats> recovery;
  std::vector<FailureRecord> failures;
};

/// Monte Carlo replication study. Replication r at size n uses data seed
/// derive_seed(master_seed, {r, n}); output is independent of worker count.
StudyResult run_study(const StudyConfig& config);

/// ROC points only (runs the validation half of the study).
std::vector<RocPoint> roc_curve(const StudyConfig& config);

/// Mann-Whitney AUC for scores where larger means "positive"; ties count 1/2.
/// NaN when either class is empty.
double auc_mann_whitney(const std::vector<double>& positive_scores,
                        const std::vector<double>& negative_scores);

std::string metrics_csv(const StudyResult& r);
std::string roc_csv(const StudyResult& r);
std::string recovery_csv(const StudyResult& r);
std::string failures_csv(const StudyResult& r);

}  // namespace dance
