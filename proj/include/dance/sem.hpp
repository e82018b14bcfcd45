#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dance/dataset.hpp"
#include "dance/dnct.hpp"

namespace dance {

enum class Family { Gaussian, Binary };
enum class Strength { Weak, Strong };

std::string to_string(Family f);
std::string to_string(Strength s);
Family parse_family(const std::string& s);
Strength parse_strength(const std::string& s);

struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};

struct EdgeSpec {
  std::string from;
  std::string to;
  /// Exactly one of `coeff` (fixed) or `dist` (drawn once per seed) is set.
  std::optional<double> coeff;
  std::optional<UniformDist> dist;
};

/// Per-node marginal law. Gaussian nodes: value = mean + sum(coeff * parent) +
/// sd * N(0,1). Binary nodes: Bernoulli(sigmoid(intercept + sum(coeff * parent))).
struct NodeLaw {
  double mean = 0.0;
  double sd = 1.0;
  double intercept = 0.0;
};

/// A simple negative-control model: one latent parent of every measured node,
/// treatment and outcome touched only by U -> T, U -> O, T -> O.
struct GraphSpec {
  std::vector<std::string> nodes;
  std::string latent;
  std::string treatment;
  std::string outcome;
  std::vector<EdgeSpec> edges;
  std::map<std::string, NodeLaw> laws;
  Family family = Family::Gaussian;

  /// Measured nodes other than T and O, in node order.
  std::vector<std::string> candidates() const;
};

/// Throws InvalidGraph when the spec violates the simple-NC-model invariants.
void validate_graph(const GraphSpec& spec);

/// A GraphSpec with one realized coefficient per edge.
struct SemModel {
  GraphSpec spec;
  std::vector<double> coefficients;
  std::uint64_t coefficient_seed = 0;

  double coefficient(const std::string& from, const std::string& to) const;
};

/// Draws every distributional edge coefficient once from `seed`; fixed
/// coefficients are copied through.
SemModel realize(const GraphSpec& spec, std::uint64_t seed);

/// The two simulation designs: "simple" (Z1..Z4, Z1->Z2) and "complex"
/// (Z1..Z7, Z1->Z2, Z3->Z4, Z4->Z5, Z3->Z5, Z6->Z7).
GraphSpec builtin_graph_spec(const std::string& name, Strength strength, Family family);
SemModel builtin_graph(const std::string& name, Strength strength, Family family, std::uint64_t seed);

/// Default latent scale: Normal(0, 2) read as variance 2.
inline constexpr double kLatentVariance = 2.0;

/// Ancestral sampling in topological order; the latent column is dropped.
/// Throws InvalidArgument when n == 0.
Dataset generate(const SemModel& model, std::size_t n, std::uint64_t seed);

/// Every sorted triple of candidates whose pairwise treks all pass through the
/// latent node.
std::vector<Dnct> ground_truth_dncts(const GraphSpec& spec);

/// True when a trek joins `a` and `b` without passing through the latent node.
bool has_non_latent_trek(const GraphSpec& spec, const std::string& a, const std::string& b);

/// Gaussian family: the T -> O coefficient. Binary family: E[O | do(T=1)] -
/// E[O | do(T=0)] by exhaustive enumeration of the Bernoulli state space.
double true_ate(const SemModel& model);

/// Population covariance of the measured nodes implied by a Gaussian model
/// (path tracing via (I - B)^{-1}).
CovMatrix population_covariance(const SemModel& model);

}  // namespace dance
