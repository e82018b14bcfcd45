#include "dance/sem.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "dance/error.hpp"
#include "dance/rng.hpp"

namespace dance {

std::string to_string(Family f) { return f == Family::Gaussian ? "gaussian" : "binary"; }
std::string to_string(Strength s) { return s == Strength::Weak ? "weak" : "strong"; }

Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "binary") return Family::Binary;
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown family '{}'", s));
}

Strength parse_strength(const std::string& s) {
  if (s == "weak") return Strength::Weak;
  if (s == "strong") return Strength::Strong;
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown strength '{}'", s));
}

std::vector<std::string> GraphSpec::candidates() const {
  std::vector<std::string> out;
  for (const auto& v : nodes)
    if (v != latent && v != treatment && v != outcome) out.push_back(v);
  return out;
}

namespace {

std::size_t node_index(const GraphSpec& spec, const std::string& id) {
  for (std::size_t i = 0; i < spec.nodes.size(); ++i)
    if (spec.nodes[i] == id) return i;
  throw Error(ErrorKind::InvalidGraph, fmt::format("unknown node '{}'", id));
}

/// parents[v] = list of (parent index, edge index)
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> parent_lists(const GraphSpec& spec) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> parents(spec.nodes.size());
  for (std::size_t e = 0; e < spec.edges.size(); ++e)
    parents[node_index(spec, spec.edges[e].to)].emplace_back(node_index(spec, spec.edges[e].from), e);
  return parents;
}

/// Kahn's algorithm; ties resolved by node order. Throws on cycles.
std::vector<std::size_t> topological_order(const GraphSpec& spec) {
  const std::size_t m = spec.nodes.size();
  std::vector<int> indegree(m, 0);
  std::vector<std::vector<std::size_t>> children(m);
  for (const auto& e : spec.edges) {
    const auto f = node_index(spec, e.from);
    const auto t = node_index(spec, e.to);
    children[f].push_back(t);
    ++indegree[t];
  }
  std::vector<std::size_t> order;
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < m; ++v)
    if (indegree[v] == 0) ready.insert(v);
  while (!ready.empty()) {
    const auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (auto c : children[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (order.size() != m) throw Error(ErrorKind::InvalidGraph, "graph has a directed cycle");
  return order;
}

NodeLaw law_of(const GraphSpec& spec, const std::string& v) {
  const auto it = spec.laws.find(v);
  return it == spec.laws.end() ? NodeLaw{} : it->second;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate_graph(const GraphSpec& spec) {
  std::set<std::string> names;
  for (const auto& v : spec.nodes) {
    if (v.empty()) throw Error(ErrorKind::InvalidGraph, "empty node id");
    if (!names.insert(v).second) throw Error(ErrorKind::InvalidGraph, fmt::format("duplicate node '{}'", v));
  }
  for (const auto* role : {&spec.latent, &spec.treatment, &spec.outcome})
    if (!names.count(*role))
      throw Error(ErrorKind::InvalidGraph, fmt::format("role node '{}' is not in the node list", *role));
  if (spec.latent == spec.treatment || spec.latent == spec.outcome || spec.treatment == spec.outcome)
    throw Error(ErrorKind::InvalidGraph, "latent, treatment and outcome must be distinct");

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : spec.edges) {
    node_index(spec, e.from);
    node_index(spec, e.to);
    if (e.from == e.to) throw Error(ErrorKind::InvalidGraph, fmt::format("self loop on '{}'", e.from));
    if (!seen.insert({e.from, e.to}).second)
      throw Error(ErrorKind::InvalidGraph, fmt::format("duplicate edge {}->{}", e.from, e.to));
    if (e.coeff.has_value() == e.dist.has_value())
      throw Error(ErrorKind::InvalidGraph,
                  fmt::format("edge {}->{} needs exactly one of coeff or dist", e.from, e.to));
    if (e.dist && !(e.dist->lo <= e.dist->hi))
      throw Error(ErrorKind::InvalidGraph, fmt::format("edge {}->{} has lo > hi", e.from, e.to));
    if (e.to == spec.latent)
      throw Error(ErrorKind::InvalidGraph, "the latent node may not have parents");
    const bool touches_t = e.from == spec.treatment || e.to == spec.treatment;
    const bool touches_o = e.from == spec.outcome || e.to == spec.outcome;
    if (touches_t || touches_o) {
      const bool allowed = (e.from == spec.latent && (e.to == spec.treatment || e.to == spec.outcome)) ||
                           (e.from == spec.treatment && e.to == spec.outcome);
      if (!allowed)
        throw Error(ErrorKind::InvalidGraph,
                    fmt::format("edge {}->{} touches the treatment or outcome", e.from, e.to));
    }
  }
  for (const auto& v : spec.nodes)
    if (v != spec.latent && !seen.count({spec.latent, v}))
      throw Error(ErrorKind::InvalidGraph, fmt::format("latent is not a parent of '{}'", v));
  for (const auto& [v, law] : spec.laws) {
    if (!names.count(v)) throw Error(ErrorKind::InvalidGraph, fmt::format("law for unknown node '{}'", v));
    if (!(law.sd >= 0.0) || !std::isfinite(law.mean) || !std::isfinite(law.intercept))
      throw Error(ErrorKind::InvalidGraph, fmt::format("invalid law for '{}'", v));
  }
  topological_order(spec);
}

double SemModel::coefficient(const std::string& from, const std::string& to) const {
  for (std::size_t e = 0; e < spec.edges.size(); ++e)
    if (spec.edges[e].from == from && spec.edges[e].to == to) return coefficients[e];
  return 0.0;
}

SemModel realize(const GraphSpec& spec, std::uint64_t seed) {
  validate_graph(spec);
  SemModel model{spec, {}, seed};
  Rng rng(derive_seed(seed, {0xC0EFFULL}));
  for (const auto& e : spec.edges) {
    if (e.coeff) {
      model.coefficients.push_back(*e.coeff);
    } else {
      std::uniform_real_distribution<double> u(e.dist->lo, e.dist->hi);
      model.coefficients.push_back(u(rng));
    }
  }
  return model;
}

GraphSpec builtin_graph_spec(const std::string& name, Strength strength, Family family) {
  int k = 0;
  std::vector<std::pair<int, int>> nc_edges;
  if (name == "simple") {
    k = 4;
    nc_edges = {{1, 2}};
  } else if (name == "complex") {
    k = 7;
    nc_edges = {{1, 2}, {3, 4}, {4, 5}, {3, 5}, {6, 7}};
  } else {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown builtin graph '{}'", name));
  }

  UniformDist base{0.3, 0.7};
  UniformDist nc{1.0, 2.0};
  if (family == Family::Binary) {
    base = {1.0, 2.0};
    nc = {1.0, 2.0};
  } else if (strength == Strength::Strong) {
    base = {0.6, 1.0};
    nc = {2.0, 4.0};
  }

  GraphSpec g;
  g.family = family;
  g.latent = "U";
  g.treatment = "T";
  g.outcome = "O";
  g.nodes = {"U", "T", "O"};
  for (int i = 1; i <= k; ++i) g.nodes.push_back(fmt::format("Z{}", i));

  g.edges.push_back({"U", "T", std::nullopt, base});
  g.edges.push_back({"U", "O", std::nullopt, base});
  g.edges.push_back({"T", "O", std::nullopt, base});
  for (int i = 1; i <= k; ++i) g.edges.push_back({"U", fmt::format("Z{}", i), std::nullopt, base});
  for (auto [a, b] : nc_edges)
    g.edges.push_back({fmt::format("Z{}", a), fmt::format("Z{}", b), std::nullopt, nc});

  for (const auto& v : g.nodes) {
    NodeLaw law;
    if (family == Family::Gaussian) {
      law.sd = v == g.latent ? std::sqrt(kLatentVariance) : 1.0;
    } else {
      // U ~ Bernoulli(0.5) is sigmoid(0) with no parents.
      law.intercept = v == g.latent ? 0.0 : -1.0;
    }
    g.laws[v] = law;
  }
  return g;
}

SemModel builtin_graph(const std::string& name, Strength strength, Family family, std::uint64_t seed) {
  return realize(builtin_graph_spec(name, strength, family), seed);
}

Dataset generate(const SemModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "sample size must be >= 1");
  const GraphSpec& g = model.spec;
  const auto order = topological_order(g);
  const auto parents = parent_lists(g);
  const std::size_t m = g.nodes.size();
  std::vector<NodeLaw> laws(m);
  for (std::size_t v = 0; v < m; ++v) laws[v] = law_of(g, g.nodes[v]);

  const std::size_t latent = node_index(g, g.latent);
  std::vector<std::string> names;
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < m; ++v)
    if (v != latent) {
      names.push_back(g.nodes[v]);
      keep.push_back(v);
    }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keep.size()));
  std::vector<double> x(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto v : order) {
      double lin = g.family == Family::Gaussian ? laws[v].mean : laws[v].intercept;
      for (auto [p, e] : parents[v]) lin += model.coefficients[e] * x[p];
      if (g.family == Family::Gaussian)
        x[v] = lin + laws[v].sd * normal(rng);
      else
        x[v] = unif(rng) < sigmoid(lin) ? 1.0 : 0.0;
    }
    for (std::size_t j = 0; j < keep.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[keep[j]];
  }
  return Dataset(std::move(names), std::move(out), false);
}

bool has_non_latent_trek(const GraphSpec& spec, const std::string& a, const std::string& b) {
  // A trek is a pair of directed paths from a common source. The latent node
  // has no parents, so a trek avoids it iff its source is not the latent node;
  // it exists iff a and b share a non-latent ancestor (each counts as its own).
  const auto parents = parent_lists(spec);
  const std::size_t latent = node_index(spec, spec.latent);
  auto ancestors = [&](std::size_t start) {
    std::set<std::size_t> seen{start};
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto [p, e] : parents[v])
        if (p != latent && seen.insert(p).second) stack.push_back(p);
    }
    return seen;
  };
  const auto anc_a = ancestors(node_index(spec, a));
  const auto anc_b = ancestors(node_index(spec, b));
  for (auto v : anc_a)
    if (anc_b.count(v)) return true;
  return false;
}

std::vector<Dnct> ground_truth_dncts(const GraphSpec& spec) {
  validate_graph(spec);
  std::vector<Dnct> out;
  for (const auto& c : all_triples(spec.candidates())) {
    if (!has_non_latent_trek(spec, c[0], c[1]) && !has_non_latent_trek(spec, c[0], c[2]) &&
        !has_non_latent_trek(spec, c[1], c[2]))
      out.push_back(c);
  }
  return out;
}

double true_ate(const SemModel& model) {
  const GraphSpec& g = model.spec;
  if (g.family == Family::Gaussian) return model.coefficient(g.treatment, g.outcome);

  const auto order = topological_order(g);
  const auto parents = parent_lists(g);
  const std::size_t m = g.nodes.size();
  if (m > 25) throw Error(ErrorKind::InvalidArgument, "exhaustive enumeration is limited to 25 nodes");
  const std::size_t t = node_index(g, g.treatment);
  const std::size_t o = node_index(g, g.outcome);
  std::vector<std::size_t> free_nodes;
  for (auto v : order)
    if (v != t) free_nodes.push_back(v);

  auto mean_outcome = [&](double t_value) {
    std::vector<double> x(m, 0.0);
    x[t] = t_value;
    double total = 0.0;
    const std::uint64_t states = std::uint64_t{1} << free_nodes.size();
    for (std::uint64_t s = 0; s < states; ++s) {
      double prob = 1.0;
      for (std::size_t j = 0; j < free_nodes.size(); ++j) x[free_nodes[j]] = (s >> j) & 1U;
      for (auto v : free_nodes) {
        double lin = law_of(g, g.nodes[v]).intercept;
        for (auto [p, e] : parents[v]) lin += model.coefficients[e] * x[p];
        const double p1 = sigmoid(lin);
        prob *= x[v] == 1.0 ? p1 : 1.0 - p1;
      }
      total += prob * x[o];
    }
    return total;
  };
  return mean_outcome(1.0) - mean_outcome(0.0);
}

CovMatrix population_covariance(const SemModel& model) {
  const GraphSpec& g = model.spec;
  if (g.family != Family::Gaussian)
    throw Error(ErrorKind::InvalidArgument, "population covariance is defined for the Gaussian family");
  const auto m = static_cast<Eigen::Index>(g.nodes.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    b(static_cast<Eigen::Index>(node_index(g, g.edges[e].to)),
      static_cast<Eigen::Index>(node_index(g, g.edges[e].from))) = model.coefficients[e];
  Eigen::VectorXd var(m);
  for (Eigen::Index v = 0; v < m; ++v) {
    const double sd = law_of(g, g.nodes[static_cast<std::size_t>(v)]).sd;
    var(v) = sd * sd;
  }
  const Eigen::MatrixXd mix = (Eigen::MatrixXd::Identity(m, m) - b).inverse();
  const Eigen::MatrixXd full = mix * var.asDiagonal() * mix.transpose();

  const std::size_t latent = node_index(g, g.latent);
  std::vector<std::string> names;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index v = 0; v < m; ++v)
    if (static_cast<std::size_t>(v) != latent) {
      names.push_back(g.nodes[static_cast<std::size_t>(v)]);
      keep.push_back(v);
    }
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd cov(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) cov(i, j) = full(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
  return CovMatrix(std::move(names), 0.5 * (cov + cov.transpose()));
}

}  // namespace dance
