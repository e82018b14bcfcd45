#include "dance/json_io.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dance/error.hpp"

namespace dance {

namespace {

Json triple_json(const DnctCandidate& c) { return Json::array({c[0], c[1], c[2]}); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const TetradResult& r) {
  Json j;
  j["left"] = Json::array({r.spec.left[0], r.spec.left[1]});
  j["right"] = Json::array({r.spec.right[0], r.spec.right[1]});
  j["d_hat"] = r.d_hat;
  j["sigma_hat"] = r.sigma_hat;
  j["w"] = r.w_stat;
  j["p"] = r.p_value;
  j["vanishes"] = r.vanishes;
  j["degenerate"] = r.degenerate;
  return j;
}

Json to_json(const FindNcReport& report) {
  Json j;
  j["schema"] = "dance.find_nc/1";
  j["treatment"] = report.treatment;
  j["outcome"] = report.outcome;
  j["n"] = report.n;
  j["alpha"] = report.alpha_used;
  j["dncts"] = Json::array();
  for (const auto& d : report.dncts) j["dncts"].push_back(triple_json(d));
  j["verdicts"] = Json::array();
  for (const auto& v : report.all_verdicts) {
    Json vj;
    vj["triple"] = triple_json(v.candidate);
    vj["passed"] = v.passed;
    vj["tests"] = Json::array();
    for (const auto& t : v.sub_results) vj["tests"].push_back(to_json(t));
    j["verdicts"].push_back(std::move(vj));
  }
  return j;
}

Json to_json(const AteEstimate& est) {
  Json j;
  j["schema"] = "dance.ate_estimate/1";
  j["method"] = to_string(est.method);
  j["delta_hat"] = est.delta_hat;
  j["se"] = est.se ? Json(*est.se) : Json(nullptr);
  j["ci_low"] = est.ci_low ? Json(*est.ci_low) : Json(nullptr);
  j["ci_high"] = est.ci_high ? Json(*est.ci_high) : Json(nullptr);
  if (est.pair) j["pair"] = {{"z", est.pair->z}, {"w", est.pair->w}};
  if (est.bridge) {
    j["bridge"] = {{"alpha0", est.bridge->alpha0},
                   {"alpha1", est.bridge->alpha1},
                   {"delta", est.bridge->delta},
                   {"beta_x", est.bridge->beta_x}};
  }
  if (est.condition_number) j["condition_number"] = finite_or_null(*est.condition_number);
  return j;
}

Json to_json(const PairFrequencyTable& table) {
  Json arr = Json::array();
  for (const auto& [pair, f] : table.entries) arr.push_back({{"z", pair.z}, {"w", pair.w}, {"frequency", f}});
  return arr;
}

Json to_json(const AggregateResult& agg) {
  Json j;
  j["schema"] = "dance.aggregate/1";
  j["method"] = to_string(agg.method);
  j["delta_hat"] = agg.delta_hat;
  j["se"] = agg.se;
  j["ci_low"] = agg.ci_low;
  j["ci_high"] = agg.ci_high;
  j["per_pair"] = Json::array();
  for (const auto& pc : agg.per_pair) {
    Json p;
    p["z"] = pc.pair.z;
    p["w"] = pc.pair.w;
    p["frequency"] = pc.frequency;
    p["weight"] = pc.weight;
    p["delta_hat"] = pc.estimate.delta_hat;
    p["se"] = pc.estimate.se ? Json(*pc.estimate.se) : Json(nullptr);
    j["per_pair"].push_back(std::move(p));
  }
  if (!agg.parameters.empty()) {
    Json params;
    for (const auto& [name, v] : agg.parameters) params[name] = v;
    j["parameters"] = std::move(params);
  }
  if (agg.method == AggregateMethod::WeightedBootstrap) j["bootstrap_redraws"] = agg.bootstrap_redraws;
  return j;
}

Json to_json(const GraphSpec& spec) {
  Json j;
  j["nodes"] = spec.nodes;
  j["latent"] = spec.latent;
  j["treatment"] = spec.treatment;
  j["outcome"] = spec.outcome;
  j["family"] = to_string(spec.family);
  j["edges"] = Json::array();
  for (const auto& e : spec.edges) {
    Json ej;
    ej["from"] = e.from;
    ej["to"] = e.to;
    if (e.coeff) ej["coeff"] = *e.coeff;
    if (e.dist) ej["dist"] = {{"uniform", {e.dist->lo, e.dist->hi}}};
    j["edges"].push_back(std::move(ej));
  }
  Json noise = Json::object();
  for (const auto& v : spec.nodes) {
    const auto it = spec.laws.find(v);
    if (it == spec.laws.end()) continue;
    if (spec.family == Family::Gaussian)
      noise[v] = {{"mean", it->second.mean}, {"sd", it->second.sd}};
    else
      noise[v] = {{"intercept", it->second.intercept}};
  }
  j["noise"] = std::move(noise);
  return j;
}

GraphSpec graph_spec_from_json(const Json& j) {
  GraphSpec g;
  try {
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    g.latent = j.at("latent").get<std::string>();
    g.treatment = j.at("treatment").get<std::string>();
    g.outcome = j.at("outcome").get<std::string>();
    g.family = parse_family(j.value("family", std::string("gaussian")));
    for (const auto& ej : j.at("edges")) {
      EdgeSpec e;
      e.from = ej.at("from").get<std::string>();
      e.to = ej.at("to").get<std::string>();
      if (ej.contains("coeff")) e.coeff = ej.at("coeff").get<double>();
      if (ej.contains("dist")) {
        const auto& u = ej.at("dist").at("uniform");
        e.dist = UniformDist{u.at(0).get<double>(), u.at(1).get<double>()};
      }
      g.edges.push_back(std::move(e));
    }
    if (j.contains("noise")) {
      for (const auto& [node, lj] : j.at("noise").items()) {
        NodeLaw law;
        law.mean = lj.value("mean", 0.0);
        law.sd = lj.value("sd", 1.0);
        law.intercept = lj.value("intercept", g.family == Family::Binary && node != g.latent ? -1.0 : 0.0);
        g.laws[node] = law;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidGraph, e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidGraph, e.what());
  }
  validate_graph(g);
  return g;
}

Json simulation_manifest(const SemModel& model, std::size_t n, std::uint64_t seed,
                         const std::optional<BuiltinSelector>& builtin) {
  Json j;
  j["schema"] = "dance.simulation_manifest/1";
  if (builtin) {
    j["builtin"] = {{"name", builtin->name},
                    {"strength", to_string(builtin->strength)},
                    {"family", to_string(builtin->family)}};
  }
  j["graph"] = to_json(model.spec);
  j["coefficient_seed"] = model.coefficient_seed;
  j["coefficients"] = Json::array();
  for (std::size_t e = 0; e < model.spec.edges.size(); ++e)
    j["coefficients"].push_back({{"from", model.spec.edges[e].from},
                                 {"to", model.spec.edges[e].to},
                                 {"coeff", model.coefficients[e]}});
  j["n"] = n;
  j["seed"] = seed;
  j["true_delta"] = true_ate(model);
  j["ground_truth_dncts"] = Json::array();
  for (const auto& d : ground_truth_dncts(model.spec)) j["ground_truth_dncts"].push_back(triple_json(d));
  return j;
}

StudyConfig study_config_from_json(const Json& j) {
  StudyConfig c;
  try {
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      if (g.is_string())
        c.graph = g.get<std::string>();
      else
        c.custom_graph = graph_spec_from_json(g);
    }
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("strength")) c.strength = parse_strength(j.at("strength").get<std::string>());
    if (c.custom_graph) c.family = c.custom_graph->family;
    if (j.contains("sample_sizes")) c.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("alpha_grid")) c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("coefficient_seed")) c.coefficient_seed = j.at("coefficient_seed").get<std::uint64_t>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_study_method(m.get<std::string>()));
    }
    if (j.contains("random_mode")) {
      const auto mode = j.at("random_mode").get<std::string>();
      if (mode == "ordered_pairs")
        c.random_mode = RandomMode::OrderedPairs;
      else if (mode == "triplet_then_pair")
        c.random_mode = RandomMode::TripletThenPair;
      else
        throw Error(ErrorKind::InvalidArgument, fmt::format("unknown random_mode '{}'", mode));
    }
    if (j.contains("compute_roc")) c.compute_roc = j.at("compute_roc").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, e.what());
  }
  if (!c.custom_graph && c.graph != "simple" && c.graph != "complex")
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown graph '{}'", c.graph));
  validate_study_config(c);
  return c;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace dance
