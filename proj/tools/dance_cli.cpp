// Command-line front end: find / estimate / dance / simulate / evaluate.
//
// Exit codes: 0 success, 1 I/O failure, 2 invalid input or flags,
// 3 no valid negative-control triplets, 4 estimation failed on valid input.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dance/aggregation.hpp"
#include "dance/dataset.hpp"
#include "dance/dnct.hpp"
#include "dance/error.hpp"
#include "dance/estimation.hpp"
#include "dance/json_io.hpp"
#include "dance/parallel.hpp"
#include "dance/sem.hpp"
#include "dance/study.hpp"

namespace fs = std::filesystem;
using namespace dance;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNoDncts = 3;
constexpr int kExitEstimation = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::SingularDenominator:
    case ErrorKind::SingularMomentMatrix:
    case ErrorKind::BootstrapDegenerate:
    case ErrorKind::NonConvergence:
    case ErrorKind::DegenerateVariance: return kExitEstimation;
    default: return kExitValidation;
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + out_path + "'");
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed JSON in '") + path + "': " + e.what());
  }
}

std::vector<std::string> default_candidates(const Dataset& data, const std::string& t,
                                            const std::string& o,
                                            const std::vector<std::string>& covariates) {
  std::vector<std::string> out;
  for (const auto& nm : data.names()) {
    if (nm == t || nm == o) continue;
    if (std::find(covariates.begin(), covariates.end(), nm) != covariates.end()) continue;
    out.push_back(nm);
  }
  return out;
}

void require_columns(const Dataset& data, const std::vector<std::string>& ids) {
  for (const auto& id : ids) data.index_of(id);
}

struct CommonArgs {
  std::string data;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> candidates;
  std::vector<std::string> covariates;
  std::optional<double> alpha;
  std::string out;
};

struct DanceArgs {
  std::string aggregate = "weighted";
  std::string ci = "sandwich";
  std::string interval = "normal";
  std::string orientation = "ordered";
  int boot_b = 500;
  std::uint64_t seed = 0;
};

FindNcReport run_find(const Dataset& data, const CommonArgs& a) {
  require_columns(data, {a.treatment, a.outcome});
  const auto cands =
      a.candidates.empty() ? default_candidates(data, a.treatment, a.outcome, a.covariates) : a.candidates;
  FindNcOptions opts;
  opts.alpha = a.alpha;
  return find_nc(data, cands, a.treatment, a.outcome, opts);
}

int cmd_find(const CommonArgs& a) {
  const Dataset data = load_csv(a.data);
  const FindNcReport report = run_find(data, a);
  emit(dump(to_json(report)), a.out);
  return report.dncts.empty() ? kExitNoDncts : kExitOk;
}

int cmd_dance(const CommonArgs& a, const DanceArgs& d) {
  const Dataset data = load_csv(a.data);
  require_columns(data, a.covariates);
  const FindNcReport report = run_find(data, a);
  if (report.dncts.empty()) {
    emit(dump(to_json(report)), a.out);
    return kExitNoDncts;
  }
  const auto table = enumerate_pairs(report.dncts);
  AggregateResult agg;
  if (d.aggregate == "majority") {
    agg = majority_vote_estimate(data, table, a.treatment, a.outcome, a.covariates);
  } else {
    WeightedOptions wo;
    wo.ci = d.ci == "bootstrap" ? CiMethod::Bootstrap : CiMethod::Sandwich;
    wo.bootstrap_b = d.boot_b;
    wo.interval = d.interval == "percentile" ? BootstrapInterval::Percentile : BootstrapInterval::Normal;
    wo.orientation = d.orientation == "unordered" ? PairOrientation::Unordered : PairOrientation::Ordered;
    wo.seed = d.seed;
    agg = weighted_estimate(data, table, a.treatment, a.outcome, a.covariates, wo);
  }
  Json j = to_json(agg);
  j["treatment"] = a.treatment;
  j["outcome"] = a.outcome;
  j["covariates"] = a.covariates;
  j["n"] = data.n();
  j["alpha"] = report.alpha_used;
  j["dncts"] = Json::array();
  for (const auto& t : report.dncts) j["dncts"].push_back({t[0], t[1], t[2]});
  j["pair_frequencies"] = to_json(table);
  emit(dump(j), a.out);
  return kExitOk;
}

int cmd_estimate(const CommonArgs& a, const std::string& z, const std::string& w,
                 const std::string& method) {
  const Dataset data = load_csv(a.data);
  require_columns(data, {a.treatment, a.outcome, z, w});
  require_columns(data, a.covariates);
  const NcPair pair{z, w};
  AteEstimate est;
  if (method == "closed") {
    if (!a.covariates.empty())
      throw Error(ErrorKind::InvalidArgument, "--method closed does not take covariates; use gmm");
    est = closed_form_ate(covariance(data), pair, a.treatment, a.outcome);
  } else {
    est = gmm_linear_ate(data, pair, a.treatment, a.outcome, a.covariates);
  }
  emit(dump(to_json(est)), a.out);
  return kExitOk;
}

struct SimulateArgs {
  std::string graph = "simple";
  std::string family = "gaussian";
  std::string strength = "weak";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> coef_seed;
  std::string out;
  std::string manifest;
};

int cmd_simulate(const SimulateArgs& s) {
  const std::uint64_t coef_seed = s.coef_seed.value_or(s.seed);
  SemModel model;
  std::optional<BuiltinSelector> builtin;
  if (s.graph == "simple" || s.graph == "complex") {
    builtin = BuiltinSelector{s.graph, parse_strength(s.strength), parse_family(s.family)};
    model = builtin_graph(s.graph, builtin->strength, builtin->family, coef_seed);
  } else {
    model = realize(graph_spec_from_json(read_json_file(s.graph)), coef_seed);
  }
  const Dataset data = generate(model, s.n, s.seed);
  write_csv(data, s.out);
  if (!s.manifest.empty()) emit(dump(simulation_manifest(model, s.n, s.seed, builtin)), s.manifest);
  return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& out_dir) {
  const StudyConfig config = study_config_from_json(read_json_file(config_path));
  const StudyResult result = run_study(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + out_dir + "': " + ec.message());
  const fs::path dir(out_dir);
  emit(metrics_csv(result), (dir / "metrics.csv").string());
  emit(roc_csv(result), (dir / "roc.csv").string());
  emit(failures_csv(result), (dir / "failures.csv").string());
  emit(recovery_csv(result), (dir / "recovery.csv").string());
  Json summary;
  summary["schema"] = "dance.study/1";
  summary["graph"] = to_json(result.model.spec);
  summary["coefficient_seed"] = result.model.coefficient_seed;
  summary["coefficients"] = result.model.coefficients;
  summary["true_delta"] = result.true_delta;
  summary["ground_truth_dncts"] = Json::array();
  for (const auto& t : result.truth) summary["ground_truth_dncts"].push_back({t[0], t[1], t[2]});
  emit(dump(summary), (dir / "study.json").string());
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_candidates) {
  cmd->add_option("--data", a.data, "Input CSV with a header row")->required();
  cmd->add_option("--treatment", a.treatment, "Treatment column")->required();
  cmd->add_option("--outcome", a.outcome, "Outcome column")->required();
  if (with_candidates) {
    cmd->add_option("--candidates", a.candidates, "Comma-separated candidate NC columns (default: all others)")
        ->delimiter(',');
    cmd->add_option("--alpha", a.alpha, "Tetrad test level (default 1/n)")
        ->check(CLI::Range(0.0, 1.0).description("in (0,1)"));
  }
  cmd->add_option("--out", a.out, "Write JSON here instead of stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Negative-control discovery and ATE estimation under a single unmeasured confounder"};
  app.require_subcommand(1, 1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (default: all)");

  CommonArgs common;
  DanceArgs dance_args;
  std::string z, w, method = "gmm";
  SimulateArgs sim;
  std::string config_path, out_dir;

  auto* find = app.add_subcommand("find", "Search candidate triples for disconnected negative controls");
  add_common(find, common, true);

  auto* dance_cmd = app.add_subcommand("dance", "Find negative controls, then aggregate ATE estimates");
  add_common(dance_cmd, common, true);
  dance_cmd->add_option("--covariates", common.covariates, "Comma-separated measured confounders")->delimiter(',');
  dance_cmd->add_option("--aggregate", dance_args.aggregate)->check(CLI::IsMember({"majority", "weighted"}));
  dance_cmd->add_option("--ci", dance_args.ci)->check(CLI::IsMember({"sandwich", "bootstrap"}));
  dance_cmd->add_option("--boot-interval", dance_args.interval)->check(CLI::IsMember({"normal", "percentile"}));
  dance_cmd->add_option("--pairs", dance_args.orientation, "Weight ordered or unordered pairs")
      ->check(CLI::IsMember({"ordered", "unordered"}));
  dance_cmd->add_option("--boot-b", dance_args.boot_b)->check(CLI::PositiveNumber);
  dance_cmd->add_option("--seed", dance_args.seed);

  auto* estimate = app.add_subcommand("estimate", "ATE from one negative-control pair");
  add_common(estimate, common, false);
  estimate->add_option("--z", z, "Negative-control exposure")->required();
  estimate->add_option("--w", w, "Negative-control outcome")->required();
  estimate->add_option("--covariates", common.covariates)->delimiter(',');
  estimate->add_option("--method", method)->check(CLI::IsMember({"closed", "gmm"}));

  auto* simulate = app.add_subcommand("simulate", "Generate data from a simple negative-control model");
  simulate->add_option("--graph", sim.graph, "simple, complex, or a GraphSpec JSON file");
  simulate->add_option("--family", sim.family)->check(CLI::IsMember({"gaussian", "binary"}));
  simulate->add_option("--strength", sim.strength)->check(CLI::IsMember({"weak", "strong"}));
  simulate->add_option("--n", sim.n)->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--coef-seed", sim.coef_seed, "Seed for the coefficient draw (default: --seed)");
  simulate->add_option("--out", sim.out)->required();
  simulate->add_option("--manifest", sim.manifest);

  auto* evaluate = app.add_subcommand("evaluate", "Run a replication study from a JSON config");
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitValidation;
  }

  if (threads > 0) set_thread_count(threads);
  try {
    if (*find) return cmd_find(common);
    if (*dance_cmd) return cmd_dance(common, dance_args);
    if (*estimate) return cmd_estimate(common, z, w, method);
    if (*simulate) return cmd_simulate(sim);
    if (*evaluate) return cmd_evaluate(config_path, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
  return kExitValidation;
}
