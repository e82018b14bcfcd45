#include "dance/study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "dance/aggregation.hpp"
#include "dance/error.hpp"
#include "dance/estimation.hpp"
#include "dance/rng.hpp"

namespace dance {

std::string to_string(StudyMethod m) {
  switch (m) {
    case StudyMethod::Naive: return "naive";
    case StudyMethod::Random: return "random";
    case StudyMethod::Dance: return "dance";
  }
  return "unknown";
}

StudyMethod parse_study_method(const std::string& s) {
  if (s == "naive") return StudyMethod::Naive;
  if (s == "random") return StudyMethod::Random;
  if (s == "dance") return StudyMethod::Dance;
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown study method '{}'", s));
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  const double lo = std::log10(1e-6);
  const double hi = std::log10(0.5);
  for (int i = 0; i < 25; ++i) grid.push_back(std::pow(10.0, lo + (hi - lo) * i / 24.0));
  return grid;
}

void validate_study_config(const StudyConfig& c) {
  if (c.replications < 1) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
  if (c.sample_sizes.empty()) throw Error(ErrorKind::InvalidArgument, "no sample sizes");
  for (auto n : c.sample_sizes)
    if (n < 10) throw Error(ErrorKind::InvalidArgument, fmt::format("sample size {} < 10", n));
  for (double a : c.alpha_grid)
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("alpha {} outside (0,1)", a));
  if (c.methods.empty()) throw Error(ErrorKind::InvalidArgument, "no methods selected");
}

double auc_mann_whitney(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) return std::numeric_limits<double>::quiet_NaN();
  // Rank-based: sort all scores, average ranks over ties.
  std::vector<std::pair<double, int>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

struct MethodOutcome {
  bool ok = false;
  double delta = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::string reason;
};

struct ReplicationOutcome {
  std::vector<MethodOutcome> methods;  // parallel to config.methods
  std::vector<double> min_p;           // per triple, all_triples order
  std::vector<double> max_abs_w;
  std::vector<bool> passed_default;    // at alpha = 1/n
};

MethodOutcome from_estimate(const AteEstimate& e) {
  return {true, e.delta_hat, e.se.value_or(0.0), e.ci_low.value_or(e.delta_hat),
          e.ci_high.value_or(e.delta_hat), {}};
}

MethodOutcome run_random(const Dataset& data, const GraphSpec& g,
                         const std::vector<DnctCandidate>& triples, RandomMode mode,
                         std::uint64_t seed) {
  const auto cands = g.candidates();
  Rng rng(seed);
  auto draw = [&]() -> NcPair {
    if (mode == RandomMode::OrderedPairs) {
      std::uniform_int_distribution<std::size_t> pick(0, cands.size() * (cands.size() - 1) - 1);
      const std::size_t k = pick(rng);
      const std::size_t zi = k / (cands.size() - 1);
      std::size_t wi = k % (cands.size() - 1);
      if (wi >= zi) ++wi;
      return {cands[zi], cands[wi]};
    }
    std::uniform_int_distribution<std::size_t> pick_t(0, triples.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_p(0, 5);
    const auto& tr = triples[pick_t(rng)];
    const std::size_t k = pick_p(rng);
    const std::size_t zi = k / 2;
    const std::size_t wi = (zi + 1 + k % 2) % 3;
    return {tr[zi], tr[wi]};
  };
  std::string reason;
  // One redraw on failure, then the replication is recorded as failed.
  for (int attempt = 0; attempt < 2; ++attempt) {
    const NcPair pair = draw();
    try {
      return from_estimate(gmm_linear_ate(data, pair, g.treatment, g.outcome));
    } catch (const Error& e) {
      reason = e.what();
    }
  }
  MethodOutcome out;
  out.reason = reason;
  return out;
}

ReplicationOutcome run_replication(const StudyConfig& config, const SemModel& model,
                                   const std::vector<DnctCandidate>& triples, std::size_t n, int r) {
  const GraphSpec& g = model.spec;
  const std::uint64_t data_seed =
      derive_seed(config.master_seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(n)});
  const Dataset data = generate(model, n, data_seed);
  ReplicationOutcome out;

  const auto cands = g.candidates();
  FindNcOptions opts;
  opts.exec = Exec::Serial;
  std::optional<FindNcReport> report;
  try {
    report = find_nc(data, cands, g.treatment, g.outcome, opts);
  } catch (const Error&) {
    // Recorded per method below; ROC treats the replication as all-degenerate.
  }
  if (report) {
    for (const auto& v : report->all_verdicts) {
      out.min_p.push_back(v.min_p());
      out.max_abs_w.push_back(v.max_abs_w());
      out.passed_default.push_back(v.passed);
    }
  } else {
    out.min_p.assign(triples.size(), 0.0);
    out.max_abs_w.assign(triples.size(), std::numeric_limits<double>::infinity());
    out.passed_default.assign(triples.size(), false);
  }

  for (auto m : config.methods) {
    MethodOutcome mo;
    try {
      switch (m) {
        case StudyMethod::Naive:
          mo = from_estimate(naive_ols_ate(data, g.treatment, g.outcome));
          break;
        case StudyMethod::Random:
          mo = run_random(data, g, triples, config.random_mode,
                          derive_seed(config.master_seed, {static_cast<std::uint64_t>(r),
                                                           static_cast<std::uint64_t>(n), 0x7A4DULL}));
          break;
        case StudyMethod::Dance: {
          if (!report) throw Error(ErrorKind::DegenerateVariance, "FindNC failed");
          if (report->dncts.empty()) {
            mo.reason = "no DNCTs found";
            break;
          }
          WeightedOptions wo;
          wo.exec = Exec::Serial;
          const auto agg = weighted_estimate(data, enumerate_pairs(report->dncts), g.treatment,
                                             g.outcome, {}, wo);
          mo = {true, agg.delta_hat, agg.se, agg.ci_low, agg.ci_high, {}};
          break;
        }
      }
    } catch (const Error& e) {
      mo.ok = false;
      mo.reason = e.what();
    }
    out.methods.push_back(std::move(mo));
  }
  return out;
}

SemModel study_model(const StudyConfig& config) {
  const std::uint64_t coef_seed =
      config.coefficient_seed.value_or(derive_seed(config.master_seed, {0xC0EF5EEDULL}));
  if (config.custom_graph) return realize(*config.custom_graph, coef_seed);
  return builtin_graph(config.graph, config.strength, config.family, coef_seed);
}

StudyResult run_study_impl(const StudyConfig& config, bool with_methods) {
  validate_study_config(config);
  StudyConfig cfg = config;
  if (!with_methods) cfg.methods.clear();
  if (cfg.alpha_grid.empty()) cfg.alpha_grid = default_alpha_grid();

  StudyResult result;
  result.model = study_model(cfg);
  result.true_delta = true_ate(result.model);
  result.truth = ground_truth_dncts(result.model.spec);
  const auto triples = all_triples(result.model.spec.candidates());
  std::vector<bool> is_true(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i)
    is_true[i] = std::find(result.truth.begin(), result.truth.end(), triples[i]) != result.truth.end();

  for (const std::size_t n : cfg.sample_sizes) {
    std::vector<ReplicationOutcome> reps(static_cast<std::size_t>(cfg.replications));
    auto run = [&](std::ptrdiff_t r) {
      reps[static_cast<std::size_t>(r)] = run_replication(cfg, result.model, triples, n, static_cast<int>(r));
    };
    const auto rc = static_cast<std::ptrdiff_t>(cfg.replications);
    if (cfg.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t r = 0; r < rc; ++r) run(r);
    } else {
      for (std::ptrdiff_t r = 0; r < rc; ++r) run(r);
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      MethodMetrics mm;
      mm.method = cfg.methods[mi];
      mm.n = n;
      std::vector<double> deltas;
      double se_sum = 0.0;
      int covered = 0;
      for (int r = 0; r < cfg.replications; ++r) {
        const auto& o = reps[static_cast<std::size_t>(r)].methods[mi];
        if (!o.ok) {
          ++mm.failures;
          result.failures.push_back({mm.method, n, r, o.reason});
          continue;
        }
        deltas.push_back(o.delta);
        se_sum += o.se;
        if (o.ci_low <= result.true_delta && result.true_delta <= o.ci_high) ++covered;
      }
      mm.estimates = static_cast<int>(deltas.size());
      if (!deltas.empty()) {
        const double k = static_cast<double>(deltas.size());
        const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / k;
        mm.bias = mean - result.true_delta;
        mm.proportion_bias_pct = 100.0 * mm.bias / result.true_delta;
        double ss = 0.0;
        for (double d : deltas) ss += (d - mean) * (d - mean);
        mm.mc_se = deltas.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        mm.mean_estimated_se = se_sum / k;
        mm.coverage_95 = covered / k;
      } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        mm.bias = mm.proportion_bias_pct = mm.mc_se = mm.mean_estimated_se = mm.coverage_95 = nan;
      }
      result.metrics.push_back(mm);
    }

    if (!cfg.compute_roc) continue;
    std::vector<double> alphas = cfg.alpha_grid;
    const double alpha_n = 1.0 / static_cast<double>(n);
    alphas.push_back(alpha_n);
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

    std::size_t positives = 0, negatives = 0;
    for (bool t : is_true) (t ? positives : negatives) += static_cast<std::size_t>(cfg.replications);
    for (double a : alphas) {
      std::size_t tp = 0, fp = 0;
      for (const auto& rep : reps)
        for (std::size_t i = 0; i < triples.size(); ++i)
          if (rep.min_p[i] > a) (is_true[i] ? tp : fp) += 1;
      RocPoint pt;
      pt.n = n;
      pt.alpha = a;
      pt.tpr = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
      pt.fpr = negatives ? static_cast<double>(fp) / static_cast<double>(negatives) : 0.0;
      result.roc.push_back(pt);
    }

    RecoveryStats rs;
    rs.n = n;
    rs.alpha = alpha_n;
    std::vector<double> pos_scores, neg_scores;
    int exact = 0;
    std::size_t false_pass = 0, missed = 0;
    for (const auto& rep : reps) {
      bool match = true;
      for (std::size_t i = 0; i < triples.size(); ++i) {
        const bool pass = rep.passed_default[i];
        if (pass != is_true[i]) match = false;
        if (pass && !is_true[i]) ++false_pass;
        if (!pass && is_true[i]) ++missed;
        (is_true[i] ? pos_scores : neg_scores).push_back(-rep.max_abs_w[i]);
      }
      exact += match ? 1 : 0;
    }
    rs.exact_recovery_rate = static_cast<double>(exact) / cfg.replications;
    rs.false_dnct_rate = negatives ? static_cast<double>(false_pass) / static_cast<double>(negatives) : 0.0;
    rs.missed_dnct_rate = positives ? static_cast<double>(missed) / static_cast<double>(positives) : 0.0;
    rs.auc = auc_mann_whitney(pos_scores, neg_scores);
    result.recovery.push_back(rs);
  }
  return result;
}

}  // namespace

StudyResult run_study(const StudyConfig& config) { return run_study_impl(config, true); }

std::vector<RocPoint> roc_curve(const StudyConfig& config) {
  StudyConfig c = config;
  c.compute_roc = true;
  return run_study_impl(c, false).roc;
}

std::string metrics_csv(const StudyResult& r) {
  std::string out =
      "method,n,estimates,failures,true_delta,bias,proportion_bias_pct,mc_se,mean_estimated_se,coverage_95\n";
  for (const auto& m : r.metrics)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", to_string(m.method), m.n, m.estimates,
                       m.failures, r.true_delta, m.bias, m.proportion_bias_pct, m.mc_se,
                       m.mean_estimated_se, m.coverage_95);
  return out;
}

std::string roc_csv(const StudyResult& r) {
  std::string out = "n,alpha,tpr,fpr\n";
  for (const auto& p : r.roc) out += fmt::format("{},{},{},{}\n", p.n, p.alpha, p.tpr, p.fpr);
  return out;
}

std::string recovery_csv(const StudyResult& r) {
  std::string out = "n,alpha,exact_recovery_rate,false_dnct_rate,missed_dnct_rate,auc\n";
  for (const auto& s : r.recovery)
    out += fmt::format("{},{},{},{},{},{}\n", s.n, s.alpha, s.exact_recovery_rate, s.false_dnct_rate,
                       s.missed_dnct_rate, s.auc);
  return out;
}

std::string failures_csv(const StudyResult& r) {
  std::string out = "method,n,replication,reason\n";
  for (const auto& f : r.failures) {
    std::string reason = f.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out += fmt::format("{},{},{},{}\n", to_string(f.method), f.n, f.replication, reason);
  }
  return out;
}

}  // namespace dance
