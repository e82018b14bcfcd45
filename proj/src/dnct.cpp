#include "dance/dnct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "dance/error.hpp"

namespace dance {

DnctCandidate::DnctCandidate(std::string a, std::string b, std::string c)
    : ids_{std::move(a), std::move(b), std::move(c)} {
  std::sort(ids_.begin(), ids_.end());
  if (ids_[0] == ids_[1] || ids_[1] == ids_[2])
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("triple ({}, {}, {}) has repeated members", ids_[0], ids_[1], ids_[2]));
}

bool DnctCandidate::contains(const std::string& id) const noexcept {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

double DnctVerdict::max_abs_w() const {
  double m = 0.0;
  for (const auto& r : sub_results) {
    if (r.degenerate) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::fabs(r.w_stat));
  }
  return m;
}

double DnctVerdict::min_p() const {
  double m = 1.0;
  for (const auto& r : sub_results) m = std::min(m, r.p_value);
  return m;
}

std::array<TetradSpec, 6> dnct_tetrads(const DnctCandidate& c, const std::string& t,
                                       const std::string& o) {
  const auto& x = c[0];
  const auto& y = c[1];
  const auto& z = c[2];
  return {{
      {{x, y}, {z, t}},
      {{x, z}, {y, t}},
      {{z, y}, {x, t}},
      {{x, y}, {z, o}},
      {{x, z}, {y, o}},
      {{z, y}, {x, o}},
  }};
}

namespace {

void check_roles(const DnctCandidate& c, const std::string& t, const std::string& o) {
  if (t == o) throw Error(ErrorKind::InvalidArgument, "treatment and outcome must differ");
  if (c.contains(t) || c.contains(o))
    throw Error(ErrorKind::InvalidArgument, "candidate triple may not contain treatment or outcome");
}

}  // namespace

DnctVerdict dnct_validate(const CovMatrix& cov, std::size_t n, const DnctCandidate& candidate,
                          const std::string& treatment, const std::string& outcome, double alpha,
                          const VanishingTetradTest& test, bool short_circuit) {
  check_roles(candidate, treatment, outcome);
  DnctVerdict v{candidate, true, {}};
  v.sub_results.reserve(6);
  for (const auto& spec : dnct_tetrads(candidate, treatment, outcome)) {
    v.sub_results.push_back(test(cov, spec, n, alpha));
    if (!v.sub_results.back().vanishes) {
      v.passed = false;
      if (short_circuit) break;
    }
  }
  return v;
}

std::vector<DnctCandidate> all_triples(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::vector<DnctCandidate> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      for (std::size_t k = j + 1; k < ids.size(); ++k) out.emplace_back(ids[i], ids[j], ids[k]);
  return out;
}

FindNcReport find_nc(const CovMatrix& cov, std::size_t n, const std::vector<std::string>& candidates,
                     const std::string& treatment, const std::string& outcome,
                     const FindNcOptions& options) {
  cov.index_of(treatment);
  cov.index_of(outcome);
  if (treatment == outcome) throw Error(ErrorKind::InvalidArgument, "treatment and outcome must differ");
  std::set<std::string> unique(candidates.begin(), candidates.end());
  if (unique.size() != candidates.size())
    throw Error(ErrorKind::InvalidArgument, "candidate list has duplicates");
  for (const auto& c : candidates) {
    cov.index_of(c);
    if (c == treatment || c == outcome)
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("candidate '{}' is the treatment or outcome", c));
  }
  if (candidates.size() < 3)
    throw Error(ErrorKind::TooFewCandidates,
                fmt::format("need at least 3 candidates, got {}", candidates.size()));

  FindNcReport report;
  report.treatment = treatment;
  report.outcome = outcome;
  report.n = n;
  report.alpha_used = options.alpha.value_or(1.0 / static_cast<double>(n));

  const auto triples = all_triples(candidates);
  report.all_verdicts.resize(triples.size(), DnctVerdict{triples.front(), false, {}});
  const WishartTetradTest wishart;
  const auto m = static_cast<std::ptrdiff_t>(triples.size());
  auto eval = [&](std::ptrdiff_t i) {
    report.all_verdicts[static_cast<std::size_t>(i)] =
        dnct_validate(cov, n, triples[static_cast<std::size_t>(i)], treatment, outcome,
                      report.alpha_used, wishart, options.short_circuit);
  };
  if (options.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < m; ++i) eval(i);
  } else {
    for (std::ptrdiff_t i = 0; i < m; ++i) eval(i);
  }
  for (const auto& v : report.all_verdicts)
    if (v.passed) report.dncts.push_back(v.candidate);
  return report;
}

FindNcReport find_nc(const Dataset& data, const std::vector<std::string>& candidates,
                     const std::string& treatment, const std::string& outcome,
                     const FindNcOptions& options) {
  for (const auto& c : candidates) data.index_of(c);
  data.index_of(treatment);
  data.index_of(outcome);
  return find_nc(covariance(data, options.exec), data.n(), candidates, treatment, outcome, options);
}

}  // namespace dance
