#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dance/dataset.hpp"
#include "dance/parallel.hpp"
#include "dance/tetrad.hpp"

namespace dance {

/// Three distinct candidate negative controls, stored sorted.
class DnctCandidate {
 public:
  DnctCandidate(std::string a, std::string b, std::string c);

  const std::array<std::string, 3>& ids() const noexcept { return ids_; }
  const std::string& operator[](std::size_t i) const { return ids_[i]; }
  bool contains(const std::string& id) const noexcept;

  friend auto operator<=>(const DnctCandidate&, const DnctCandidate&) = default;

 private:
  std::array<std::string, 3> ids_;
};

using Dnct = DnctCandidate;

struct DnctVerdict {
  DnctCandidate candidate;
  bool passed = false;
  /// Six results in the fixed order
  ///   ({X,Y},{Z,T}) ({X,Z},{Y,T}) ({Z,Y},{X,T})
  ///   ({X,Y},{Z,O}) ({X,Z},{Y,O}) ({Z,Y},{X,O})
  /// with (X,Y,Z) the sorted triple. Shorter when evaluation short-circuited.
  std::vector<TetradResult> sub_results;

  /// Largest |W| over the sub-tests (+inf if any was degenerate). The triple
  /// passes at level alpha iff this is below the two-sided normal quantile.
  double max_abs_w() const;
  /// Smallest p-value over the sub-tests.
  double min_p() const;
};

/// The six tetrads, in verdict order, for a candidate and (T, O).
std::array<TetradSpec, 6> dnct_tetrads(const DnctCandidate& candidate, const std::string& treatment,
                                       const std::string& outcome);

/// Runs all six tests (or stops at the first rejection when `short_circuit`).
DnctVerdict dnct_validate(const CovMatrix& cov, std::size_t n, const DnctCandidate& candidate,
                          const std::string& treatment, const std::string& outcome, double alpha,
                          const VanishingTetradTest& test = WishartTetradTest{},
                          bool short_circuit = false);

struct FindNcReport {
  std::string treatment;
  std::string outcome;
  double alpha_used = 0.0;
  std::size_t n = 0;
  std::vector<DnctCandidate> dncts;
  std::vector<DnctVerdict> all_verdicts;
};

struct FindNcOptions {
  std::optional<double> alpha;  // defaults to 1/n
  bool short_circuit = false;
  Exec exec = Exec::Parallel;
};

/// Brute-force search over every unordered triple of `candidates`. Verdicts
/// are ordered lexicographically by sorted triple regardless of worker count.
FindNcReport find_nc(const Dataset& data, const std::vector<std::string>& candidates,
                     const std::string& treatment, const std::string& outcome,
                     const FindNcOptions& options = {});

/// Same search against a precomputed covariance.
FindNcReport find_nc(const CovMatrix& cov, std::size_t n, const std::vector<std::string>& candidates,
                     const std::string& treatment, const std::string& outcome,
                     const FindNcOptions& options = {});

/// Sorted unordered triples of `ids` (ids are sorted first).
std::vector<DnctCandidate> all_triples(std::vector<std::string> ids);

}  // namespace dance
