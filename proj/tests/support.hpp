#pragma once

// Test-only oracles and fixtures. Nothing here calls into the code paths it
// is used to check.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dance/sem.hpp"

namespace dance::testing {

/// Two-pass covariance straight from the definition, on row-major data.
inline std::vector<std::vector<double>> brute_covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t p = rows.front().size();
  std::vector<double> mean(p, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < p; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<std::vector<double>> c(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (const auto& r : rows) s += (r[i] - mean[i]) * (r[j] - mean[j]);
      c[i][j] = s / static_cast<double>(n - 1);
    }
  return c;
}

/// Laplace cofactor expansion along the first row.
inline double cofactor_det(const std::vector<std::vector<double>>& m) {
  const std::size_t k = m.size();
  if (k == 1) return m[0][0];
  if (k == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  double det = 0.0;
  for (std::size_t col = 0; col < k; ++col) {
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < k; ++r) {
      std::vector<double> row;
      for (std::size_t c = 0; c < k; ++c)
        if (c != col) row.push_back(m[r][c]);
      minor.push_back(std::move(row));
    }
    det += (col % 2 ? -1.0 : 1.0) * m[0][col] * cofactor_det(minor);
  }
  return det;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Single latent U -> {W, Z, T, O}, T -> O, all Gaussian (the two-NC model).
inline SemModel two_nc_model(double delta = 0.5) {
  GraphSpec g;
  g.nodes = {"U", "T", "O", "W", "Z"};
  g.latent = "U";
  g.treatment = "T";
  g.outcome = "O";
  g.edges = {{"U", "T", 0.6, std::nullopt}, {"U", "O", 0.7, std::nullopt},
             {"T", "O", delta, std::nullopt}, {"U", "W", 0.8, std::nullopt},
             {"U", "Z", 0.5, std::nullopt}};
  for (const auto& v : g.nodes) g.laws[v] = NodeLaw{0.0, v == "U" ? std::sqrt(2.0) : 1.0, 0.0};
  return realize(g, 0);
}

/// Same latent structure with `k` candidates and no candidate-to-candidate edges.
inline SemModel star_model(int k, double delta = 0.5, std::uint64_t seed = 1) {
  GraphSpec g;
  g.nodes = {"U", "T", "O"};
  g.latent = "U";
  g.treatment = "T";
  g.outcome = "O";
  g.edges = {{"U", "T", std::nullopt, UniformDist{0.3, 0.7}},
             {"U", "O", std::nullopt, UniformDist{0.3, 0.7}},
             {"T", "O", delta, std::nullopt}};
  for (int i = 1; i <= k; ++i) {
    const std::string z = "Z" + std::to_string(i);
    g.nodes.push_back(z);
    g.edges.push_back({"U", z, std::nullopt, UniformDist{0.3, 0.7}});
  }
  for (const auto& v : g.nodes) g.laws[v] = NodeLaw{0.0, v == "U" ? std::sqrt(2.0) : 1.0, 0.0};
  return realize(g, seed);
}

}  // namespace dance::testing
