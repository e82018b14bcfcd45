#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dance/parallel.hpp"

namespace dance {

/// Named numeric columns, n rows by p columns. Read-only after construction.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DuplicateHeader / InvalidArgument on bad names, TooFewRows if n < 2
  /// and `require_two_rows` is set, MissingValue on non-finite cells.
  Dataset(std::vector<std::string> names, Eigen::MatrixXd values, bool require_two_rows = true);

  std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(values_.cols()); }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  /// Column index for `name`; throws UnknownVariable.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const noexcept;

  Eigen::Ref<const Eigen::VectorXd> column(const std::string& name) const {
    return values_.col(static_cast<Eigen::Index>(index_of(name)));
  }

  /// Rows picked by index (duplicates allowed); used for bootstrap resamples.
  Dataset select_rows(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd values_;
};

/// Sample covariance matrix (n - 1 denominator) with its variable index.
class CovMatrix {
 public:
  CovMatrix(std::vector<std::string> names, Eigen::MatrixXd entries);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return names_.size(); }

  std::size_t index_of(const std::string& name) const;
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double at(const std::string& a, const std::string& b) const {
    return (*this)(index_of(a), index_of(b));
  }

  /// Square sub-block over `ids` (the same ordered set for rows and columns).
  Eigen::MatrixXd block(std::span<const std::size_t> ids) const;

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd entries_;
};

Dataset load_csv(const std::filesystem::path& path);
void write_csv(const Dataset& data, const std::filesystem::path& path);

CovMatrix covariance(const Dataset& data, Exec exec = Exec::Parallel);

/// cov(r1,c1)*cov(r2,c2) - cov(r1,c2)*cov(r2,c1)
double sub_determinant(const CovMatrix& cov, const std::string& r1, const std::string& r2,
                       const std::string& c1, const std::string& c2);
double sub_determinant(const CovMatrix& cov, std::size_t r1, std::size_t r2, std::size_t c1,
                       std::size_t c2);

}  // namespace dance
