#include "dance/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "dance/error.hpp"

namespace dance {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::size_t find_name(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw Error(ErrorKind::UnknownVariable, fmt::format("'{}'", name));
}

}  // namespace

Dataset::Dataset(std::vector<std::string> names, Eigen::MatrixXd values, bool require_two_rows)
    : names_(std::move(names)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(names_.size()) != values_.cols())
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("{} names for {} columns", names_.size(), values_.cols()));
  std::unordered_set<std::string> seen;
  for (const auto& nm : names_) {
    if (nm.empty()) throw Error(ErrorKind::InvalidArgument, "empty variable name");
    if (!seen.insert(nm).second) throw Error(ErrorKind::DuplicateHeader, fmt::format("'{}'", nm));
  }
  if (require_two_rows && values_.rows() < 2)
    throw Error(ErrorKind::TooFewRows, fmt::format("need n >= 2, got {}", values_.rows()));
  for (Eigen::Index j = 0; j < values_.cols(); ++j)
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
      if (!std::isfinite(values_(i, j)))
        throw Error(ErrorKind::MissingValue,
                    fmt::format("non-finite value at row {}, column '{}'", i + 1, names_[j]));
}

std::size_t Dataset::index_of(const std::string& name) const { return find_name(names_, name); }

bool Dataset::contains(const std::string& name) const noexcept {
  for (const auto& nm : names_)
    if (nm == name) return true;
  return false;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
  return Dataset(names_, std::move(out), false);
}

CovMatrix::CovMatrix(std::vector<std::string> names, Eigen::MatrixXd entries)
    : names_(std::move(names)), entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() ||
      entries_.rows() != static_cast<Eigen::Index>(names_.size()))
    throw Error(ErrorKind::InvalidArgument, "covariance shape does not match variable index");
}

std::size_t CovMatrix::index_of(const std::string& name) const { return find_name(names_, name); }

Eigen::MatrixXd CovMatrix::block(std::span<const std::size_t> ids) const {
  const auto k = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = entries_(static_cast<Eigen::Index>(ids[i]), static_cast<Eigen::Index>(ids[j]));
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::TooFewRows, "empty file");
  std::vector<std::string> names;
  for (auto h : split_commas(line)) names.emplace_back(h);
  {
    std::unordered_set<std::string> seen;
    for (const auto& nm : names) {
      if (nm.empty()) throw Error(ErrorKind::InvalidArgument, "empty header name");
      if (!seen.insert(nm).second) throw Error(ErrorKind::DuplicateHeader, fmt::format("'{}'", nm));
    }
  }

  std::vector<double> cells;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_commas(line);
    if (fields.size() != names.size())
      throw Error(ErrorKind::MissingValue,
                  fmt::format("line {}: expected {} fields, got {}", line_no, names.size(),
                              fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      if (!parse_number(fields[j], v))
        throw Error(ErrorKind::MissingValue,
                    fmt::format("line {}, column '{}': '{}'", line_no, names[j], fields[j]));
      cells.push_back(v);
    }
    ++rows;
  }
  if (rows < 2) throw Error(ErrorKind::TooFewRows, fmt::format("need n >= 2, got {}", rows));

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * names.size() + j];
  return Dataset(std::move(names), std::move(values));
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  const auto& names = data.names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  const auto& v = data.values();
  std::string row;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (j) row += ',';
      row += fmt::format("{}", v(i, j));
    }
    out << row << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

CovMatrix covariance(const Dataset& data, Exec exec) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p());
  if (n < 2) throw Error(ErrorKind::TooFewRows, "covariance needs n >= 2");

  const Eigen::MatrixXd& x = data.values();
  Eigen::MatrixXd centered(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) sum += x(k, j);
    const double mean = sum / static_cast<double>(n);
    for (Eigen::Index k = 0; k < n; ++k) centered(k, j) = x(k, j) - mean;
  }

  // Upper-triangle pairs flattened so both paths evaluate each entry with the
  // same summation order.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(p * (p + 1) / 2));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) pairs.emplace_back(i, j);

  Eigen::MatrixXd cov(p, p);
  const double denom = static_cast<double>(n - 1);
  auto entry = [&](std::size_t t) {
    const auto [i, j] = pairs[t];
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) s += centered(k, i) * centered(k, j);
    cov(i, j) = s / denom;
    cov(j, i) = cov(i, j);
  };

  const auto m = static_cast<std::ptrdiff_t>(pairs.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < m; ++t) entry(static_cast<std::size_t>(t));
  } else {
    for (std::ptrdiff_t t = 0; t < m; ++t) entry(static_cast<std::size_t>(t));
  }
  return CovMatrix(data.names(), std::move(cov));
}

double sub_determinant(const CovMatrix& cov, std::size_t r1, std::size_t r2, std::size_t c1,
                       std::size_t c2) {
  return cov(r1, c1) * cov(r2, c2) - cov(r1, c2) * cov(r2, c1);
}

double sub_determinant(const CovMatrix& cov, const std::string& r1, const std::string& r2,
                       const std::string& c1, const std::string& c2) {
  return sub_determinant(cov, cov.index_of(r1), cov.index_of(r2), cov.index_of(c1),
                         cov.index_of(c2));
}

}  // namespace dance
