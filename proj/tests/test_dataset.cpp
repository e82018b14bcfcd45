#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "dance/dataset.hpp"
#include "dance/error.hpp"
#include "dance/sem.hpp"
#include "support.hpp"

using namespace dance;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const auto path = fs::temp_directory_path() / ("dance_test_" + name);
  std::ofstream(path) << content;
  return path;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

const std::vector<std::vector<double>> kTable = {
    {1, 2, 3, 4}, {2, 1, 0, 5}, {3, 5, 2, 2}, {4, 3, 7, 1}, {5, 8, 1, 0}, {6, 4, 4, 3}};

Dataset table_dataset() {
  Eigen::MatrixXd m(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = kTable[i][j];
  return Dataset({"v1", "v2", "v3", "v4"}, m);
}

}  // namespace

TEST_CASE("load_csv reads a minimal file") {
  const auto path = write_temp("min.csv", "a,b\n1,2\n3,4\n");
  const Dataset d = load_csv(path);
  CHECK(d.n() == 2);
  CHECK(d.p() == 2);
  CHECK(d.values()(1, 0) == 3.0);
  CHECK(d.names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load_csv rejection contract") {
  CHECK(kind_of([] { load_csv(write_temp("na.csv", "a,b\n1,NA\n3,4\n")); }) == ErrorKind::MissingValue);
  CHECK(kind_of([] { load_csv(write_temp("empty.csv", "a,b\n1,\n3,4\n")); }) == ErrorKind::MissingValue);
  CHECK(kind_of([] { load_csv(write_temp("short.csv", "a,b\n1\n3,4\n")); }) == ErrorKind::MissingValue);
  CHECK(kind_of([] { load_csv(write_temp("dup.csv", "a,a\n1,2\n3,4\n")); }) == ErrorKind::DuplicateHeader);
  CHECK(kind_of([] { load_csv(write_temp("one.csv", "a,b\n1,2\n")); }) == ErrorKind::TooFewRows);
  CHECK(kind_of([] { load_csv("/nonexistent/dance.csv"); }) == ErrorKind::Io);
}

TEST_CASE("load_csv reports the offending cell") {
  try {
    load_csv(write_temp("loc.csv", "a,b\n1,2\n3,x\n"));
    FAIL("expected MissingValue");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
}

TEST_CASE("write_csv then load_csv reproduces values exactly") {
  const SemModel m = builtin_graph("simple", Strength::Weak, Family::Gaussian, 3);
  const Dataset d = generate(m, 50, 11);
  const auto path = fs::temp_directory_path() / "dance_test_roundtrip.csv";
  write_csv(d, path);
  const Dataset back = load_csv(path);
  CHECK(back.names() == d.names());
  CHECK((back.values().array() == d.values().array()).all());
}

TEST_CASE("covariance of trivial columns") {
  SUBCASE("identical columns") {
    Eigen::MatrixXd m(3, 2);
    m << 1, 1, 2, 2, 3, 3;
    const CovMatrix c = covariance(Dataset({"x", "y"}, m));
    CHECK(c(0, 0) == doctest::Approx(1.0));
    CHECK(c(0, 1) == doctest::Approx(1.0));
    CHECK(c(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("anticorrelated") {
    Eigen::MatrixXd m(3, 2);
    m << 1, 3, 2, 2, 3, 1;
    const CovMatrix c = covariance(Dataset({"x", "y"}, m));
    CHECK(c(0, 1) == doctest::Approx(-1.0));
    CHECK(c.at("y", "x") == doctest::Approx(-1.0));
  }
}

TEST_CASE("covariance matches the two-pass oracle on a fixed table") {
  const CovMatrix c = covariance(table_dataset());
  const auto oracle = testing::brute_covariance(kTable);
  // Frozen from an independent numpy computation.
  const double frozen[4][4] = {{3.5, 2.9, 1.3, -2.1},
                               {2.9, 6.166666666666667, -0.833333333333333, -3.9},
                               {1.3, -0.833333333333333, 6.166666666666666, -1.5},
                               {-2.1, -3.9, -1.5, 3.5}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(c(i, j) == doctest::Approx(oracle[i][j]).epsilon(1e-14));
      CHECK(c(i, j) == doctest::Approx(frozen[i][j]).epsilon(1e-13));
      CHECK(c(i, j) == c(j, i));
    }
}

TEST_CASE("covariance is invariant under row permutation") {
  const SemModel m = builtin_graph("complex", Strength::Weak, Family::Gaussian, 5);
  const Dataset d = generate(m, 400, 9);
  std::vector<std::size_t> perm(d.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const CovMatrix a = covariance(d);
    const CovMatrix b = covariance(d.select_rows(perm));
    CHECK((a.entries() - b.entries()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("covariance diagonal is non-negative and zero for constant columns") {
  Eigen::MatrixXd m(4, 2);
  m << 1, 5, 2, 5, 3, 5, 4, 5;
  const CovMatrix c = covariance(Dataset({"x", "k"}, m));
  CHECK(c(1, 1) == 0.0);
  CHECK(c(0, 0) > 0.0);
}

TEST_CASE("sub_determinant") {
  SUBCASE("identity") {
    const CovMatrix id({"a", "b", "c"}, Eigen::MatrixXd::Identity(3, 3));
    CHECK(sub_determinant(id, "a", "b", "a", "b") == 1.0);
  }
  SUBCASE("rank one") {
    Eigen::VectorXd v(4);
    v << 1.0, -2.0, 0.5, 3.0;
    const CovMatrix r1({"a", "b", "c", "d"}, v * v.transpose());
    CHECK(sub_determinant(r1, "a", "b", "c", "d") == doctest::Approx(0.0));
    CHECK(sub_determinant(r1, "a", "c", "b", "d") == doctest::Approx(0.0));
  }
  SUBCASE("entries 1..16") {
    Eigen::MatrixXd m(4, 4);
    for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = i + 1;
    const CovMatrix c({"v1", "v2", "v3", "v4"}, m);
    // det [[3, 4], [7, 8]]
    CHECK(sub_determinant(c, "v1", "v2", "v3", "v4") == testing::cofactor_det({{3, 4}, {7, 8}}));
    CHECK(sub_determinant(c, "v1", "v2", "v3", "v4") == -4.0);
  }
  SUBCASE("row swap flips sign") {
    const CovMatrix c = covariance(table_dataset());
    CHECK(sub_determinant(c, "v1", "v2", "v3", "v4") == -sub_determinant(c, "v2", "v1", "v3", "v4"));
  }
  SUBCASE("unknown variable") {
    const CovMatrix id({"a", "b"}, Eigen::MatrixXd::Identity(2, 2));
    CHECK(kind_of([&] { sub_determinant(id, "a", "b", "a", "zz"); }) == ErrorKind::UnknownVariable);
  }
}

TEST_CASE("disjoint tetrads vanish for a single latent parent at large n") {
  // U -> {a, b, T, O} with independent noise: the population tetrad is exactly 0.
  // The Monte Carlo SE of d_hat is estimated from 20 independent replications.
  GraphSpec g;
  g.nodes = {"U", "T", "O", "a", "b"};
  g.latent = "U";
  g.treatment = "T";
  g.outcome = "O";
  g.edges = {{"U", "T", 0.9, std::nullopt}, {"U", "O", 0.4, std::nullopt},
             {"U", "a", 0.7, std::nullopt}, {"U", "b", 1.1, std::nullopt}};
  const SemModel m = realize(g, 0);
  std::vector<double> dets;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const CovMatrix c = covariance(generate(m, 100000, 100 + s));
    dets.push_back(sub_determinant(c, "a", "b", "T", "O"));
  }
  double mean = 0.0;
  for (double d : dets) mean += d;
  mean /= dets.size();
  double ss = 0.0;
  for (double d : dets) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (dets.size() - 1));
  CHECK(std::fabs(mean) <= 3.0 * sd / std::sqrt(dets.size()));
}
