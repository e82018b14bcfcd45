#include <doctest.h>

#include <cmath>

#include "dance/error.hpp"
#include "dance/sem.hpp"
#include "support.hpp"

using namespace dance;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GraphSpec small_graph() {
  GraphSpec g;
  g.nodes = {"U", "T", "O", "a", "b"};
  g.latent = "U";
  g.treatment = "T";
  g.outcome = "O";
  g.edges = {{"U", "T", 1.0, std::nullopt}, {"U", "O", 1.0, std::nullopt}, {"T", "O", 1.0, std::nullopt},
             {"U", "a", 1.0, std::nullopt}, {"U", "b", 1.0, std::nullopt}};
  return g;
}

}  // namespace

TEST_CASE("builtin graphs have the documented shape") {
  const GraphSpec simple = builtin_graph_spec("simple", Strength::Weak, Family::Gaussian);
  CHECK(simple.nodes.size() == 7);
  CHECK(simple.edges.size() == 8);
  CHECK(simple.candidates() == std::vector<std::string>{"Z1", "Z2", "Z3", "Z4"});
  const GraphSpec complex = builtin_graph_spec("complex", Strength::Weak, Family::Gaussian);
  CHECK(complex.nodes.size() == 10);
  CHECK(complex.edges.size() == 15);
  CHECK(kind_of([] { builtin_graph_spec("medium", Strength::Weak, Family::Gaussian); }) ==
        ErrorKind::InvalidArgument);
  CHECK(simple.laws.at("U").sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(simple.laws.at("Z1").sd == 1.0);
  const GraphSpec bin = builtin_graph_spec("simple", Strength::Weak, Family::Binary);
  CHECK(bin.laws.at("U").intercept == 0.0);
  CHECK(bin.laws.at("T").intercept == -1.0);
}

TEST_CASE("coefficient draws stay inside their ranges") {
  struct Case {
    Strength s;
    Family f;
    double lo, hi, nlo, nhi;
  };
  for (const Case& c : {Case{Strength::Weak, Family::Gaussian, 0.3, 0.7, 1.0, 2.0},
                        Case{Strength::Strong, Family::Gaussian, 0.6, 1.0, 2.0, 4.0},
                        Case{Strength::Weak, Family::Binary, 1.0, 2.0, 1.0, 2.0}}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SemModel m = builtin_graph("complex", c.s, c.f, seed);
      for (std::size_t e = 0; e < m.spec.edges.size(); ++e) {
        const bool nc = m.spec.edges[e].from != "U" && m.spec.edges[e].from != "T";
        const double x = m.coefficients[e];
        CHECK(x >= (nc ? c.nlo : c.lo));
        CHECK(x <= (nc ? c.nhi : c.hi));
      }
    }
  }
}

TEST_CASE("realize and generate are deterministic in their seeds") {
  const SemModel a = builtin_graph("simple", Strength::Weak, Family::Gaussian, 4);
  const SemModel b = builtin_graph("simple", Strength::Weak, Family::Gaussian, 4);
  const SemModel c = builtin_graph("simple", Strength::Weak, Family::Gaussian, 5);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.coefficients != c.coefficients);
  const Dataset da = generate(a, 100, 1);
  const Dataset db = generate(a, 100, 1);
  const Dataset dc = generate(a, 100, 2);
  CHECK((da.values().array() == db.values().array()).all());
  CHECK_FALSE((da.values().array() == dc.values().array()).all());
  CHECK(da.names() == std::vector<std::string>{"T", "O", "Z1", "Z2", "Z3", "Z4"});
  CHECK(kind_of([&] { generate(a, 0, 1); }) == ErrorKind::InvalidArgument);
  CHECK(generate(a, 1, 1).n() == 1);
}

TEST_CASE("population covariance by hand for the two-NC model") {
  const CovMatrix pop = population_covariance(testing::two_nc_model(0.5));
  CHECK(pop.at("T", "T") == doctest::Approx(0.36 * 2 + 1));
  CHECK(pop.at("T", "O") == doctest::Approx(1.7));
  CHECK(pop.at("W", "Z") == doctest::Approx(0.8));
  CHECK(pop.at("W", "O") == doctest::Approx(1.6));
  CHECK(pop.at("Z", "T") == doctest::Approx(0.6));
  CHECK(pop.at("O", "O") == doctest::Approx(0.25 * 1.72 + 0.49 * 2 + 2 * 0.5 * 0.7 * 1.2 + 1));
  CHECK_THROWS_AS(population_covariance(builtin_graph("simple", Strength::Weak, Family::Binary, 0)), Error);
}

TEST_CASE("Gaussian samples match the population covariance") {
  const SemModel m = builtin_graph("complex", Strength::Strong, Family::Gaussian, 3);
  const CovMatrix pop = population_covariance(m);
  const CovMatrix emp = covariance(generate(m, 200000, 8));
  REQUIRE(pop.names() == emp.names());
  const double scale = pop.entries().diagonal().maxCoeff();
  CHECK((pop.entries() - emp.entries()).cwiseAbs().maxCoeff() < 0.02 * scale);
}

TEST_CASE("binary samples follow the logistic model") {
  GraphSpec g = small_graph();
  g.family = Family::Binary;
  for (const auto& v : g.nodes) g.laws[v] = NodeLaw{0.0, 1.0, v == "U" ? 0.0 : -1.0};
  const SemModel m = realize(g, 0);
  const Dataset d = generate(m, 200000, 3);
  CHECK((d.values().array() == 0.0 || d.values().array() == 1.0).all());
  const double p_t = 0.5 * sigmoid(-1.0) + 0.5 * sigmoid(0.0);
  CHECK(d.column("T").mean() == doctest::Approx(p_t).epsilon(0.02));
}

TEST_CASE("true ATE") {
  SUBCASE("Gaussian is the treatment coefficient") {
    const SemModel m = builtin_graph("simple", Strength::Weak, Family::Gaussian, 2);
    CHECK(true_ate(m) == m.coefficient("T", "O"));
    CHECK(true_ate(testing::two_nc_model(-0.3)) == -0.3);
  }
  SUBCASE("binary by hand") {
    GraphSpec g = small_graph();
    g.family = Family::Binary;
    g.edges[1].coeff = 1.5;
    g.edges[2].coeff = 1.2;
    for (const auto& v : g.nodes) g.laws[v] = NodeLaw{0.0, 1.0, v == "U" ? 0.0 : -1.0};
    const SemModel m = realize(g, 0);
    auto mean_o = [](double t) { return 0.5 * sigmoid(-1.0 + 1.2 * t) + 0.5 * sigmoid(-1.0 + 1.5 + 1.2 * t); };
    CHECK(true_ate(m) == doctest::Approx(mean_o(1.0) - mean_o(0.0)).epsilon(1e-12));
  }
  SUBCASE("binary builtin lies strictly inside (0, 1)") {
    const SemModel m = builtin_graph("complex", Strength::Weak, Family::Binary, 1);
    const double ate = true_ate(m);
    CHECK(ate > 0.0);
    CHECK(ate < 1.0);
  }
}

TEST_CASE("non-latent treks") {
  const GraphSpec simple = builtin_graph_spec("simple", Strength::Weak, Family::Gaussian);
  CHECK(has_non_latent_trek(simple, "Z1", "Z2"));
  CHECK(has_non_latent_trek(simple, "Z2", "Z1"));
  CHECK_FALSE(has_non_latent_trek(simple, "Z1", "Z3"));
  const GraphSpec complex = builtin_graph_spec("complex", Strength::Weak, Family::Gaussian);
  CHECK(has_non_latent_trek(complex, "Z4", "Z5"));
  CHECK(has_non_latent_trek(complex, "Z3", "Z5"));
  CHECK_FALSE(has_non_latent_trek(complex, "Z2", "Z3"));
  CHECK_FALSE(has_non_latent_trek(complex, "Z5", "Z6"));

  GraphSpec g = small_graph();
  g.nodes.push_back("c");
  g.edges.push_back({"U", "c", 1.0, std::nullopt});
  g.edges.push_back({"a", "c", 1.0, std::nullopt});
  g.edges.push_back({"b", "c", 1.0, std::nullopt});
  CHECK_FALSE(has_non_latent_trek(g, "a", "b"));  // collider only
  CHECK(has_non_latent_trek(g, "a", "c"));
  CHECK(ground_truth_dncts(g).empty());
}

TEST_CASE("graph validation") {
  auto bad = [](auto&& edit) {
    GraphSpec g = small_graph();
    edit(g);
    return kind_of([&] { validate_graph(g); });
  };
  CHECK_NOTHROW(validate_graph(small_graph()));
  CHECK(bad([](GraphSpec& g) { g.nodes.push_back("a"); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.latent = "Q"; }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.push_back({"a", "U", 1.0, std::nullopt}); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.push_back({"T", "a", 1.0, std::nullopt}); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.push_back({"a", "O", 1.0, std::nullopt}); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.pop_back(); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.push_back({"U", "a", 1.0, std::nullopt}); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges[0].dist = UniformDist{0, 1}; }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.edges.push_back({"a", "a", 1.0, std::nullopt}); }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) {
          g.edges.push_back({"a", "b", 1.0, std::nullopt});
          g.edges.push_back({"b", "a", 1.0, std::nullopt});
        }) == ErrorKind::InvalidGraph);
  CHECK(bad([](GraphSpec& g) { g.laws["a"] = NodeLaw{0.0, -1.0, 0.0}; }) == ErrorKind::InvalidGraph);
}

TEST_CASE("family and strength names") {
  CHECK(parse_family("binary") == Family::Binary);
  CHECK(parse_strength("strong") == Strength::Strong);
  CHECK(to_string(Family::Gaussian) == "gaussian");
  CHECK_THROWS_AS(parse_strength("medium"), Error);
}
