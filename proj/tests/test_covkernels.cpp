#include "oracles.hpp"

#include "resp/covkernels.hpp"
#include "resp/errors.hpp"

#include <doctest.h>

using namespace resp;

TEST_SUITE("covkernels") {
  TEST_CASE("great-circle distances") {
    CHECK(great_circle_km({0, 0}, {0, 0}) == 0.0);
    CHECK(great_circle_km({0, 0}, {180, 0}) == doctest::Approx(std::numbers::pi * 6371.0).epsilon(1e-12));
    CHECK(great_circle_km({0, 0}, {90, 0}) == doctest::Approx(10007.54).epsilon(1e-6));
    CHECK(great_circle_km({179.5, 10}, {-179.5, 10}) ==
          doctest::Approx(oracle::haversine_km(179.5, 10, 180.5, 10)).epsilon(1e-12));
  }

  TEST_CASE("property: distance is symmetric and obeys the triangle inequality") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90);
    for (int i = 0; i < 200; ++i) {
      const Location a(lon(rng), lat(rng)), b(lon(rng), lat(rng)), c(lon(rng), lat(rng));
      CHECK(great_circle_km(a, b) == great_circle_km(b, a));
      CHECK(great_circle_km(a, c) <= great_circle_km(a, b) + great_circle_km(b, c) + 1e-9);
      CHECK(great_circle_km(a, b) <= std::numbers::pi * 6371.0 + 1e-9);
    }
  }

  TEST_CASE("locations are validated and wrapped") {
    CHECK_THROWS_AS(Location(0, 91), DataError);
    CHECK_THROWS_AS(Location(std::nan(""), 0), DataError);
    CHECK(Location(190, 0).lon == doctest::Approx(-170));
    CHECK(Location(180, 0).lon == doctest::Approx(-180));
  }

  TEST_CASE("Matérn at zero lag is the variance") {
    for (double nu : {0.5, 1.0, 1.5, 2.5, 3.7}) CHECK(matern(0.0, {2.5, 10.0, nu}) == 2.5);
  }

  TEST_CASE("exponential case") {
    CHECK(matern(100.0, {1.0, 100.0, 0.5}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    for (int i = 0; i <= 1000; ++i) {
      const double d = 10.0 * 37.0 * i / 1000.0;
      CHECK(std::abs(matern(d, {1.7, 37.0, 0.5}) - 1.7 * std::exp(-d / 37.0)) <= 1e-12);
    }
  }

  TEST_CASE("smoothness 1.5 matches a 50-digit Bessel evaluation") {
    const double expected = oracle::matern_highprec(1.0, 2.0, 1.5);
    CHECK(expected == doctest::Approx(2.0 * 2.0 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(matern(50.0, {2.0, 50.0, 1.5}) == doctest::Approx(expected).epsilon(1e-13));
  }

  TEST_CASE("general smoothness matches the Bessel oracle") {
    for (double nu : {0.3, 0.8, 1.2, 2.0, 2.5, 4.1})
      for (double x : {1e-3, 0.1, 0.7, 2.0, 9.0, 40.0}) {
        const double expected = oracle::matern_highprec(x, 1.3, nu);
        CHECK(matern(x * 80.0, {1.3, 80.0, nu}) == doctest::Approx(expected).epsilon(1e-10));
      }
  }

  TEST_CASE("far-field values flush to zero") {
    CHECK(matern(1e6, {1.0, 1.0, 0.5}) == 0.0);
    CHECK(matern(1e6, {1.0, 1.0, 2.3}) == 0.0);
    const std::vector<Location> pts{{0, 0}, {180, 0}};
    const Matrix S = build_local_cov(pts, {{1.0, 1.0, 0.5}, 0.0});
    CHECK(S(0, 1) == 0.0);
    CHECK(S(0, 0) == 1.0);
  }

  TEST_CASE("parameters are validated") {
    CHECK_THROWS_AS(matern(1.0, {-1.0, 1.0, 0.5}), ConfigError);
    CHECK_THROWS_AS(matern(1.0, {1.0, 0.0, 0.5}), ConfigError);
    CHECK_THROWS_AS(matern(1.0, {1.0, 1.0, 0.0}), ConfigError);
  }

  TEST_CASE("local covariance") {
    const std::vector<Location> one{{-105, 40}};
    const Matrix S1 = build_local_cov(one, {{1.0, 50.0, 0.5}, 0.5});
    CHECK(S1(0, 0) == 1.5);

    const std::vector<Location> grid{{-105, 40}, {-104, 40}, {-105, 41}, {-104, 41}};
    const LocalCovParams p{{1.4, 120.0, 1.5}, 0.3};
    const Matrix S = build_local_cov(grid, p);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double d = oracle::haversine_km(grid[i].lon, grid[i].lat, grid[j].lon, grid[j].lat);
        const double expected = oracle::matern(d, 1.4, 120.0, 1.5) + (i == j ? 0.3 : 0.0);
        CHECK(S(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
    CHECK(S == S.transpose());
  }

  TEST_CASE("property: covariance matrices are positive definite") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> lon(-110, -100), lat(35, 42), u(0.1, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<Location> pts;
      for (int i = 0; i < 12; ++i) pts.emplace_back(lon(rng), lat(rng));
      const Matrix S = build_local_cov(pts, {{u(rng), 50.0 * u(rng), 0.5 * u(rng)}, 0.01});
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }

  TEST_CASE("remote matrices") {
    const std::vector<Location> remote{{160, 0}, {170, 5}, {-175, -5}, {-160, 10}, {180, 0}, {150, 12}};
    const std::vector<Location> one_knot{{170, 0}};
    const MaternParams theta{2.0, 900.0, 0.5};
    const RemoteMatrices r1 = build_remote_matrices(remote, one_knot, theta);
    CHECK(r1.Rstar(0, 0) == 2.0);
    for (std::size_t i = 0; i < remote.size(); ++i)
      CHECK(r1.cstar(static_cast<Index>(i), 0) == doctest::Approx(matern(great_circle_km(remote[i], one_knot[0]), theta)));

    const std::vector<Location> knots{remote[1], remote[3], remote[4]};
    const RemoteMatrices r = build_remote_matrices(remote, knots, theta);
    CHECK(r.cstar.row(1) == r.Rstar.row(0));
    CHECK(r.cstar.row(3) == r.Rstar.row(1));
    CHECK(r.cstar.row(4) == r.Rstar.row(2));
    for (Index i = 0; i < 6; ++i)
      for (Index l = 0; l < 3; ++l) {
        const auto& a = remote[static_cast<std::size_t>(i)];
        const auto& b = knots[static_cast<std::size_t>(l)];
        CHECK(std::abs(r.cstar(i, l) - oracle::matern(oracle::haversine_km(a.lon, a.lat, b.lon, b.lat), 2.0, 900.0, 0.5)) <=
              1e-14);
      }
  }

  TEST_CASE("remote matrix errors") {
    const std::vector<Location> remote{{160, 0}, {170, 5}};
    const std::vector<Location> dup{{160, 0}, {160, 0}};
    const std::vector<Location> three{{160, 0}, {170, 5}, {175, 5}};
    CHECK_THROWS_AS(build_remote_matrices(remote, dup, {1, 100, 0.5}), DataError);
    CHECK_THROWS_AS(build_remote_matrices(remote, three, {1, 100, 0.5}), DimensionError);
    CHECK(has_duplicates(dup));
    CHECK_FALSE(has_duplicates(remote));
  }

  TEST_CASE("warnings go to the installed handler") {
    std::vector<std::string> seen;
    auto previous = set_warning_handler([&](std::string_view m) { seen.emplace_back(m); });
    warn("hello");
    set_warning_handler(previous);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0] == "hello");
  }
}
