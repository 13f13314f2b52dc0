#include "oracles.hpp"

#include "resp/errors.hpp"
#include "resp/reducedrank.hpp"

#include <doctest.h>

using namespace resp;

namespace {

Matrix centred_random(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  m.colwise() -= m.rowwise().mean();
  return m;
}

}  // namespace

TEST_SUITE("reducedrank") {
  TEST_CASE("single knot is the centroid") {
    const auto k = place_knot_grid({0, 10, 0, 10}, 1);
    REQUIRE(k.size() == 1);
    CHECK(k[0].lon == doctest::Approx(5.0));
    CHECK(k[0].lat == doctest::Approx(5.0));
  }

  TEST_CASE("four knots form a 2x2 grid") {
    const auto k = place_knot_grid({0, 10, 0, 10}, 4);
    REQUIRE(k.size() == 4);
    for (const auto& p : k) {
      CHECK((p.lon == doctest::Approx(2.5) || p.lon == doctest::Approx(7.5)));
      CHECK((p.lat == doctest::Approx(2.5) || p.lat == doctest::Approx(7.5)));
    }
    CHECK_FALSE(has_duplicates(k));
  }

  TEST_CASE("mask filters candidates") {
    const auto k = place_knot_grid({0, 10, 0, 10}, 4, [](const Location& p) { return p.lat <= 5.0; });
    REQUIRE(k.size() == 2);
    for (const auto& p : k) CHECK(p.lat == doctest::Approx(2.5));
    CHECK_THROWS_AS(place_knot_grid({0, 10, 0, 10}, 4, [](const Location&) { return false; }), DataError);
  }

  TEST_CASE("grid across the antimeridian") {
    const BoundingBox box{150, -100, -20, 20};
    CHECK(box.lon_width() == doctest::Approx(110.0));
    const auto k = place_knot_grid(box, 12);
    CHECK(k.size() <= 12);
    CHECK(k.size() >= 6);
    for (const auto& p : k) {
      CHECK((p.lon >= 150.0 || p.lon <= -100.0));
      CHECK(std::abs(p.lat) < 20.0);
    }
  }

  TEST_CASE("property: knot count never exceeds the target") {
    for (int target = 1; target <= 60; ++target) {
      const auto k = place_knot_grid({-30, 40, -10, 50}, target);
      CHECK(static_cast<int>(k.size()) <= target);
      CHECK(!k.empty());
    }
  }

  TEST_CASE("induced covariates") {
    const std::vector<Location> remote{{160, 0}, {170, 5}, {-175, -5}, {-160, 10}, {180, 0}, {150, 12}};
    const MaternParams theta{1.5, 1200.0, 0.5};
    std::mt19937_64 rng(5);
    const Matrix z = centred_random(6, 4, rng);

    const ReducedRankBasis full = build_basis(remote, remote, theta, z);
    CHECK((full.Zstar - z).cwiseAbs().maxCoeff() < 1e-10);

    const ReducedRankBasis zero = build_basis(remote, {remote[0], remote[2]}, theta, Matrix::Zero(6, 4));
    CHECK(zero.Zstar.isZero(0.0));

    const ReducedRankBasis two = build_basis(remote, {remote[0], remote[3]}, theta, z);
    const oracle::Mat dense = oracle::Mat(two.Rstar).inverse() * oracle::Mat(two.cstar).transpose() * oracle::Mat(z);
    CHECK((two.Zstar - dense).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("rank-one field has one EOF") {
    Vector psi(5), a(6);
    psi << 1, -2, 0.5, 3, -1;
    a << 1, -1, 2, -2, 0.5, -0.5;
    const Matrix z = psi * a.transpose();
    const EofBasis e = compute_eofs(z, 1);
    const Vector unit = psi.normalized();
    CHECK(std::abs(std::abs(e.W.col(0).dot(unit)) - 1.0) < 1e-12);
    CHECK(e.explained[0] == doctest::Approx(1.0));
  }

  TEST_CASE("full EOF basis reconstructs the field") {
    std::mt19937_64 rng(6);
    const Matrix z = centred_random(4, 9, rng);
    const EofBasis e = compute_eofs(z, 4);
    CHECK((e.W * e.A - z).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((e.W.transpose() * e.W - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    for (Index l = 1; l < 4; ++l) CHECK(e.explained[l] <= e.explained[l - 1]);
    CHECK(e.explained.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("constructed spectrum 4:1") {
    const Index n = 6, T = 40;
    Vector u1 = Vector::Zero(n), u2 = Vector::Zero(n);
    u1.head(3).setConstant(1.0 / std::sqrt(3.0));
    u2.tail(3).setConstant(1.0 / std::sqrt(3.0));
    Matrix z(n, T);
    for (Index t = 0; t < T; ++t) {
      const double c = (t % 2 == 0 ? 1.0 : -1.0);
      const double s = ((t / 2) % 2 == 0 ? 1.0 : -1.0);
      z.col(t) = 2.0 * c * u1 + 1.0 * s * u2;
    }
    const EofBasis e = compute_eofs(z, 2);
    CHECK(e.explained[0] == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(e.explained[1] == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(e.W.col(0).cwiseAbs().maxCoeff() == doctest::Approx(1.0 / std::sqrt(3.0)));
  }

  TEST_CASE("EOF input checks") {
    Matrix z = Matrix::Ones(3, 5);
    CHECK_THROWS_AS(compute_eofs(z, 1), DataError);
    std::mt19937_64 rng(8);
    CHECK_THROWS_AS(compute_eofs(centred_random(3, 5, rng), 4), DimensionError);
  }

  TEST_CASE("reparameterization map") {
    const std::vector<Location> remote{{160, 0}, {170, 5}, {-175, -5}};
    const MaternParams theta{1.0, 1500.0, 0.5};
    const RemoteMatrices full = build_remote_matrices(remote, remote, theta);
    CHECK((reparam_map(Matrix::Identity(3, 3), full.Rstar, full.cstar).T - Matrix::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    const std::vector<Location> knots{remote[0], remote[2]};
    const RemoteMatrices two = build_remote_matrices(remote, knots, theta);
    const Matrix W = Matrix::Constant(3, 1, 1.0 / std::sqrt(3.0));
    const Matrix T = reparam_map(W, two.Rstar, two.cstar).T;
    const oracle::Mat weights = oracle::Mat(two.cstar) * oracle::Mat(two.Rstar).inverse();  // kriging weights
    REQUIRE(T.rows() == 1);
    for (Index l = 0; l < 2; ++l)
      CHECK(T(0, l) == doctest::Approx(weights.col(l).sum() / std::sqrt(3.0)).epsilon(1e-12));
  }

  TEST_CASE("full-rank EOFs reproduce the teleconnection term") {
    std::mt19937_64 rng(9);
    const std::vector<Location> remote{{160, 0}, {170, 5}, {-175, -5}, {-160, 10}};
    const Matrix z = centred_random(4, 8, rng);
    const std::vector<Location> knots{remote[1], remote[2]};
    const ReducedRankBasis b = build_basis(remote, knots, {1.2, 1800.0, 0.5}, z);
    const EofBasis e = compute_eofs(z, 4);
    const Matrix T = reparam_map(e.W, b.Rstar, b.cstar).T;
    std::normal_distribution<double> n(0.0, 1.0);
    Vector alpha(2);
    alpha << n(rng), n(rng);
    const Vector alpha_eof = T * alpha;
    for (Index t = 0; t < 8; ++t)
      CHECK(std::abs(e.A.col(t).dot(alpha_eof) - b.Zstar.col(t).dot(alpha)) < 1e-10);
  }
}
