#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <random>

#include "norad/admissibility.hpp"

using namespace norad;

namespace {

SolitonConfig collinear_config(std::vector<double> vels) {
  SolitonConfig cfg;
  for (double v : vels) {
    Soliton s;
    s.velocity = Vec3{v, 0.0, 0.0};
    cfg.solitons.push_back(s);
  }
  return cfg;
}

}  // namespace

TEST_CASE("admissible quartic roots") {
  const auto t0 = std::chrono::steady_clock::now();
  const double y1 = admissible_ratio_small();
  const auto t1 = std::chrono::steady_clock::now();
  CHECK(std::abs(y1 - 0.062) < 1e-3);
  CHECK(std::abs(admissible_quartic(y1)) < 1e-11);
  CHECK(std::chrono::duration<double>(t1 - t0).count() < 1e-3);

  const double y2 = admissible_ratio_large();
  CHECK(std::abs(admissible_quartic(y2)) < 1e-10);
  CHECK(y2 > 2.7);
  CHECK(y2 < 2.8);
}

TEST_CASE("interaction matrix") {
  SECTION("two solitons, closed form") {
    const double v = 0.6;
    auto m = interaction_matrix(collinear_config({-v, v}));
    const double w = 2.0 * v / (1.0 + v * v);
    CHECK(m.A(0, 1) == Catch::Approx(std::sqrt(1.0 - w * w) / w).epsilon(1e-14));
    CHECK(m.A(1, 0) == Catch::Approx(m.A(0, 1)).epsilon(1e-14));
    CHECK(m.A(0, 0) == 0.0);
    // det = -A12^2 < 0: a pair is never admissible.
    CHECK(m.det() == Catch::Approx(-m.A(0, 1) * m.A(0, 1)).epsilon(1e-13));
  }
  SECTION("symmetry and positivity") {
    auto m = interaction_matrix(collinear_config({-0.8, -0.2, 0.35, 0.7}));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        if (a == b) continue;
        CHECK(m.A(a, b) > 0.0);
        CHECK(m.A(a, b) == Catch::Approx(m.A(b, a)).epsilon(1e-13));
      }
  }
  SECTION("permutation similarity") {
    std::vector<double> v{-0.8, -0.2, 0.35, 0.7};
    auto m = interaction_matrix(collinear_config(v));
    std::vector<std::size_t> p{2, 0, 3, 1};
    std::vector<double> vp(4);
    for (std::size_t i = 0; i < 4; ++i) vp[i] = v[p[i]];
    auto mp = interaction_matrix(collinear_config(vp));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        CHECK(mp.A(a, b) == Catch::Approx(m.A(p[a], p[b])).margin(1e-14));
  }
  SECTION("boost invariance of entries") {
    std::vector<double> v{-0.8, -0.2, 0.35, 0.7};
    auto m = interaction_matrix(collinear_config(v));
    const double u = 0.4;  // boost every velocity along the common axis
    std::vector<double> vb(4);
    for (std::size_t i = 0; i < 4; ++i) vb[i] = (v[i] - u) / (1.0 - v[i] * u);
    auto mb = interaction_matrix(collinear_config(vb));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        CHECK(mb.A(a, b) == Catch::Approx(m.A(a, b)).margin(1e-10));
  }
  SECTION("coincident velocities rejected") {
    SolitonConfig cfg = collinear_config({0.1, 0.5});
    CHECK_THROWS_AS(interaction_matrix(collinear_config({0.3})),
                    std::invalid_argument);
  }
}

TEST_CASE("collinear determinant closed form") {
  SECTION("matches assembled determinant on a grid") {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 1; i <= 20; ++i)
      for (int j = 1; j <= 20; ++j) {
        const double x2 = 0.04 + 0.94 * (j - 1) / 19.0;
        const double x1 = x2 * (0.03 + 0.93 * (i - 1) / 19.0);
        auto m = interaction_matrix(collinear_config({-x1, -x2, x2, x1}));
        const double ref = m.det();
        const double cf = collinear_det(x1, x2);
        CHECK(std::abs(cf - ref) <= 1e-10 * std::abs(ref));
      }
    const auto t1 = std::chrono::steady_clock::now();
    CHECK(std::chrono::duration<double>(t1 - t0).count() < 5.0);
  }
  SECTION("vanishes at the quartic root, with a sign change") {
    const double x2 = 0.9;
    const double x1 = x2 * admissible_ratio_small();
    CHECK(std::abs(collinear_det(x1, x2)) <= 1e-10);
    CHECK(collinear_det(x1 - 1e-3, x2) * collinear_det(x1 + 1e-3, x2) < 0.0);

    const double x1b = x2 / admissible_ratio_large();
    CHECK(std::abs(collinear_det(x1b, x2)) <= 1e-10);
    CHECK(collinear_det(x1b - 1e-3, x2) * collinear_det(x1b + 1e-3, x2) < 0.0);
  }
  SECTION("domain errors") {
    CHECK_THROWS_AS(collinear_det(0.5, 0.3), std::domain_error);
    CHECK_THROWS_AS(collinear_det(-0.1, 0.3), std::domain_error);
    CHECK_THROWS_AS(collinear_det(0.5, 1.1), std::domain_error);
  }
}

TEST_CASE("admissible scales") {
  SolitonConfig cfg = collinear_admissible_family(0.9);
  auto m = interaction_matrix(cfg);
  SECTION("null vector of the reference family") {
    auto mu = find_admissible_scales(m);
    REQUIRE(mu.size() == 4);
    CHECK(mu[0] == 1.0);
    for (double c : mu) CHECK(std::abs(c) > 1e-3);
    // Mirror antisymmetry of the symmetric family.
    CHECK(mu[3] == Catch::Approx(-mu[0]).margin(1e-9));
    CHECK(mu[2] == Catch::Approx(-mu[1]).margin(1e-9));
    // Defining property ||A mu|| <= 1e-8 ||A|| ||mu||.
    double anorm = 0, munorm = 0, res = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      double row = 0;
      for (std::size_t b = 0; b < 4; ++b) row += std::abs(m.A(a, b));
      anorm = std::max(anorm, row);
      munorm += mu[a] * mu[a];
      double r = 0;
      for (std::size_t b = 0; b < 4; ++b) r += m.A(a, b) * mu[b];
      res += r * r;
    }
    CHECK(std::sqrt(res) <= 1e-8 * anorm * std::sqrt(munorm));
    // Common rescaling of mu stays in the null space.
    double res2 = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      double r = 0;
      for (std::size_t b = 0; b < 4; ++b) r += m.A(a, b) * (7.5 * mu[b]);
      res2 += r * r;
    }
    CHECK(std::sqrt(res2) <= 7.5 * 1e-8 * anorm * std::sqrt(munorm) * 1.001);
  }
  SECTION("non-singular matrix rejected") {
    auto mp = interaction_matrix(collinear_config({-0.9, -0.3, 0.3, 0.9}));
    CHECK_THROWS_AS(find_admissible_scales(mp), std::runtime_error);
  }
}

TEST_CASE("balanced check") {
  SolitonConfig cfg = collinear_admissible_family(0.9);
  auto mu = find_admissible_scales(interaction_matrix(cfg));
  SECTION("zero mu accepted with zero residual") {
    auto rep = balanced_check(cfg, {0, 0, 0, 0});
    CHECK(rep.balanced);
    CHECK(rep.max_norm == 0.0);
  }
  SECTION("reference family residuals are mirror antisymmetric") {
    auto rep = balanced_check(cfg, mu);
    REQUIRE(rep.residuals.size() == 4);
    // Residuals live on the common axis.
    for (const auto& r : rep.residuals)
      CHECK(std::abs(r.y) + std::abs(r.z) < 1e-12);
    // Mirror symmetry pairs (0,3) and (1,2): residual flips with the
    // reflection combined with the antisymmetric mu.
    CHECK(rep.residuals[0].x == Catch::Approx(rep.residuals[3].x).margin(1e-10));
    CHECK(rep.residuals[1].x == Catch::Approx(rep.residuals[2].x).margin(1e-10));
    // The family is admissible but not balanced.
    CHECK(rep.max_norm > 1e-3);
    CHECK_FALSE(rep.balanced);
  }
}

TEST_CASE("strong admissibility") {
  SolitonConfig cfg = collinear_admissible_family(0.9);
  auto mu = find_admissible_scales(interaction_matrix(cfg));
  SECTION("entry closed forms") {
    StrongMatrix sm = strong_matrix(cfg, mu, 3);
    for (std::size_t a = 0; a < 4; ++a) {
      CHECK(sm.M(a, a) == Catch::Approx(-mu[a] * 1.5).epsilon(1e-14));
      CHECK(sm.Mbar(a, a) == 1.0);
      for (std::size_t b = 0; b < 4; ++b) {
        if (a == b) continue;
        const double s =
            relative_speed(cfg[a].velocity, cfg[b].velocity).norm();
        const double g = std::sqrt(1.0 - s * s);
        const double direct =
            -0.5 * std::pow(1.0 + s, -3) * mu[b] / s * g * g * g;
        CHECK(sm.M(a, b) == Catch::Approx(direct).epsilon(1e-14));
        // Normalization M = (-i/2) Mbar diag(mu).
        CHECK(sm.M(a, b) ==
              Catch::Approx(-1.5 * sm.Mbar(a, b) * mu[b]).epsilon(1e-14));
      }
    }
  }
  SECTION("scan of the reference family") {
    StrongScanReport rep = strong_admissible_scan(cfg, mu, 10);
    CHECK(rep.pass);
    CHECK(rep.gamma_inv_max < 0.81);
    CHECK(rep.z_inv_max < 2.0);
    REQUIRE(rep.rows.size() == 9);
    for (const auto& row : rep.rows) {
      CHECK(std::abs(row.det_bar) > 0.9);
      // Dominance bound really dominates the computed row sums.
      CHECK(row.offdiag_row_max <=
            3.0 * rep.z_inv_max / row.order *
                std::pow(rep.gamma_inv_max, row.order));
      CHECK(row.tail_bound >= row.offdiag_row_max);
    }
    // Tail certificate: the generous (42/i) g^i bound falls below 1.
    CHECK(rep.tail_start == 11);
    CHECK(42.0 / 11.0 * std::pow(rep.gamma_inv_max, 11) < 1.0);
    // Monotone approach det -> 1 beyond the dominance threshold.
    double prev_gap = 1.0;
    for (int i = 11; i <= 16; ++i) {
      const double gap = std::abs(strong_matrix(cfg, mu, i).det_bar - 1.0);
      CHECK(gap < prev_gap * 1.1);
      prev_gap = gap;
    }
  }
  SECTION("bad input") {
    CHECK_THROWS_AS(strong_matrix(cfg, mu, 1), std::invalid_argument);
    CHECK_THROWS_AS(strong_admissible_scan(cfg, mu, 1), std::invalid_argument);
  }
}
