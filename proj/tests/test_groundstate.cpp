#include <catch2/catch_amalgamated.hpp>

#include "norad/groundstate.hpp"

using namespace norad;

TEST_CASE("ground state closed forms") {
  CHECK(W(0.0) == Catch::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(eval_W_scaled(1.0, 0.0) == Catch::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(eval_W_scaled(-1.0, 1.0), std::domain_error);

  SECTION("far field: r W(r) -> 1") {
    CHECK(1e4 * W(1e4) == Catch::Approx(1.0).margin(1e-7));
  }
  SECTION("scaling identity") {
    for (double lam : {0.3, 1.7, 4.0})
      for (double r : {0.0, 0.5, 2.0, 9.0})
        CHECK(eval_W_scaled(lam, r) ==
              Catch::Approx(std::sqrt(lam) * W(lam * r)).margin(1e-15));
  }
  SECTION("LamW matches (1/2 + r d/dr) W by differences") {
    for (double r : {0.1, 0.5, 1.0, 2.5, 7.0}) {
      const double h = 1e-5;
      const double d = (W(r + h) - W(r - h)) / (2 * h);
      CHECK(LamW(r) == Catch::Approx(0.5 * W(r) + r * d).margin(1e-8));
    }
  }
  SECTION("dW matches W' by differences") {
    for (double r : {0.2, 1.0, 3.0}) {
      const double h = 1e-5;
      CHECK(dW(r) == Catch::Approx((W(r + h) - W(r - h)) / (2 * h)).margin(1e-8));
    }
  }
}

TEST_CASE("Pohozaev identity") {
  const double grad2 =
      4.0 * M_PI * integrate_to_infinity([](double r) { return dW(r) * dW(r) * r * r; }, 0.0);
  const double w6 = 4.0 * M_PI * integrate_to_infinity(
                                     [](double r) {
                                       const double w = W(r);
                                       return std::pow(w, 6) * r * r;
                                     },
                                     0.0);
  CHECK(grad2 == Catch::Approx(w6).epsilon(1e-8));
}

TEST_CASE("kernel identity for LamW") {
  RadialProfile lw;
  lw.tag = RadialProfile::Tag::LamW;
  CHECK(kernel_mode_deviation([](double r) { return LamW(r); },
                              [&](double r) { return lw.deriv(r); }, 0.0) < 1e-10);
  // Loose difference-quotient version of the same identity.
  CHECK(radial_operator_residual(LamW, 0.0, {0.3, 0.8, 1.5, 2.7, 4.9, 8.3}) < 1e-4);
}

TEST_CASE("unstable mode") {
  static const UnstableMode m = unstable_mode(1e-12);
  CHECK(m.lamed > 0);
  CHECK(m.Y.u.front() == 1.0);

  SECTION("nodeless and exponentially bounded") {
    double bound = 0;
    for (std::size_t k = 0; k < m.Y.u.size(); ++k) {
      CHECK(m.Y.u[k] > 0);
      const double r = m.Y.h * double(k);
      bound = std::max(bound, std::exp(m.lamed * r) * m.Y.u[k] / (1.0 + r));
    }
    CHECK(bound < 1e3);  // e^{lamed r} Y stays tame (up to the 1/r factor)
  }
  SECTION("eigen-relation residual by differences") {
    auto g = [&](double r) { return m.Y(r); };
    const double res =
        radial_operator_residual(g, m.lamed * m.lamed, {0.5, 1.0, 2.0, 4.0, 8.0});
    CHECK(res < 1e-5);
  }
  SECTION("two-resolution agreement") {
    UnstableMode m40 = unstable_mode(1e-12, 40.0);
    CHECK(m40.lamed == Catch::Approx(m.lamed).epsilon(1e-6));
  }
  SECTION("scaling law") {
    CHECK(scaled_eigenvalue_check(1.0, m) < 1e-8);
    CHECK(scaled_eigenvalue_check(2.0, m) < 1e-6);
    CHECK(scaled_eigenvalue_check(0.5, m) < 1e-6);
  }
  SECTION("norm positive") { CHECK(m.norm_Y2 > 0); }
}

TEST_CASE("supercritical ground state") {
  SECTION("critical power recovers W") {
    Nonlinearity f({{5, 1.0}});
    auto p = supercritical_ground_state(f, 60.0, std::sqrt(3.0));
    for (double r : {0.0, 0.5, 1.0, 3.0, 10.0, 40.0})
      CHECK(p(r) == Catch::Approx(W(r)).margin(1e-6));
  }
  SECTION("double power has a fast-decay ground state") {
    Nonlinearity f({{7, 1.0}, {9, -1.0}});
    auto p = supercritical_ground_state(f, 80.0);
    CHECK(p.u.front() > 0);
    for (std::size_t k = 0; k < p.u.size(); ++k) CHECK(p.u[k] > 0);
    std::vector<double> rs, us;
    for (std::size_t k = p.u.size() / 2; k < p.u.size(); k += 100) {
      rs.push_back(p.h * double(k));
      us.push_back(p.u[k]);
    }
    CHECK(fit_decay_exponent(rs, us, 0.0) == Catch::Approx(1.0).margin(0.02));
  }
  SECTION("disallowed low powers") {
    CHECK_THROWS_AS(Nonlinearity({{3, 1.0}}), std::invalid_argument);
  }
}

TEST_CASE("nondegeneracy") {
  SECTION("critical W is degenerate through the scaling mode") {
    RadialProfile w;
    w.tag = RadialProfile::Tag::W;
    CHECK_FALSE(nondegeneracy_check(w, Nonlinearity({{5, 1.0}})));
  }
  SECTION("double-power ground state is nondegenerate") {
    Nonlinearity f({{7, 1.0}, {9, -1.0}});
    auto p = supercritical_ground_state(f, 80.0);
    CHECK(nondegeneracy_check(p, f, 1e-5));
  }
}
