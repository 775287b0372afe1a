#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "norad/elliptic.hpp"

using namespace norad;

namespace {

// Closed form N_sigma^{-1}(-1/(2 rho)) on the bounded branch.
double gtilde(double sigma, double rho) {
  if (rho < 1e-6) return 1.0 / (2.0 * (1.0 + sigma)) - rho / 4.0;
  return (1.0 - std::pow(1.0 + rho, -sigma)) / (2.0 * sigma * (1.0 + sigma) * rho);
}

BallProfile sample_profile(int ell, int n, const std::function<double(double)>& g) {
  BallProfile u;
  u.ell = ell;
  for (int j = 0; j <= n; ++j) {
    const double p = (1.0 - std::cos(M_PI * double(j) / n)) / 2.0;
    u.rho.push_back(p);
    u.val.push_back(g(p));
  }
  return u;
}

}  // namespace

TEST_CASE("apply_Nsigma closed forms") {
  SECTION("constant at sigma=2 gives -12") {
    auto u = sample_profile(0, 120, [](double) { return 1.0; });
    auto out = apply_Nsigma(u, 2.0);
    for (std::size_t j = 10; j + 10 < out.size(); ++j)
      CHECK(out.val[j] == Catch::Approx(-12.0).margin(1e-9));
  }
  SECTION("zero maps to zero") {
    auto u = sample_profile(1, 60, [](double) { return 0.0; });
    auto out = apply_Nsigma(u, 1.5);
    for (double v : out.val) CHECK(std::abs(v) < 1e-12);
  }
  SECTION("g-tilde maps to -1/(2 rho)") {
    for (double sigma : {1.0, 3.0}) {
      auto u = sample_profile(0, 400, [&](double p) { return gtilde(sigma, p); });
      auto out = apply_Nsigma(u, sigma);
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double p = out.rho[j];
        if (p < 0.05 || p > 0.999) continue;
        CHECK(out.val[j] == Catch::Approx(-0.5 / p).margin(1e-8));
      }
    }
  }
}

TEST_CASE("invert_Nsigma closed form") {
  for (double sigma : {1.0, 2.0, 3.0, 5.0}) {
    auto u = invert_Nsigma([](double p) { return -0.5 / p; }, 0, sigma, 0.0);
    CHECK(u.val.front() == Catch::Approx(1.0 / (2.0 * (1.0 + sigma))).margin(1e-8));
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99})
      CHECK(u(p) == Catch::Approx(gtilde(sigma, p)).margin(1e-8));
  }
  SECTION("zero datum gives zero") {
    auto u = invert_Nsigma([](double) { return 0.0; }, 0, 2.0, 0.0);
    for (double v : u.val) CHECK(std::abs(v) < 1e-10);
  }
  SECTION("degree-1 singular datum has nonzero center value") {
    auto u = invert_Nsigma([](double p) { return -1.0 / (p * p); }, 1, 2.0, 0.0);
    CHECK(u.val.front() == Catch::Approx(0.5).margin(1e-8));
  }
  SECTION("sigma <= 0 rejected") {
    CHECK_THROWS_AS(invert_Nsigma([](double) { return 0.0; }, 0, -1.0, 0.0),
                    std::invalid_argument);
  }
  SECTION("no-radiation branch bounded and refinement stable") {
    auto coarse = invert_Nsigma([](double p) { return std::exp(-p); }, 0, 2.0, 0.0, 200);
    auto fine = invert_Nsigma([](double p) { return std::exp(-p); }, 0, 2.0, 0.0, 280);
    for (double p : {0.95, 0.97, 0.99, 0.999, 1.0}) {
      CHECK(std::isfinite(coarse(p)));
      CHECK(coarse(p) == Catch::Approx(fine(p)).margin(1e-8));
    }
  }
  SECTION("prescribed boundary datum is attained") {
    auto u = invert_Nsigma([](double) { return 0.0; }, 0, 2.0, 0.7);
    REQUIRE(u.tag == BoundaryTag::Radiating);
    // ((1-rho)^sigma u) -> F at the boundary.
    CHECK(u.val.back() == Catch::Approx(0.7).margin(1e-12));
    auto back = apply_Nsigma(u, 2.0);
    for (std::size_t j = 0; j < back.size(); ++j) {
      const double p = back.rho[j];
      if (p < 0.05 || p > 0.99) continue;
      CHECK(std::abs(back(p)) < 1e-6);
    }
  }
}

TEST_CASE("invert/apply round trip for N_sigma") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const int ell = trial % 3;
    const double sigma = 1.0 + (trial % 2);
    const double a = unif(rng), b = unif(rng), c = unif(rng);
    auto f = [=](double p) { return a + b * p * p + c * std::exp(-2.0 * p); };
    auto u = invert_Nsigma(f, ell, sigma, 0.0);
    auto back = apply_Nsigma(u, sigma);
    double scale = std::abs(a) + std::abs(b) + std::abs(c) + 1e-6;
    for (std::size_t j = 0; j < back.size(); ++j) {
      const double p = back.rho[j];
      if (p < 0.05 || p > 0.995) continue;
      CHECK(back.val[j] == Catch::Approx(f(p)).margin(1e-6 * scale));
    }
  }
  SECTION("linearity") {
    auto f1 = [](double p) { return std::exp(-p); };
    auto f2 = [](double p) { return p * (1.0 - p); };
    auto u1 = invert_Nsigma(f1, 0, 2.0, 0.0);
    auto u2 = invert_Nsigma(f2, 0, 2.0, 0.0);
    auto u12 = invert_Nsigma([&](double p) { return 2.0 * f1(p) - 3.0 * f2(p); },
                             0, 2.0, 0.0);
    for (std::size_t j = 0; j + 1 < u12.size(); ++j)
      CHECK(u12.val[j] ==
            Catch::Approx(2.0 * u1.val[j] - 3.0 * u2.val[j]).margin(1e-9));
  }
}

TEST_CASE("hyperbolic conjugation") {
  SECTION("endpoint mapping and inverse substitution") {
    CHECK(rho_to_ball(0.0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(rho_to_ball(1.0) == Catch::Approx(1.0).margin(1e-12));
    for (double p : {0.1, 0.4, 0.8, 0.99})
      CHECK(ball_to_rho(rho_to_ball(p)) == Catch::Approx(p).margin(1e-13));
  }
  SECTION("round trip on a profile") {
    // Interior nodes only: the weight degenerates at the boundary point.
    BallProfile u;
    u.ell = 0;
    for (int j = 0; j <= 80; ++j) {
      const double p = 0.985 * (1.0 - std::cos(M_PI * double(j) / 80)) / 2.0;
      u.rho.push_back(p);
      u.val.push_back(std::cos(3.0 * p));
    }
    auto v = hyperbolic_conjugate(u, 2.0, ConjugateDirection::ToHyperbolic);
    auto w = hyperbolic_conjugate(v, 2.0, ConjugateDirection::FromHyperbolic);
    for (std::size_t j = 0; j < u.size(); ++j) {
      CHECK(w.rho[j] == Catch::Approx(u.rho[j]).margin(1e-10));
      CHECK(w.val[j] == Catch::Approx(u.val[j]).margin(1e-10));
    }
  }
  SECTION("pulled-back hyperbolic solution is annihilated by N_sigma") {
    const double sigma = 2.0;
    // Radial solution of the hyperbolic eigenproblem: the Green's function
    // with pole at the origin, smooth away from 0.
    BallProfile u;
    u.ell = 0;
    const int n = 300;
    for (int j = 0; j <= n; ++j) {
      const double p = 0.30 + 0.65 * (1.0 - std::cos(M_PI * double(j) / n)) / 2.0;
      const double rt = rho_to_ball(p);
      const double g = greens_H3(HyperbolicPoint{Vec3{rt, 0, 0}},
                                 HyperbolicPoint{Vec3{0, 0, 0}}, sigma);
      u.rho.push_back(p);
      u.val.push_back(conjugation_weight(sigma, rt) * g);
    }
    auto out = apply_Nsigma(u, sigma);
    for (std::size_t j = 6; j + 6 < out.size(); ++j)
      CHECK(std::abs(out.val[j]) < 1e-6);
  }
}

TEST_CASE("hyperbolic Green function") {
  const double sigma = 2.0;
  SECTION("pole rejected") {
    HyperbolicPoint z{Vec3{0.3, 0.1, 0.0}};
    CHECK_THROWS_AS(greens_H3(z, z, sigma), std::domain_error);
  }
  SECTION("symmetry") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    for (int t = 0; t < 20; ++t) {
      HyperbolicPoint a{Vec3{unif(rng), unif(rng), unif(rng)}};
      HyperbolicPoint b{Vec3{unif(rng), unif(rng), unif(rng)}};
      CHECK(greens_H3(a, b, sigma) == Catch::Approx(greens_H3(b, a, sigma)).epsilon(1e-12));
    }
  }
  SECTION("boundary vanishing rate 1+sigma") {
    HyperbolicPoint za{Vec3{0, 0, 0}};
    std::vector<double> eps, val;
    for (double e = 1e-2; e > 1e-5; e /= 2.0) {
      eps.push_back(e);
      val.push_back(greens_H3(HyperbolicPoint{Vec3{1.0 - e, 0, 0}}, za, sigma));
    }
    CHECK(fit_decay_exponent(eps, val, 0.0) ==
          Catch::Approx(-(1.0 + sigma)).margin(0.02));
  }
  SECTION("annihilated by the hyperbolic operator (finite differences)") {
    HyperbolicPoint za{Vec3{0.2, 0.0, 0.1}};
    auto g = [&](Vec3 p) { return greens_H3(HyperbolicPoint{p}, za, sigma); };
    for (Vec3 p : {Vec3{0.5, 0.1, -0.2}, Vec3{-0.3, 0.4, 0.0}, Vec3{0.0, -0.6, 0.3}}) {
      auto operators = [&](double h, double& lap, double& rad) {
        lap = rad = 0;
        for (int i = 0; i < 3; ++i) {
          Vec3 e{0, 0, 0};
          (i == 0 ? e.x : i == 1 ? e.y : e.z) = h;
          lap += (g(p + e) - 2.0 * g(p) + g(p - e)) / (h * h);
          const double d1 = (g(p + e) - g(p - e)) / (2.0 * h);
          rad += (i == 0 ? p.x : i == 1 ? p.y : p.z) * d1;
        }
      };
      // Richardson over step halving removes the O(h^2) stencil error.
      double l1, r1, l2, r2d;
      operators(2e-3, l2, r2d);
      operators(1e-3, l1, r1);
      const double lap = (4.0 * l1 - l2) / 3.0, rad = (4.0 * r1 - r2d) / 3.0;
      const double r2 = p.norm2();
      const double res = (1.0 - r2) * (1.0 - r2) * lap + 2.0 * (1.0 - r2) * rad -
                         4.0 * (sigma * sigma - 1.0) * g(p);
      CHECK(std::abs(res) < 1e-6 * (1.0 + std::abs(g(p))));
    }
  }
  SECTION("boundary profile limit") {
    HyperbolicPoint za{Vec3{0.0, 0.0, 0.35}};
    const Vec3 omega{0.6, 0.0, 0.8};
    const double e = 1e-6;
    const double lim = std::pow(e, -(1.0 + sigma)) *
                       greens_H3(HyperbolicPoint{(1.0 - e) * omega}, za, sigma);
    CHECK(lim == Catch::Approx(greens_boundary(omega, za, sigma)).epsilon(1e-4));
  }
}

TEST_CASE("radiation design") {
  const double sigma = 1.0;
  SECTION("single zero target gives zero data") {
    auto d = design_radiation({HyperbolicPoint{Vec3{0, 0, 0.4}}}, {0.0},
                              std::nullopt, sigma);
    for (double v : d.f) CHECK(std::abs(v) < 1e-14);
  }
  SECTION("single target forward-reconstructed") {
    HyperbolicPoint za{Vec3{0, 0, 0.4}};
    auto d = design_radiation({za}, {1.0}, std::nullopt, sigma);
    CHECK(radiation_forward(d, za) == Catch::Approx(1.0).margin(1e-6));
  }
  SECTION("two collinear targets forward-reconstructed") {
    HyperbolicPoint z1{Vec3{0, 0, 0.45}}, z2{Vec3{0, 0, -0.3}};
    auto d = design_radiation({z1, z2}, {1.0, 0.0}, std::nullopt, sigma);
    CHECK(std::isfinite(d.condition_number));
    CHECK(radiation_forward(d, z1) == Catch::Approx(1.0).margin(1e-6));
    CHECK(std::abs(radiation_forward(d, z2)) < 1e-6);
  }
  SECTION("gradient targets") {
    HyperbolicPoint z1{Vec3{0, 0, 0.45}}, z2{Vec3{0, 0, -0.3}};
    auto d = design_radiation({z1, z2}, {0.5, 0.2},
                              std::optional<std::vector<double>>({{0.1, 0.0}}),
                              sigma);
    CHECK(radiation_forward(d, z1) == Catch::Approx(0.5).margin(1e-5));
    CHECK(radiation_forward(d, z2) == Catch::Approx(0.2).margin(1e-5));
    // The step must straddle several collocation cells to average out the
    // interpolation wiggle of the forward solve; Richardson removes the O(e^2).
    auto fd = [&](double e) {
      return (radiation_forward(d, HyperbolicPoint{Vec3{0, 0, 0.45 + e}}) -
              radiation_forward(d, HyperbolicPoint{Vec3{0, 0, 0.45 - e}})) /
             (2.0 * e);
    };
    const double grad = (4.0 * fd(0.02) - fd(0.04)) / 3.0;
    CHECK(grad == Catch::Approx(0.1).margin(1e-4));
  }
  SECTION("boundary profiles independent for distinct points") {
    std::vector<HyperbolicPoint> pts{HyperbolicPoint{Vec3{0, 0, 0.1}},
                                     HyperbolicPoint{Vec3{0, 0, 0.35}},
                                     HyperbolicPoint{Vec3{0, 0, 0.6}}};
    auto d = design_radiation(pts, {1.0, -1.0, 0.5}, std::nullopt, sigma);
    CHECK(std::isfinite(d.condition_number));
    CHECK(d.condition_number > 1.0);
  }
  SECTION("coincident points rejected") {
    CHECK_THROWS_AS(design_radiation({HyperbolicPoint{Vec3{0, 0, 0.4}},
                                      HyperbolicPoint{Vec3{0, 0, 0.4}}},
                                     {1.0, 0.0}, std::nullopt, sigma),
                    std::invalid_argument);
  }
  SECTION("off-axis points rejected") {
    CHECK_THROWS_AS(design_radiation({HyperbolicPoint{Vec3{0, 0, 0.4}},
                                      HyperbolicPoint{Vec3{0.3, 0, 0.0}}},
                                     {1.0, 0.0}, std::nullopt, sigma),
                    std::invalid_argument);
  }
}

TEST_CASE("invert_deltaV") {
  SECTION("starting datum W^3 (LamW)^2 at degree 0") {
    auto f = [](double r) { return std::pow(W(r), 3) * LamW(r) * LamW(r); };
    auto G = invert_deltaV(f, 0);
    CHECK(deltaV_residual(G, f, 0) < 1e-7);
  }
  SECTION("profile-sampled datum agrees with the closed form") {
    auto f = [](double r) { return std::pow(W(r), 3) * LamW(r) * LamW(r); };
    RadialProfile fp;
    fp.tag = RadialProfile::Tag::Table;
    fp.h = 0.01;
    for (int k = 0; k <= 30000; ++k) fp.u.push_back(f(0.01 * k));
    fp.p_inf = 5.0;
    auto Ga = invert_deltaV(f, 0);
    auto Gb = invert_deltaV(fp, 0);
    for (double r : {0.3, 1.0, 3.0, 10.0})
      CHECK(Gb(r) == Catch::Approx(Ga(r)).margin(1e-8));
  }
  SECTION("kernel obstruction raises") {
    bool threw = false;
    try {
      invert_deltaV([](double r) { return LamW(r) * std::exp(-r * r); }, 0);
    } catch (const NonSolvableError& e) {
      threw = true;
      CHECK(std::abs(e.inner_product) > 1e-3);
    }
    CHECK(threw);
  }
  SECTION("apply-then-invert round trip") {
    for (int ell : {0, 1, 2}) {
      auto u0 = [&](double r) { return std::pow(r, ell) * std::exp(-r * r); };
      auto du0 = [&](double r) {
        return (ell * std::pow(r, std::max(ell - 1, 0)) -
                2.0 * r * std::pow(r, ell)) *
               std::exp(-r * r);
      };
      auto f = [&](double r) {
        const double rr = std::max(r, 1e-9);
        const double e = std::exp(-rr * rr);
        // Closed-form (Delta_l + V) u0.
        const double upp =
            e * (ell * (ell - 1) * std::pow(rr, std::max(ell - 2, 0)) -
                 2.0 * (2 * ell + 1) * std::pow(rr, ell) +
                 4.0 * std::pow(rr, ell + 2));
        return upp + 2.0 * du0(rr) / rr -
               double(ell) * (ell + 1) * u0(rr) / (rr * rr) + V(rr) * u0(rr);
      };
      auto u = invert_deltaV(f, ell);
      // u may differ from u0 by a kernel element for l <= 1; fit it out.
      const double alpha =
          ell <= 1 ? (u(1.0) - u0(1.0)) / (ell == 0 ? LamW(1.0) : dW(1.0)) : 0.0;
      for (double r : {0.2, 0.7, 1.3, 2.5, 4.0, 8.0}) {
        const double ker = ell == 0 ? LamW(r) : (ell == 1 ? dW(r) : 0.0);
        CHECK(u(r) - alpha * ker == Catch::Approx(u0(r)).margin(1e-6));
      }
    }
  }
  SECTION("tail slope for an invertible degree") {
    auto u = invert_deltaV([](double r) { return r * r * std::exp(-r * r); }, 2);
    CHECK(u.p_inf == Catch::Approx(3.0).margin(0.02));
  }
  SECTION("linearity") {
    auto f1 = [](double r) { return r * r * std::exp(-r * r); };
    auto f2 = [](double r) { return r * r * std::exp(-0.5 * r * r); };
    auto u1 = invert_deltaV(f1, 2);
    auto u2 = invert_deltaV(f2, 2);
    auto u12 = invert_deltaV(
        [&](double r) { return 2.0 * f1(r) - 0.5 * f2(r); }, 2);
    for (double r : {0.5, 1.0, 2.0, 5.0})
      CHECK(u12(r) == Catch::Approx(2.0 * u1(r) - 0.5 * u2(r)).margin(1e-8));
  }
  SECTION("scaled potential") {
    const double lam = 2.0;
    auto u0 = [&](double r) { return std::exp(-lam * lam * r * r); };
    auto f = [&](double r) {
      const double rr = std::max(r, 1e-9);
      const double e = std::exp(-lam * lam * rr * rr);
      const double upp = e * (4.0 * std::pow(lam, 4) * rr * rr - 2.0 * lam * lam);
      const double up = -2.0 * lam * lam * rr * e;
      return upp + 2.0 * up / rr + lam * lam * V(lam * rr) * u0(rr);
    };
    auto u = invert_deltaV(f, 0, lam);
    CHECK(deltaV_residual(u, f, 0, lam) < 1e-6);
  }
}
