#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace norad {

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.
// ---------------------------------------------------------------------------

template <std::size_t N>
using State = std::array<double, N>;

/// Integrate y' = f(t,y) from t0 to t1 with adaptive step control.  The
/// observer (if set) is called after every accepted step and may stop the
/// integration by returning false.
template <std::size_t N>
State<N> integrate_ode(
    const std::function<void(double, const State<N>&, State<N>&)>& f,
    State<N> y, double t0, double t1, double rtol = 1e-10, double atol = 1e-12,
    const std::function<bool(double, const State<N>&)>& observer = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double dir = t1 >= t0 ? 1.0 : -1.0;
  double t = t0;
  double h = dir * std::max(1e-8, std::abs(t1 - t0) * 1e-4);
  State<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  f(t, y, k1);
  std::size_t rejected_in_a_row = 0;
  while (dir * (t1 - t) > 0) {
    if (dir * (t + h - t1) > 0) h = t1 - t;
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                            a65 * k5[i]);
    f(t + h, ytmp, k6);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                            b6 * k6[i]);
    f(t + h, ynew, k7);
    double err = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                             e6 * k6[i] + e7 * k7[i]);
      const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err = std::max(err, std::abs(ei) / sc);
      if (!std::isfinite(ynew[i]) || !std::isfinite(ei)) err = 1e10;
    }
    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;
      rejected_in_a_row = 0;
      if (observer && !observer(t, y)) return y;
    } else if (++rejected_in_a_row > 60) {
      throw std::runtime_error("integrate_ode: step size underflow");
    }
    const double fac =
        std::clamp(0.9 * std::pow(err > 0 ? 1.0 / err : 1e8, 0.2), 0.2, 5.0);
    h *= fac;
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t)))
      throw std::runtime_error("integrate_ode: step size underflow");
  }
  return y;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (G7,K15) quadrature.
// ---------------------------------------------------------------------------

namespace detail {
// 15-point Kronrod abscissae/weights with embedded 7-point Gauss rule.
inline constexpr std::array<double, 8> gk_x = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0};
inline constexpr std::array<double, 8> gk_wk = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gk_wg = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Gk15Result {
  double val, err, resabs;  // integral, |K - G|, integral of |f|
};

inline Gk15Result gk15(const std::function<double(double)>& f, double a,
                       double b) {
  const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
  double k = 0, g = 0, ra = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double fx1 = f(c - hw * gk_x[i]);
    const double fx2 = (i == 7) ? fx1 : f(c + hw * gk_x[i]);
    double fsum = (i == 7) ? fx1 : fx1 + fx2;
    k += gk_wk[i] * fsum;
    ra += gk_wk[i] * ((i == 7) ? std::abs(fx1) : std::abs(fx1) + std::abs(fx2));
    if (i % 2 == 1) g += gk_wg[i / 2] * fsum;
  }
  k *= hw;
  g *= hw;
  ra *= hw;
  return {k, std::abs(k - g), ra};
}

inline void gk_adapt(const std::function<double(double)>& f, double a, double b,
                     double tol, int depth, double& total) {
  auto [val, err, resabs] = gk15(f, a, b);
  // The second condition accepts once |K - G| sits at the roundoff plateau of
  // the |f|-mass on the leaf; refining past that never reduces the error.
  if (err <= tol || err <= 1e-14 * resabs || depth >= 48) {
    total += val;
    return;
  }
  const double m = 0.5 * (a + b);
  gk_adapt(f, a, m, 0.5 * tol, depth + 1, total);
  gk_adapt(f, m, b, 0.5 * tol, depth + 1, total);
}
}  // namespace detail

/// Adaptive quadrature of f over [a,b] to the requested relative tolerance.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double rtol = 1e-12) {
  auto [rough, err0, resabs0] = detail::gk15(f, a, b);
  (void)err0;
  const double tol =
      std::max({std::abs(rough), 1e-14 * resabs0, 1e-300}) * rtol + 1e-300;
  double total = 0;
  detail::gk_adapt(f, a, b, tol, 0, total);
  return total;
}

/// Semi-infinite integral via the substitution r = a + s/(1-s), s in [0,1).
inline double integrate_to_infinity(const std::function<double(double)>& f,
                                    double a, double rtol = 1e-12) {
  return integrate(
      [&](double s) {
        const double om = 1.0 - s;
        return f(a + s / om) / (om * om);
      },
      0.0, 1.0 - 1e-12, rtol);
}

// ---------------------------------------------------------------------------
// Least squares helpers.
// ---------------------------------------------------------------------------

struct LineFit {
  double slope = 0, intercept = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  return {(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

/// Fit |y| ~ C x^{-p} by least squares on log-log samples; returns p.
/// Samples below the floor are discarded (they sit at the noise level).
inline double fit_decay_exponent(const std::vector<double>& x,
                                 const std::vector<double>& y,
                                 double floor = 1e-13) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(y[i]) > floor && x[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(std::abs(y[i])));
    }
  }
  if (lx.size() < 2)
    throw std::runtime_error("fit_decay_exponent: all samples below floor");
  return -fit_line(lx, ly).slope;
}

/// Bisection for a root of f on [a,b]; requires a sign change.
inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double xtol, int max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0) return a;
  if (fb == 0) return b;
  if ((fa > 0) == (fb > 0))
    throw std::runtime_error("bisect: no sign change in bracket");
  for (int i = 0; i < max_iter && (b - a) > xtol; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace norad
