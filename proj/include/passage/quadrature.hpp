#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace passage {

// 16-point Gauss-Legendre rule on [-1,1]. Nodes are symmetric about zero, so
// only the positive half is stored as (node, weight) pairs.
inline constexpr std::array<std::pair<double, double>, 8> kGauss16Half = {{
    {0.095012509837637440185, 0.18945061045506849629},
    {0.28160355077925891323, 0.18260341504492358887},
    {0.45801677765722738634, 0.16915651939500253819},
    {0.61787624440264374845, 0.14959598881657673208},
    {0.7554044083550030339, 0.12462897125553387205},
    {0.86563120238783174388, 0.09515851168249278481},
    {0.94457502307323257608, 0.062253523938647892863},
    {0.9894009349916499326, 0.027152459411754094852},
}};

// Single-panel 16-point Gauss-Legendre quadrature over [a, b].
template <class F>
double gauss16(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (const auto& [x, w] : kGauss16Half) {
    sum += w * (f(mid - half * x) + f(mid + half * x));
  }
  return sum * half;
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // accumulated local panel-difference estimates
  int panels = 0;
  bool converged = true;

  operator double() const { return value; }
};

// Adaptive bisection quadrature. A segment is accepted when the one-panel and
// two-panel results agree within the local share of the tolerance budget.
// Intended for smooth integrands; the panel cap guards against runaway
// subdivision rather than enabling singular endpoints.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double rel = 1e-12,
                           double abs_tol = 1e-14) {
  QuadratureResult out;
  if (a == b) return out;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }

  constexpr int kMaxDepth = 14;
  constexpr int kMaxPanels = 1 << 14;

  struct Seg {
    double lo, hi, whole;
    int depth;
  };
  std::array<Seg, 4 * kMaxDepth + 8> stack;
  int top = 0;
  stack[top++] = {a, b, gauss16(f, a, b), 0};
  out.panels = 1;

  const double span = b - a;
  double total = 0.0;
  while (top > 0) {
    const Seg s = stack[--top];
    const double mid = 0.5 * (s.lo + s.hi);
    const double left = gauss16(f, s.lo, mid);
    const double right = gauss16(f, mid, s.hi);
    out.panels += 2;
    const double refined = left + right;
    const double err = std::abs(refined - s.whole);
    const double frac = (s.hi - s.lo) / span;
    const double budget =
        std::max(abs_tol * frac, rel * std::abs(refined) + abs_tol * frac);
    if (err <= budget || s.depth >= kMaxDepth || out.panels >= kMaxPanels) {
      if (err > budget) out.converged = false;
      total += refined;
      out.error += err;
    } else {
      stack[top++] = {s.lo, mid, left, s.depth + 1};
      stack[top++] = {mid, s.hi, right, s.depth + 1};
    }
  }
  out.value = sign * total;
  return out;
}

}  // namespace passage
