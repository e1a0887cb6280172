#include "roadgen/spline.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace roadgen {

namespace {

// Pentadiagonal symmetric positive definite system, stored as three
// diagonals: diag[i] = A[i][i], sub1[i] = A[i+1][i], sub2[i] = A[i+2][i].
struct Pentadiagonal {
  std::vector<double> diag, sub1, sub2;
};

// In-place LDL^T factorization followed by a solve. Returns x with Ax = b.
std::vector<double> solve_pentadiagonal(Pentadiagonal a, std::vector<double> b) {
  const std::size_t m = a.diag.size();
  std::vector<double> d(m), e1(m, 0.0), e2(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double di = a.diag[i];
    if (i >= 1) di -= e1[i - 1] * e1[i - 1] * d[i - 1];
    if (i >= 2) di -= e2[i - 2] * e2[i - 2] * d[i - 2];
    d[i] = di;
    if (i + 1 < m) {
      double s = a.sub1[i];
      if (i >= 1) s -= e2[i - 1] * e1[i - 1] * d[i - 1];
      e1[i] = s / di;
    }
    if (i + 2 < m) e2[i] = a.sub2[i] / di;
  }
  // Forward: L z = b
  for (std::size_t i = 0; i < m; ++i) {
    if (i >= 1) b[i] -= e1[i - 1] * b[i - 1];
    if (i >= 2) b[i] -= e2[i - 2] * b[i - 2];
  }
  // Diagonal and backward: L^T x = D^{-1} z
  for (std::size_t i = 0; i < m; ++i) b[i] /= d[i];
  for (std::size_t i = m; i-- > 0;) {
    if (i + 1 < m) b[i] -= e1[i] * b[i + 1];
    if (i + 2 < m) b[i] -= e2[i] * b[i + 2];
  }
  return b;
}

struct ReinschSystem {
  // T: roughness Gram matrix of the natural spline's interior second
  // derivatives; QtQ: Gram matrix of the second-divided-difference map.
  Pentadiagonal t;     // sub2 unused (tridiagonal)
  Pentadiagonal qtq;
  std::vector<double> qty;
  std::vector<double> h;
};

ReinschSystem build_system(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t m = n - 2;
  ReinschSystem sys;
  sys.h.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sys.h[i] = x[i + 1] - x[i];
    if (sys.h[i] <= 0.0) throw std::invalid_argument("smoothing spline: sites must increase");
  }
  const auto& h = sys.h;

  sys.t.diag.resize(m);
  sys.t.sub1.assign(m, 0.0);
  sys.t.sub2.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    sys.t.diag[j] = (h[j] + h[j + 1]) / 3.0;
    if (j + 1 < m) sys.t.sub1[j] = h[j + 1] / 6.0;
  }

  // Column j of Q has entries 1/h_j, -(1/h_j + 1/h_{j+1}), 1/h_{j+1}
  // in rows j, j+1, j+2.
  const auto q_entry = [&](std::size_t row, std::size_t col) -> double {
    if (row == col) return 1.0 / h[col];
    if (row == col + 1) return -1.0 / h[col] - 1.0 / h[col + 1];
    if (row == col + 2) return 1.0 / h[col + 1];
    return 0.0;
  };

  sys.qtq.diag.assign(m, 0.0);
  sys.qtq.sub1.assign(m, 0.0);
  sys.qtq.sub2.assign(m, 0.0);
  sys.qty.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t row = j; row <= j + 2; ++row) {
      const double qr = q_entry(row, j);
      sys.qty[j] += qr * y[row];
      sys.qtq.diag[j] += qr * qr;
      if (j + 1 < m && row >= j + 1) sys.qtq.sub1[j] += qr * q_entry(row, j + 1);
      if (j + 2 < m && row == j + 2) sys.qtq.sub2[j] += qr * q_entry(row, j + 2);
    }
  }
  return sys;
}

// Fitted-value residual r = q * Q * gamma for the current multiplier q.
std::vector<double> residual_vector(const ReinschSystem& sys, const std::vector<double>& gamma,
                                    double q, std::size_t n) {
  const auto& h = sys.h;
  std::vector<double> r(n, 0.0);
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    r[j] += gamma[j] / h[j];
    r[j + 1] -= gamma[j] * (1.0 / h[j] + 1.0 / h[j + 1]);
    r[j + 2] += gamma[j] / h[j + 1];
  }
  for (double& v : r) v *= q;
  return r;
}

std::vector<double> solve_gamma(const ReinschSystem& sys, double q) {
  Pentadiagonal a = sys.t;
  for (std::size_t i = 0; i < a.diag.size(); ++i) {
    a.diag[i] += q * sys.qtq.diag[i];
    a.sub1[i] += q * sys.qtq.sub1[i];
    a.sub2[i] += q * sys.qtq.sub2[i];
  }
  return solve_pentadiagonal(std::move(a), sys.qty);
}

double residual_norm2(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace

std::vector<double> smoothing_spline_fit(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         double budget) {
  if (x.size() != y.size()) throw std::invalid_argument("smoothing spline: size mismatch");
  if (budget < 0.0) throw std::invalid_argument("smoothing spline: negative budget");
  const std::size_t n = x.size();
  // Validate before any early return so degenerate sites never slip through.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (x[i + 1] - x[i] <= 0.0)
      throw std::invalid_argument("smoothing spline: sites must increase");
  }
  if (budget == 0.0 || n <= 2) return y;  // interpolation limit

  // The least-squares line is the zero-roughness candidate: if its
  // residual already fits the budget, nothing smoother exists.
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  const double slope = sxy / sxx;
  std::vector<double> line(n);
  double line_residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    line[i] = mean_y + slope * (x[i] - mean_x);
    line_residual += (y[i] - line[i]) * (y[i] - line[i]);
  }
  if (line_residual <= budget) return line;

  const ReinschSystem sys = build_system(x, y);

  // The residual grows monotonically with the multiplier q, from 0 at
  // q = 0 toward the line residual; bisect for residual == budget and
  // return the bracketing side that respects the constraint.
  double q_hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const auto gamma = solve_gamma(sys, q_hi);
    if (residual_norm2(residual_vector(sys, gamma, q_hi, n)) >= budget) break;
    q_hi *= 4.0;
  }
  double q_lo = 0.0;
  for (int i = 0; i < 200 && (q_hi - q_lo) > 1e-15 * q_hi; ++i) {
    const double mid = 0.5 * (q_lo + q_hi);
    const auto gamma = solve_gamma(sys, mid);
    if (residual_norm2(residual_vector(sys, gamma, mid, n)) > budget) {
      q_hi = mid;
    } else {
      q_lo = mid;
    }
  }

  const auto gamma = solve_gamma(sys, q_lo);
  const auto r = residual_vector(sys, gamma, q_lo, n);
  std::vector<double> fitted(n);
  for (std::size_t i = 0; i < n; ++i) fitted[i] = y[i] - r[i];
  return fitted;
}

}  // namespace roadgen
