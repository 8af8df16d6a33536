#include "dlf/pinn/tableau.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dlf::pinn {

namespace {

// P_q(x) and P_q'(x) by the three-term recurrence.
std::pair<double, double> legendre(int q, double x) {
  double p0 = 1.0, p1 = x;
  if (q == 0) return {1.0, 0.0};
  for (int k = 2; k <= q; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double dp = q * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

// Roots x_k in (-1, 1) and weights w_k of the q-point Gauss–Legendre rule.
void gauss_nodes(int q, std::vector<double>& x, std::vector<double>& w) {
  x.assign(q, 0.0);
  w.assign(q, 0.0);
  for (int k = 0; k < q; ++k) {
    double r = std::cos(std::numbers::pi * (k + 0.75) / (q + 0.5));
    bool done = false;
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(q, r);
      const double dx = p / dp;
      r -= dx;
      if (std::abs(dx) <= 1e-15) {
        done = true;
        break;
      }
    }
    if (!done) throw std::runtime_error("gauss_legendre_tableau: Newton did not converge");
    const auto [p, dp] = legendre(q, r);
    (void)p;
    x[k] = r;
    w[k] = 2.0 / ((1.0 - r * r) * dp * dp);
  }
}

}  // namespace

ButcherTableau gauss_legendre_tableau(int q) {
  if (q < 1 || q > 100) throw std::invalid_argument("gauss_legendre_tableau: q must be in [1, 100]");
  std::vector<double> x, w;
  gauss_nodes(q, x, w);
  ButcherTableau t;
  t.q = q;
  t.c.resize(q);
  t.b.resize(q);
  // x descending from cos(), so c = (1 + x) / 2 reversed is ascending
  for (int k = 0; k < q; ++k) {
    t.c[q - 1 - k] = 0.5 * (1.0 + x[k]);
    t.b[q - 1 - k] = 0.5 * w[k];
  }
  if (q == 1) t.c[0] = 0.5;

  // barycentric weights of the nodes
  std::vector<double> bw(q, 1.0);
  for (int j = 0; j < q; ++j)
    for (int k = 0; k < q; ++k)
      if (k != j) bw[j] /= (t.c[j] - t.c[k]);
  auto lagrange = [&](double s, std::vector<double>& l) {
    for (int j = 0; j < q; ++j) {
      if (s == t.c[j]) {
        std::fill(l.begin(), l.end(), 0.0);
        l[j] = 1.0;
        return;
      }
    }
    double den = 0.0;
    for (int j = 0; j < q; ++j) {
      l[j] = bw[j] / (s - t.c[j]);
      den += l[j];
    }
    for (auto& v : l) v /= den;
  };

  // a_ij = int_0^{c_i} l_j(s) ds with the same q-point rule mapped to [0, c_i]
  t.a.assign(static_cast<std::size_t>(q) * q, 0.0);
  std::vector<double> l(q);
  for (int i = 0; i < q; ++i) {
    for (int m = 0; m < q; ++m) {
      const double s = t.c[i] * 0.5 * (1.0 + x[m]);
      lagrange(s, l);
      const double wm = 0.5 * t.c[i] * w[m];
      for (int j = 0; j < q; ++j) t.a[static_cast<std::size_t>(i) * q + j] += wm * l[j];
    }
  }
  return t;
}

double order_condition_error(const ButcherTableau& tab, int order) {
  double worst = 0.0;
  const int q = tab.q;
  for (int m = 1; m <= order; ++m) {
    double sb = 0.0;
    for (int j = 0; j < q; ++j) sb += tab.b[j] * std::pow(tab.c[j], m - 1);
    worst = std::max(worst, std::abs(sb - 1.0 / m));
    for (int i = 0; i < q; ++i) {
      double sa = 0.0;
      for (int j = 0; j < q; ++j) sa += tab.A(i, j) * std::pow(tab.c[j], m - 1);
      worst = std::max(worst, std::abs(sa - std::pow(tab.c[i], m) / m));
    }
  }
  return worst;
}

double irk_step(const ButcherTableau& tab, const std::function<double(double)>& f,
                const std::function<double(double)>& dfdu, double u0, double dt) {
  const int q = tab.q;
  Eigen::VectorXd U = Eigen::VectorXd::Constant(q, u0);
  Eigen::MatrixXd A(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) A(i, j) = tab.A(i, j);
  Eigen::VectorXd F(q), G(q);
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    for (int j = 0; j < q; ++j) F[j] = f(U[j]);
    G = U - Eigen::VectorXd::Constant(q, u0) - dt * A * F;
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(q, q);
    for (int j = 0; j < q; ++j) J.col(j) -= dt * A.col(j) * dfdu(U[j]);
    const Eigen::VectorXd dU = J.partialPivLu().solve(G);
    U -= dU;
    if (!U.allFinite()) throw std::runtime_error("irk_step: non-finite stage values");
    if (dU.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + U.lpNorm<Eigen::Infinity>())) {
      converged = true;
      break;
    }
  }
  for (int j = 0; j < q; ++j) F[j] = f(U[j]);
  if (!converged) {
    // accept if the stage residual is at round-off level
    G = U - Eigen::VectorXd::Constant(q, u0) - dt * A * F;
    if (G.lpNorm<Eigen::Infinity>() > 1e-13 * (1.0 + U.lpNorm<Eigen::Infinity>())) {
      throw std::runtime_error("irk_step: Newton iteration did not converge");
    }
  }
  double u1 = u0;
  for (int j = 0; j < q; ++j) u1 += dt * tab.b[j] * F[j];
  return u1;
}

}  // namespace dlf::pinn
