#pragma once

#include <functional>
#include <vector>

namespace dlf::pinn {

/// Runge–Kutta coefficients; `a` is q x q row-major.
struct ButcherTableau {
  int q = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;

  double A(int i, int j) const { return a[static_cast<std::size_t>(i) * q + j]; }
};

/// q-stage Gauss–Legendre collocation scheme (order 2q, A-stable).
/// Nodes are the roots of the shifted Legendre polynomial P_q(2x - 1), found
/// by Newton iteration; a_ij and b_j integrate the Lagrange basis on the nodes.
ButcherTableau gauss_legendre_tableau(int q);

/// Max violation of sum_j a_ij c_j^(m-1) = c_i^m / m and sum_j b_j c_j^(m-1) = 1/m
/// over m = 1..order.
double order_condition_error(const ButcherTableau& tab, int order);

/// One implicit RK step of the scalar autonomous ODE u' = f(u). The stage
/// equations are solved by Newton's method with the exact Jacobian.
double irk_step(const ButcherTableau& tab, const std::function<double(double)>& f,
                const std::function<double(double)>& dfdu, double u0, double dt);

}  // namespace dlf::pinn
