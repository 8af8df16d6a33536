#pragma once

#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "dlf/ad/value.hpp"
#include "dlf/pinn/tableau.hpp"
#include "dlf/sim/systems.hpp"

namespace dlf::pinn {

/// N[C] = -(F/V) C_in + (F/V) C + k C^2
template <class T>
T cstr_operator(const T& C, double c_in, const sim::CstrParams& p) {
  return p.F_over_V * C + p.k * (C * C) - p.F_over_V * c_in;
}

/// N[C] = -D C_zz + v C_z + k C^2, given the stage value and its z-derivatives.
template <class T>
T pfr_operator(const T& u, const T& u_z, const T& u_zz, double v, const sim::PfrParams& p) {
  return -p.D * u_zz + v * u_z + p.k * (u * u);
}

struct FlotationInputsAt {
  double C_feed = 0.0;
  double Q_feed = 0.0;
  double Q_t = 0.0;
  double Q_c = 0.0;
};

/// (N_p, N_f) for the pulp and froth concentrations at one stage.
template <class T>
std::pair<T, T> flotation_operators(const T& Cp, const T& Cf, const FlotationInputsAt& x, const T& R,
                                    const sim::FlotationParams& p) {
  const double feed = x.C_feed * (p.rho_feed / p.rho_p) * (x.Q_feed / p.V_p);
  T np = (x.Q_t / p.V_p) * Cp + R / (p.rho_p * p.V_p) - feed;
  T nf = (x.Q_c / p.V_f) * Cf - R / (p.rho_f * p.V_f);
  return {np, nf};
}

/// Implied u_n from each network output: for i < q,
///   u_n^i = u_{n+c_i} + dt sum_j a_ij N_j,
/// and u_n^{q+1} = u_{n+1} + dt sum_j b_j N_j. Returns u_n^i - u_n (q + 1 entries).
template <class T>
std::vector<T> stage_residuals(const ButcherTableau& tab, double dt, std::span<const T> outputs,
                               std::span<const T> N, double u_n) {
  const int q = tab.q;
  std::vector<T> r;
  r.reserve(q + 1);
  if constexpr (std::is_same_v<T, ad::Value>) {
    ad::Tape* tape = nullptr;
    for (const auto& v : outputs) tape = tape ? tape : v.tape();
    for (const auto& v : N) tape = tape ? tape : v.tape();
    if (tape) {
      std::vector<double> w(q + 1);
      std::vector<ad::Value> x(q + 1);
      w[0] = 1.0;
      for (int j = 0; j < q; ++j) x[j + 1] = N[j];
      for (int i = 0; i <= q; ++i) {
        x[0] = outputs[i];
        for (int j = 0; j < q; ++j) w[j + 1] = dt * (i < q ? tab.A(i, j) : tab.b[j]);
        r.push_back(tape->lincomb(w, x, -u_n));
      }
      return r;
    }
  }
  for (int i = 0; i <= q; ++i) {
    T acc = outputs[i] - u_n;
    for (int j = 0; j < q; ++j) {
      const double w = i < q ? tab.A(i, j) : tab.b[j];
      acc += (dt * w) * N[j];
    }
    r.push_back(acc);
  }
  return r;
}

}  // namespace dlf::pinn
