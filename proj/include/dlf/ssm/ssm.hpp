#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dlf/ssm/matrix.hpp"

namespace dlf::ssm {

/// dx = F x dt + L dw, E[dw dw^T] = Sigma_w dt; y_k = H x(t_k) + r_k.
struct ContinuousSSM {
  Eigen::MatrixXd F;
  Eigen::MatrixXd L;
  Eigen::MatrixXd Sigma_w;
  Eigen::RowVectorXd H;
  double R = 0.0;
  Eigen::MatrixXd P0;

  void validate() const;
};

/// x_k = A x_{k-1} + q, q ~ N(0, Q); y_k = H x_k + r, r ~ N(0, R).
template <class T>
struct BasicSSM {
  Mat<T> A;
  Mat<T> Q;
  Mat<T> H;  // 1 x m
  T R = T(0.0);
  Mat<T> m0;  // m x 1
  Mat<T> P0;
  double dt = 1.0;

  std::size_t dim() const { return A.rows(); }
};
using DiscreteSSM = BasicSSM<double>;

template <class T>
struct Belief {
  Mat<T> m;
  Mat<T> P;
};
using GaussianBelief = Belief<double>;

template <class T>
struct FilterStep {
  Belief<T> prior;
  Belief<T> posterior;
  T v = T(0.0);
  T S = T(0.0);
  Mat<T> K;
  T nll_increment = T(0.0);
};

template <class T>
struct FilterResult {
  std::vector<Belief<T>> beliefs;
  T nll = T(0.0);
};

class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetrize and clamp eigenvalues in [-1e-9, 0) to zero. Throws if the
/// matrix is further from PSD than that.
Mat<double> condition_covariance(const Mat<double>& P);

/// L with L L^T = S, from a symmetric eigendecomposition with negative
/// eigenvalues clipped to zero. `clipped` reports whether any were.
Eigen::MatrixXd psd_factor(const Mat<double>& S, bool* clipped = nullptr);

Eigen::MatrixXd expm(const Eigen::MatrixXd& M);

/// A = exp(F dt) and Q by matrix fraction decomposition.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const ContinuousSSM& cont, double dt);

/// Solves F P + P F^T + L Sigma_w L^T = 0. F must be Hurwitz.
Eigen::MatrixXd steady_state_covariance(const ContinuousSSM& cont);

template <class T>
Belief<T> kf_predict(const BasicSSM<T>& model, const Belief<T>& belief) {
  Belief<T> out;
  out.m = model.A * belief.m;
  out.P = model.A * belief.P * model.A.transpose() + model.Q;
  return out;
}

/// Measurement update of a predicted belief. The prior mean is taken as given,
/// which is what lets the hybrid filter replace its first component.
template <class T>
FilterStep<T> kf_update(const BasicSSM<T>& model, const Belief<T>& prior, double y) {
  using std::log;
  FilterStep<T> st;
  st.prior = prior;
  const Mat<T> Ht = model.H.transpose();
  const Mat<T> PHt = prior.P * Ht;
  const Mat<T> hm = model.H * prior.m;
  st.S = (model.H * PHt)[0] + model.R;
  if (!(ad::value_of(st.S) > 0.0)) throw SingularInnovation("kf: innovation variance is not positive");
  st.v = T(y) - hm[0];
  st.K = PHt * (T(1.0) / st.S);
  st.posterior.m = prior.m + st.K * st.v;
  Mat<T> P = prior.P - st.K * st.S * st.K.transpose();
  if constexpr (std::is_same_v<T, double>) {
    st.posterior.P = condition_covariance(P);
  } else {
    st.posterior.P = symmetrize(P);
  }
  st.nll_increment = 0.5 * log(2.0 * std::numbers::pi * st.S) + 0.5 * st.v * st.v / st.S;
  return st;
}

template <class T>
FilterStep<T> kf_step(const BasicSSM<T>& model, const Belief<T>& belief, double y) {
  return kf_update(model, kf_predict(model, belief), y);
}

template <class T>
FilterResult<T> kf_filter(const BasicSSM<T>& model, std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("kf_filter: empty sequence");
  FilterResult<T> out;
  out.beliefs.reserve(ys.size());
  Belief<T> b{model.m0, model.P0};
  for (double y : ys) {
    FilterStep<T> st = kf_step(model, b, y);
    out.nll = out.nll + st.nll_increment;
    b = st.posterior;
    out.beliefs.push_back(b);
  }
  return out;
}

std::vector<GaussianBelief> rts_smooth(const DiscreteSSM& model, const std::vector<GaussianBelief>& filtered);

}  // namespace dlf::ssm
