#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "dlf/ad/adam.hpp"
#include "dlf/ssm/ssm.hpp"

namespace dlf::kernels {

enum class KernelKind { Matern32Augmented, ExponentialAugmented };

std::string to_string(KernelKind kind);
KernelKind kind_from_string(const std::string& s);
std::size_t state_dim(KernelKind kind);

/// theta = {lambda, q_w1, q_w2, R}, stored as logs.
struct KernelParams {
  std::array<double, 4> log{};

  static KernelParams natural(double lambda, double q_w1, double q_w2, double R);
  double lambda() const { return std::exp(log[0]); }
  double q_w1() const { return std::exp(log[1]); }
  double q_w2() const { return std::exp(log[2]); }
  double R() const { return std::exp(log[3]); }
};

struct KernelModel {
  KernelKind kind = KernelKind::Matern32Augmented;
  KernelParams params;
  double dt = 1.0;
};

/// Initial guess from data: lambda = 1/(10 dt), q_w1 = var, q_w2 = 0.1 var / T, R = 0.01 var.
KernelParams initial_params(std::span<const double> ys, double dt);

// Continuous models: the augmented systems and their stationary blocks.
ssm::ContinuousSSM matern32_continuous(const KernelParams& p);
ssm::ContinuousSSM exponential_continuous(const KernelParams& p);
ssm::ContinuousSSM matern32_stationary(const KernelParams& p);
ssm::ContinuousSSM exponential_stationary(const KernelParams& p);

/// Closed-form augmented Matérn-3/2 model. `log_theta` = log{lambda, q_w1, q_w2, R}.
/// Prior: m0 = [y1, 0, y1], P0 = diag(q_w1/(4 lambda^3), q_w1/(4 lambda), 1).
template <class T>
ssm::BasicSSM<T> build_matern32(const std::array<T, 4>& log_theta, double dt, double y1 = 0.0) {
  using std::exp;
  if (!(dt > 0.0)) throw std::invalid_argument("build_matern32: dt must be positive");
  const T lam = exp(log_theta[0]);
  const T q1 = exp(log_theta[1]);
  const T q2 = exp(log_theta[2]);
  const T ld = lam * dt;
  const T e1 = exp(-ld);
  const T e2 = e1 * e1;
  const T lam2 = lam * lam;
  const T lam3 = lam2 * lam;

  ssm::BasicSSM<T> m;
  m.dt = dt;
  m.A = ssm::Mat<T>(3, 3);
  m.A(0, 0) = (1.0 + ld) * e1;
  m.A(0, 1) = dt * e1;
  m.A(0, 2) = 1.0 - (1.0 + ld) * e1;
  m.A(1, 0) = -(lam2 * dt) * e1;
  m.A(1, 1) = (1.0 - ld) * e1;
  m.A(1, 2) = lam2 * dt * e1;
  m.A(2, 2) = T(1.0);

  const T ld2 = ld * ld;
  const T s11 = q1 / (4.0 * lam3) * (1.0 - e2 * (1.0 + 2.0 * ld + 2.0 * ld2));
  const T s12 = q1 * (dt * dt) * e2 / 2.0;
  const T s22 = q1 / (4.0 * lam) * (1.0 - e2 * (1.0 - 2.0 * ld + 2.0 * ld2));
  const T w = q2 * dt;
  m.Q = ssm::Mat<T>(3, 3);
  m.Q(0, 0) = s11 + w;
  m.Q(0, 1) = s12;
  m.Q(1, 0) = s12;
  m.Q(0, 2) = w;
  m.Q(2, 0) = w;
  m.Q(1, 1) = s22;
  m.Q(2, 2) = w;

  m.H = ssm::Mat<T>(1, 3);
  m.H(0, 0) = T(1.0);
  m.R = exp(log_theta[3]);
  m.m0 = ssm::Mat<T>(3, 1);
  m.m0[0] = T(y1);
  m.m0[2] = T(y1);
  m.P0 = ssm::Mat<T>(3, 3);
  m.P0(0, 0) = q1 / (4.0 * lam3);
  m.P0(1, 1) = q1 / (4.0 * lam);
  m.P0(2, 2) = T(1.0);
  return m;
}

/// Closed-form augmented exponential (OU + Wiener) model.
/// Prior: m0 = [y1, y1], P0 = diag(q_w1/(2 lambda), 1).
template <class T>
ssm::BasicSSM<T> build_exponential(const std::array<T, 4>& log_theta, double dt, double y1 = 0.0) {
  using std::exp;
  if (!(dt > 0.0)) throw std::invalid_argument("build_exponential: dt must be positive");
  const T lam = exp(log_theta[0]);
  const T q1 = exp(log_theta[1]);
  const T q2 = exp(log_theta[2]);
  const T e1 = exp(-(lam * dt));
  const T w = q2 * dt;

  ssm::BasicSSM<T> m;
  m.dt = dt;
  m.A = ssm::Mat<T>(2, 2);
  m.A(0, 0) = e1;
  m.A(0, 1) = 1.0 - e1;
  m.A(1, 1) = T(1.0);
  m.Q = ssm::Mat<T>(2, 2);
  m.Q(0, 0) = q1 * (1.0 - e1 * e1) / (2.0 * lam) + w;
  m.Q(0, 1) = w;
  m.Q(1, 0) = w;
  m.Q(1, 1) = w;
  m.H = ssm::Mat<T>(1, 2);
  m.H(0, 0) = T(1.0);
  m.R = exp(log_theta[3]);
  m.m0 = ssm::Mat<T>(2, 1);
  m.m0[0] = T(y1);
  m.m0[1] = T(y1);
  m.P0 = ssm::Mat<T>(2, 2);
  m.P0(0, 0) = q1 / (2.0 * lam);
  m.P0(1, 1) = T(1.0);
  return m;
}

template <class T>
ssm::BasicSSM<T> build(KernelKind kind, const std::array<T, 4>& log_theta, double dt, double y1 = 0.0) {
  return kind == KernelKind::Matern32Augmented ? build_matern32<T>(log_theta, dt, y1)
                                               : build_exponential<T>(log_theta, dt, y1);
}

inline ssm::DiscreteSSM build_matern32(const KernelParams& p, double dt, double y1 = 0.0) {
  return build_matern32<double>(p.log, dt, y1);
}
inline ssm::DiscreteSSM build_exponential(const KernelParams& p, double dt, double y1 = 0.0) {
  return build_exponential<double>(p.log, dt, y1);
}
inline ssm::DiscreteSSM build(const KernelModel& km, double y1 = 0.0) {
  return build<double>(km.kind, km.params.log, km.dt, y1);
}

struct FitConfig {
  int max_iters = 2000;
  double lr = 1e-2;
  int patience = 1000;
  double tol = 1e-5;
};

struct FitReport {
  KernelParams params;
  double best_score = 0.0;  // validation NLL if validation data given, else training NLL
  int best_iter = 0;
  int iters = 0;
  std::size_t skipped_steps = 0;
};

/// Filter NLL of `ys` under the model with prior anchored at ys[0].
double nll(const KernelModel& km, std::span<const double> ys);
/// NLL of `val` after filtering through `train` (the continuation likelihood).
double continuation_nll(const KernelModel& km, std::span<const double> train, std::span<const double> val);

/// Maximum likelihood fit with Adam on log-parameters. Starts from `init`
/// when given, else initial_params(ys, dt).
FitReport fit_kernel(KernelKind kind, std::span<const double> ys, double dt, const FitConfig& cfg,
                     std::span<const double> ys_val = {}, std::optional<KernelParams> init = std::nullopt);

/// Key-value text document: kind, lambda, q_w1, q_w2, R, dt.
void save_kernel(const std::filesystem::path& path, const KernelModel& km);
KernelModel load_kernel(const std::filesystem::path& path);

}  // namespace dlf::kernels
