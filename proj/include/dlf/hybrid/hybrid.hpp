#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dlf/ad/nn.hpp"
#include "dlf/kernels/kernels.hpp"
#include "dlf/ssm/ssm.hpp"

namespace dlf::hybrid {

/// Augmented kernel SSM whose first mean component is predicted by an LSTM
/// over the last `lag` measurements. Covariances still use the linear A.
struct HybridSSM {
  kernels::KernelKind kind = kernels::KernelKind::Matern32Augmented;
  kernels::KernelParams params;
  ad::Lstm lstm;
  int lag = 3;
  double dt = 1.0;
  /// The LSTM sees (y - shift) / scale and its output is mapped back.
  double shift = 0.0;
  double scale = 1.0;
  /// Replace the LSTM by the first row of A (a_1^T m). Used to check the
  /// hybrid code paths against the conventional filter.
  bool linear_shim = false;

  std::size_t state_dim() const { return kernels::state_dim(kind); }
  kernels::KernelModel kernel() const { return {kind, params, dt}; }
  ssm::DiscreteSSM linear(double y1 = 0.0) const { return kernels::build(kernel(), y1); }

  /// LSTM prediction in data units. `window` is most recent first.
  double predict_first(std::span<const double> window) const;

  /// [log theta (4), LSTM parameters].
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> p);
};

/// Prediction step with the first mean component supplied by the caller:
/// m^- = [first; A m (rows 2..)], P^- = A P A^T + Q.
template <class T>
ssm::Belief<T> hybrid_predict(const ssm::BasicSSM<T>& lin, const ssm::Belief<T>& b, const T& first) {
  ssm::Belief<T> out = ssm::kf_predict(lin, b);
  out.m[0] = first;
  return out;
}

template <class T>
ssm::FilterStep<T> hybrid_kf_step(const ssm::BasicSSM<T>& lin, const ssm::Belief<T>& b, const T& first, double y) {
  return ssm::kf_update(lin, hybrid_predict(lin, b, first), y);
}

/// One modified filter step. `window` = [y_{k-1}, ..., y_{k-lag}].
ssm::FilterStep<double> hybrid_kf_step(const HybridSSM& model, const ssm::DiscreteSSM& lin,
                                       const ssm::GaussianBelief& b, std::span<const double> window, double y);

/// Filters ys[start..] from the prior anchored at ys[start]. LSTM windows
/// may reach back before `start`; a step with fewer than `lag` earlier
/// measurements uses the linear prediction instead.
ssm::FilterResult<double> hybrid_filter(const HybridSSM& model, std::span<const double> ys, std::size_t start = 0);

/// NLL accumulated over ys[from..] while filtering all of ys.
double hybrid_nll(const HybridSSM& model, std::span<const double> ys, std::size_t from = 0);

/// Records the NLL of ys[begin, end) on `tape`, with `p` = [log theta, LSTM
/// parameters] as tape values. The filter starts from `belief` (the anchored
/// prior when begin == 0) and the final belief is written back as constants,
/// which is how long sequences are split into chunks.
ad::Value record_nll(ad::Tape& tape, const HybridSSM& shape, std::span<const ad::Value> p, std::span<const double> ys,
                     std::size_t begin, std::size_t end, ssm::GaussianBelief& belief);

struct HybridFitConfig {
  int max_iters = 500;
  double lr = 1e-3;
  int patience = 1000;
  double tol = 1e-5;
  int hidden = 16;
  int layers = 1;
  int lag = 3;
  /// Steps per backpropagation chunk; the belief is carried across chunks.
  std::size_t chunk = 1000;
  /// Train on the last `train_window` points only (0: all).
  std::size_t train_window = 0;
  bool standardize = true;
  /// Start the LSTM head's bias and skip weights from a least-squares AR fit
  /// of the training windows.
  bool warm_start_head = true;
  std::uint64_t seed = 0;
  std::optional<kernels::KernelParams> init;
};

struct HybridFitReport {
  HybridSSM model;
  double best_score = 0.0;  // validation NLL if given, else training NLL
  int best_iter = 0;
  int iters = 0;
  std::size_t skipped_steps = 0;
};

/// Joint Adam fit of the kernel parameters and the LSTM on the filter NLL.
HybridFitReport fit_hybrid(kernels::KernelKind kind, std::span<const double> ys, std::span<const double> ys_val,
                           double dt, const HybridFitConfig& cfg);

/// One Monte Carlo transition x_h = [LSTM(window); a_2^T x; (a_3^T x)] + q,
/// q = noise_factor * N(0, I). `window` is most recent first and is shifted
/// in place with the new first component.
void hybrid_forecast_step(const HybridSSM& model, const ssm::DiscreteSSM& lin, const Eigen::MatrixXd& noise_factor,
                          std::vector<double>& state, std::vector<double>& window, std::mt19937_64& rng);

/// Directory with kernel.txt and lstm.ckpt.
void save_hybrid(const std::filesystem::path& dir, const HybridSSM& model);
HybridSSM load_hybrid(const std::filesystem::path& dir);

}  // namespace dlf::hybrid
