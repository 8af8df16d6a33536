#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dlf/hybrid/hybrid.hpp"
#include "dlf/kernels/kernels.hpp"
#include "dlf/pinn/model.hpp"
#include "dlf/sim/systems.hpp"

namespace dlf::forecast {

struct ForecastConfig {
  int H = 10;
  int M = 200;
  int init_steps = 3;
  std::uint64_t seed = 0;
};

/// M sampled trajectories of length H, row-major (sample j, step h).
struct Ensemble {
  int M = 0;
  int H = 0;
  std::vector<double> v;

  Ensemble() = default;
  Ensemble(int m, int h) : M(m), H(h), v(static_cast<std::size_t>(m) * h, 0.0) {}
  double& at(int j, int h) { return v[static_cast<std::size_t>(j) * H + h]; }
  double at(int j, int h) const { return v[static_cast<std::size_t>(j) * H + h]; }

  std::vector<double> mean() const;
  /// Sample variance per step (0 for M = 1).
  std::vector<double> variance() const;
};

/// Per-channel input model: a conventional kernel SSM or a hybrid one.
struct InputModel {
  bool hybrid = false;
  kernels::KernelModel conventional;
  hybrid::HybridSSM hyb;

  static InputModel make_conventional(kernels::KernelModel km);
  static InputModel make_hybrid(hybrid::HybridSSM hm);
  /// Measurements needed before the origin: init_steps, plus the lag for hybrids.
  std::size_t history_needed(int init_steps) const;
};

/// Seed of the RNG stream for (channel, trajectory), derived from the master
/// seed by SplitMix64 mixing.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t channel, std::uint64_t trajectory);

/// Phase 1. `histories[i]` ends with y_N of channel i and holds at least
/// models[i].history_needed(cfg.init_steps) values. The filter runs over the
/// last init_steps of them; samples are drawn from N(m, P) and propagated
/// with process noise. `clipped` counts channels whose P needed eigenvalue
/// clipping before sampling.
std::vector<Ensemble> forecast_inputs(std::span<const InputModel> models,
                                      const std::vector<std::span<const double>>& histories, const ForecastConfig& cfg,
                                      int* clipped = nullptr);

/// Phase 2. Applies the one-step output model recursively along every input
/// trajectory, starting from `u0` (state at the origin). Returns one ensemble
/// per state component (ADPFR: per profile node).
std::vector<Ensemble> forecast_outputs(const pinn::OutputModel& model, std::span<const Ensemble> inputs,
                                       std::span<const double> u0);

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  double mre = 0.0;
  std::vector<double> loglik;  // per step
  double mean_loglik() const;
};

/// Point metrics on the ensemble mean and per-step Gaussian log-likelihood
/// log N(truth; mean, var + 1e-12). MRE skips |truth| < 1e-9.
Metrics metrics(const Ensemble& e, std::span<const double> truth);

/// Origins N with at least `history` rows in [begin, N] and N + H < end, every `stride` rows.
std::vector<std::size_t> forecast_origins(std::size_t begin, std::size_t end, int H, std::size_t history,
                                          std::size_t stride);

/// Both phases at one origin of a dataset. Input channels are taken in the
/// dataset's order, which is also the output model's input order.
struct OriginForecast {
  std::size_t origin = 0;
  std::vector<Ensemble> inputs;
  std::vector<Ensemble> outputs;
  int clipped = 0;
};
OriginForecast forecast_at(const sim::Dataset& ds, std::size_t origin, std::span<const InputModel> models,
                           const pinn::OutputModel* output_model, const ForecastConfig& cfg);

/// State the output model starts from at row n.
std::vector<double> output_state(const sim::Dataset& ds, std::size_t n);

/// "h,mean,lower95,upper95,truth" rows from a Gaussian fit per step.
void write_band(const std::filesystem::path& path, const Ensemble& e, std::span<const double> truth);

}  // namespace dlf::forecast
