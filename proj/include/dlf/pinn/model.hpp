#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dlf/ad/checkpoint.hpp"
#include "dlf/ad/nn.hpp"
#include "dlf/ad/value.hpp"
#include "dlf/pinn/operators.hpp"
#include "dlf/pinn/tableau.hpp"
#include "dlf/sim/systems.hpp"

namespace dlf::pinn {

enum class System { Cstr, Adpfr, Flotation };

std::string to_string(System s);
System system_from_string(const std::string& s);

struct OutputModelConfig {
  System system = System::Cstr;
  /// false: data-driven baseline with one output per state, trained on MSE_u only.
  bool physics = true;
  int q = 10;
  double dt = 1.0;
  std::vector<int> hidden{32, 32};
  int rate_hidden = 100;
  /// Networks predict increments over the carried state (CSTR, flotation).
  bool residual_skip = true;
  sim::CstrParams cstr;
  sim::PfrParams pfr;
  sim::FlotationParams flotation;
  /// ADPFR: axial coordinates the full-profile prediction is evaluated on.
  std::vector<double> profile_z;
  /// Optional fixed affine scaling (empty: none). Network inputs become
  /// (in - input_shift) / input_scale and every network output of state s is
  /// multiplied by output_scale[s] before the skip connection.
  std::vector<double> input_shift;
  std::vector<double> input_scale;
  std::vector<double> output_scale;
};


/// One snapshot pair. `x` holds the exogenous inputs paired with t_{n+1}
/// (ADPFR: C_in, v, z). `u_next` is empty for unlabelled collocation points.
struct Sample {
  std::vector<double> x;
  std::vector<double> u_n;
  std::vector<double> u_next;
};

struct LossParts {
  double f = 0.0;
  double u = 0.0;
  double b = 0.0;
};

/// Network outputs for one sample as recorded on a tape.
struct Forward {
  /// stages[s] = [u_{n+c_1}, ..., u_{n+c_q}, u_{n+1}] for state s (just
  /// [u_{n+1}] for the baseline).
  std::vector<std::vector<ad::Value>> stages;
  /// ADPFR: first and second z-derivatives of the q stage outputs.
  std::vector<ad::Value> u_z, u_zz;
  /// Flotation: rate estimate and the two values it was computed from.
  ad::Value rate;
  std::vector<ad::Value> rate_inputs;
};

/// Discrete-time PINN head (or its data-driven counterpart) for one of the
/// three systems. Parameters are one flat vector: state network(s), then the
/// flotation rate network.
class OutputModel {
 public:
  OutputModel() = default;
  explicit OutputModel(OutputModelConfig cfg);

  const OutputModelConfig& config() const { return cfg_; }
  const ButcherTableau& tableau() const { return tab_; }
  int state_dim() const { return cfg_.system == System::Flotation ? 2 : 1; }
  int input_dim() const;
  bool carries_state() const { return cfg_.system != System::Adpfr; }
  int outputs_per_state() const { return cfg_.physics ? cfg_.q + 1 : 1; }

  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void init(std::mt19937_64& rng);

  /// u_{n+1} for one sample, double precision.
  std::vector<double> predict(std::span<const double> x, std::span<const double> u_n) const;

  /// One recursive step: exogenous inputs at t_{n+1} and the state at t_n to
  /// the state at t_{n+1}. For the ADPFR the state is the profile on
  /// config().profile_z and the previous profile is not used.
  std::vector<double> step(std::span<const double> inputs, std::span<const double> state) const;

  /// deriv_order (ADPFR only): 1 records u_z, 2 also u_zz, for the q stage outputs.
  Forward forward(ad::Tape& tape, std::span<const ad::Value> params, const Sample& s, int deriv_order = 0) const;

  /// Residuals u_n^i - u_n, i = 1..q+1, per state (concatenated).
  std::vector<ad::Value> residuals(ad::Tape& tape, std::span<const ad::Value> params, const Sample& s) const;

  /// MSE_f + MSE_u (+ MSE_b for the ADPFR) for a PINN; MSE_u for the baseline.
  ad::Value loss(ad::Tape& tape, std::span<const ad::Value> params, std::span<const Sample> batch,
                 LossParts* parts = nullptr) const;
  double loss(std::span<const double> params, std::span<const Sample> batch, LossParts* parts = nullptr) const;

  /// Mean squared error of u_{n+1} over labelled samples.
  double mse(std::span<const Sample> batch) const;

  std::vector<ad::Record> records() const;
  void load_records(const std::vector<ad::Record>& recs);

 private:
  std::vector<double> net_input(std::span<const double> x, std::span<const double> u_n) const;
  double out_scale(int s) const { return cfg_.output_scale.empty() ? 1.0 : cfg_.output_scale[s]; }
  std::vector<ad::Value> residuals_from(const Forward& f, const Sample& s) const;

  OutputModelConfig cfg_;
  ButcherTableau tab_;
  std::vector<ad::Mlp> nets_;
  ad::Mlp rate_net_;
  std::vector<std::size_t> offsets_;  // start of each network's block; rate net last
  std::vector<double> params_;
};

/// Snapshot pairs (n, n+1) for rows first <= n < n+1 < last. ADPFR datasets
/// yield one sample per (row, stored node) with node stride `node_stride`.
std::vector<Sample> transition_samples(const sim::Dataset& ds, System sys, std::size_t first, std::size_t last,
                                       std::size_t node_stride = 1);

/// Uniformly chosen subset of size n (without replacement, order preserved).
std::vector<Sample> random_subset(std::span<const Sample> all, std::size_t n, std::mt19937_64& rng);

/// Unlabelled points for the physics loss, drawn uniformly from the bounding
/// box of (x, u_n) over `labelled`, widened by `margin` times each range.
/// Only meaningful for models that carry their state.
std::vector<Sample> collocation_samples(std::span<const Sample> labelled, std::size_t n, double margin,
                                        std::mt19937_64& rng);

/// Scaling from labelled samples: input mean/std, and the std of u_{n+1} - u_n
/// (of u_{n+1} without state carry). Zero spreads become 1.
void fit_scaling(OutputModelConfig& cfg, std::span<const Sample> labelled);

/// Axial positions parsed from ADPFR output channel names "C@<z>".
std::vector<double> profile_grid(const sim::Dataset& ds);

struct TrainConfig {
  int epochs = 20000;
  double lr = 1e-3;
  int patience = 30000;
  double tol = 1e-5;
  int eval_every = 10;
  std::uint64_t seed = 0;
};

struct TrainReport {
  double best_val = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t skipped_steps = 0;
  double final_train_loss = 0.0;
};

/// Full-batch Adam on model.loss(). Validation MSE is checked every
/// eval_every epochs; the best-validation parameters are restored at the end.
/// When `log` is given, one "epoch,train_loss,val_loss" row is written per check.
TrainReport train_output_model(OutputModel& model, std::span<const Sample> train, std::span<const Sample> val,
                               const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace dlf::pinn
