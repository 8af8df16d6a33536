#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dlf/hybrid/hybrid.hpp"
#include "dlf/kernels/kernels.hpp"
#include "dlf/pinn/model.hpp"
#include "dlf/sim/systems.hpp"

namespace dlf::app {

/// Bad or inconsistent configuration, including missing prerequisites and
/// artifacts produced under a different config. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure while writing artifacts. Exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InputKind { Exponential, Matern, HybridExponential, HybridMatern };

std::string to_string(InputKind k);
InputKind input_kind_from_string(const std::string& s);
bool is_hybrid(InputKind k);
kernels::KernelKind base_kernel(InputKind k);

enum class OutputKind { Pinn, Ffnn };

std::string to_string(OutputKind k);
OutputKind output_kind_from_string(const std::string& s);

struct SignalConfig {
  double offset = 0.0;
  double scale = 0.0;
  std::vector<double> periods;
};

struct SimulatorConfig {
  std::size_t samples = 0;
  double dt = 1.0;
  std::array<std::size_t, 3> split{};
  /// Signal coefficients of input channel i are drawn with seed + i.
  std::uint64_t seed = 0;
  /// In the system's input order.
  std::vector<std::pair<std::string, SignalConfig>> signals;
  sim::CstrParams cstr;
  sim::PfrParams adpfr;
  sim::FlotationParams flotation;
};

struct HybridConfig {
  hybrid::HybridFitConfig fit;
  /// Start the kernel parameters from the conventional fit of the same family.
  bool init_from_conventional = true;
};

struct OutputConfig {
  int q = 10;
  std::vector<int> hidden{32, 32};
  int rate_hidden = 100;
  bool residual_skip = true;
  /// Affine input/output scaling fitted on the labelled training pairs.
  bool standardize = false;
  /// Labelled training pairs drawn from the training split (0: all).
  std::size_t train_points = 0;
  std::size_t val_points = 0;
  std::size_t test_points = 0;
  /// Unlabelled physics points (PINNs that carry their state).
  std::size_t collocation = 0;
  double margin = 0.5;
  std::size_t node_stride = 1;
  pinn::TrainConfig train;
};

struct ForecasterConfig {
  int H = 10;
  int M = 200;
  int init_steps = 3;
  /// Evaluation origins over the test split, every `stride` rows, at most
  /// `max_origins` of them (0: all).
  std::size_t stride = 60;
  std::size_t max_origins = 0;
  /// Origin of the `forecast` command; -1 picks the first evaluation origin.
  long origin = -1;
};

struct ExperimentConfig {
  pinn::System system = pinn::System::Cstr;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  /// Default artifact directory (--out overrides). Not part of any hash.
  std::string out;
  std::vector<InputKind> input_models;
  std::vector<OutputKind> output_models;
  SimulatorConfig simulators;
  kernels::FitConfig kernels;
  HybridConfig hybrid_ssm;
  OutputConfig pinn;
  ForecasterConfig forecaster;
};

/// Top-level tables: experiment, simulators, kernels, hybrid_ssm, pinn,
/// forecaster. Missing keys take system defaults; unknown keys, wrong types
/// and out-of-range values throw ConfigError. `seed` overrides
/// experiment.seed, which is also the default simulator seed.
ExperimentConfig parse_config(const nlohmann::json& j, std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

/// Fully expanded config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

/// Full-size networks and training budgets (--paper-scale). Long-running.
void apply_paper_scale(ExperimentConfig& c);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t h);

/// Hashes of what each artifact depends on.
std::string dataset_hash(const ExperimentConfig& c);
std::string input_models_hash(const ExperimentConfig& c);
std::string output_models_hash(const ExperimentConfig& c);
std::string experiment_hash(const ExperimentConfig& c);

}  // namespace dlf::app
