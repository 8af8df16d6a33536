#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dlf/app/config.hpp"
#include "dlf/forecast/forecast.hpp"

namespace dlf::app {

struct RunOptions {
  std::filesystem::path out;
  /// Overwrite artifacts whose manifest records a different config hash.
  bool force = false;
  /// Progress messages; nullptr silences them.
  std::ostream* log = nullptr;
};

/// Artifact layout under the output directory.
namespace layout {
inline const char* dataset = "dataset.csv";
inline const char* dataset_manifest = "dataset.manifest.json";
inline const char* inputs = "inputs";
inline const char* outputs = "outputs";
inline const char* forecast = "forecast";
inline const char* evaluation = "evaluation";
inline const char* report = "report.md";
inline const char* report_manifest = "report.manifest.json";
inline const char* manifest = "manifest.json";
}  // namespace layout

sim::Dataset simulate(const ExperimentConfig& c);

/// Output model shape for a config; ADPFR profiles use the dataset's stored nodes.
pinn::OutputModelConfig output_model_config(const ExperimentConfig& c, OutputKind kind, const sim::Dataset& ds);

/// Loaders that check the manifests against the config and throw ConfigError
/// on a mismatch.
sim::Dataset load_dataset(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<forecast::InputModel> load_input_models(const ExperimentConfig& c, const std::filesystem::path& out,
                                                    InputKind kind, const sim::Dataset& ds);
pinn::OutputModel load_output_model(const ExperimentConfig& c, const std::filesystem::path& out, OutputKind kind,
                                    const sim::Dataset& ds);

/// Indices of the output channels that metrics are reported for: all of
/// them, except the ADPFR where only the outlet is scored.
std::vector<std::size_t> reported_outputs(const sim::Dataset& ds, pinn::System sys);

/// Evaluation origins over the test split.
std::vector<std::size_t> evaluation_origins(const ExperimentConfig& c, const sim::Dataset& ds);

/// Metrics averaged over origins. output_model is empty for input rows.
struct MetricRow {
  std::string input_model;
  std::string output_model;
  std::string channel;
  std::size_t origins = 0;
  double mse = 0.0;
  double mae = 0.0;
  double mre = 0.0;
  double mean_loglik = 0.0;
  /// Fraction of (origin, step) pairs whose truth lies in the 95% band.
  double coverage = 0.0;
  std::vector<double> loglik;
};

void cmd_simulate(const ExperimentConfig& c, const RunOptions& o);
void cmd_train_input(const ExperimentConfig& c, const RunOptions& o);
void cmd_train_output(const ExperimentConfig& c, const RunOptions& o);
void cmd_forecast(const ExperimentConfig& c, const RunOptions& o);
std::vector<MetricRow> cmd_evaluate(const ExperimentConfig& c, const RunOptions& o);
void cmd_report(const ExperimentConfig& c, const RunOptions& o);

/// Command-line entry point. Exit codes: 0 ok, 1 I/O failure, 2 config
/// error, 3 numerical failure.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace dlf::app
