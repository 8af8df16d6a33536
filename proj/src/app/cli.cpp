#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "dlf/app/commands.hpp"

namespace dlf::app {

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

int run_verb(const std::string& verb, const ExperimentConfig& c, const RunOptions& o) {
  if (verb == "simulate") {
    cmd_simulate(c, o);
  } else if (verb == "train-input") {
    cmd_train_input(c, o);
  } else if (verb == "train-output") {
    cmd_train_output(c, o);
  } else if (verb == "forecast") {
    cmd_forecast(c, o);
  } else if (verb == "evaluate") {
    cmd_evaluate(c, o);
  } else if (verb == "report") {
    cmd_report(c, o);
    std::ifstream in(o.out / layout::report);
    std::cout << in.rdbuf();
  }
  return kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Dual-level forecasting: kernel SSM input forecasts feeding PINN output models"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool paper_scale = false;
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--seed", seed, "Override experiment.seed");
  app.add_option("--out", out, "Artifact directory (default: experiment.out)");
  app.add_flag("--force", force, "Overwrite artifacts produced by a different config");
  app.add_flag("--paper-scale", paper_scale, "Use the full network sizes and training budgets (slow)");
  app.add_flag("-q,--quiet", quiet, "No progress messages");

  const char* verbs[][2] = {{"simulate", "Generate the dataset"},
                            {"train-input", "Fit the input models for every input channel"},
                            {"train-output", "Train the one-step output models"},
                            {"forecast", "Forecast from one origin and write band files"},
                            {"evaluate", "Score every input/output model pair over the test origins"},
                            {"report", "Summarize the evaluation as a markdown table"}};
  for (const auto& v : verbs) app.add_subcommand(v[0], v[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    ExperimentConfig c = load_config(config_path, seed);
    if (paper_scale || c.paper_scale) {
      apply_paper_scale(c);
      std::cerr << "warning: paper-scale budgets (up to " << c.pinn.train.epochs
                << " output epochs, patience " << c.pinn.train.patience << "); expect very long runtimes\n";
    }
    RunOptions o;
    o.out = out.empty() ? std::filesystem::path(c.out) : std::filesystem::path(out);
    o.force = force;
    o.log = quiet ? nullptr : &std::cerr;
    return run_verb(verb, c, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dlf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace dlf::app
