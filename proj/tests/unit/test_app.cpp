#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "dlf/app/commands.hpp"

using namespace dlf;
using namespace dlf::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_cstr() {
  return json::parse(R"({
    "experiment": {"system": "cstr", "seed": 3, "input_models": ["exponential", "hybrid_matern"],
                   "output_models": ["pinn", "ffnn"]},
    "simulators": {"samples": 400, "split": [300, 50, 50]},
    "kernels": {"max_iters": 15},
    "hybrid_ssm": {"max_iters": 4, "train_window": 150, "chunk": 50},
    "pinn": {"q": 3, "hidden": [6], "train_points": 10, "collocation": 20, "epochs": 60, "eval_every": 20},
    "forecaster": {"H": 4, "M": 16, "stride": 10, "max_origins": 3}
  })");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dlf_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const fs::path& cfg, const fs::path& out, const std::string& verb, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"--config", cfg.string(), "--out", out.string(), "-q"};
  args.insert(args.end(), extra.begin(), extra.end());
  args.push_back(verb);
  return cli_main(args);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

const char* kVerbs[] = {"simulate", "train-input", "train-output", "forecast", "evaluate", "report"};

}  // namespace

TEST_CASE("config: defaults, round trip and seed override") {
  for (const char* sys : {"cstr", "adpfr", "flotation"}) {
    const auto c = parse_config(json{{"experiment", {{"system", sys}}}});
    CHECK(c.simulators.split[0] + c.simulators.split[1] + c.simulators.split[2] == c.simulators.samples);
    const auto back = parse_config(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(experiment_hash(back) == experiment_hash(c));
  }
  const auto a = parse_config(tiny_cstr());
  const auto b = parse_config(tiny_cstr(), 99);
  CHECK(a.seed == 3);
  CHECK(b.seed == 99);
  CHECK(b.simulators.seed == 99);
  CHECK(dataset_hash(a) != dataset_hash(b));

  // Changing only the output network leaves the dataset and input hashes alone.
  auto j = tiny_cstr();
  j["pinn"]["q"] = 4;
  const auto c = parse_config(j);
  CHECK(dataset_hash(c) == dataset_hash(a));
  CHECK(input_models_hash(c) == input_models_hash(a));
  CHECK(output_models_hash(c) != output_models_hash(a));
}

TEST_CASE("config: fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("config: rejects unknown keys, bad types and bad values") {
  auto bad = [](auto edit) {
    auto j = tiny_cstr();
    edit(j);
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  };
  bad([](json& j) { j["pinn"]["hiden"] = json::array({4}); });
  bad([](json& j) { j["extra"] = json::object(); });
  bad([](json& j) { j["pinn"]["q"] = "ten"; });
  bad([](json& j) { j["pinn"]["q"] = 0; });
  bad([](json& j) { j["simulators"]["split"] = json::array({300, 50, 49}); });
  bad([](json& j) { j["experiment"]["system"] = "reactor"; });
  bad([](json& j) { j["experiment"]["input_models"] = json::array({"rbf"}); });
  bad([](json& j) { j["simulators"]["flotation"] = json::object(); });
}

TEST_CASE("cli: exit codes") {
  TempDir t("exit");
  const auto cfg = write_config(t.path, tiny_cstr());

  CHECK(cli_main(std::vector<std::string>{"--config", cfg.string(), "frobnicate"}) == 2);
  CHECK(cli_main(std::vector<std::string>{"simulate"}) == 2);
  CHECK(run(t.path / "missing.json", t.path / "o", "simulate") == 2);

  auto j = tiny_cstr();
  j["kernels"]["bogus"] = 1;
  CHECK(run(write_config(t.path, j, "bad.json"), t.path / "o", "simulate") == 2);

  // Prerequisites missing.
  CHECK(run(cfg, t.path / "empty", "train-input") == 2);
  CHECK(run(cfg, t.path / "empty", "evaluate") == 2);

  // Output directory cannot be created.
  std::ofstream(t.path / "blocker") << "x";
  CHECK(run(cfg, t.path / "blocker" / "sub", "simulate") == 1);
}

TEST_CASE("cli: changed config refuses to overwrite without --force") {
  TempDir t("force");
  const auto cfg = write_config(t.path, tiny_cstr());
  const auto out = t.path / "o";
  REQUIRE(run(cfg, out, "simulate") == 0);
  CHECK(run(cfg, out, "simulate") == 0);

  auto j = tiny_cstr();
  j["simulators"]["samples"] = 420;
  j["simulators"]["split"] = json::array({320, 50, 50});
  const auto cfg2 = write_config(t.path, j, "cfg2.json");
  CHECK(run(cfg2, out, "simulate") == 2);
  CHECK(run(cfg, out, "simulate", {"--seed", "4"}) == 2);
  CHECK(run(cfg2, out, "simulate", {"--force"}) == 0);
  // Downstream verbs see the mismatch between the dataset and the old config.
  CHECK(run(cfg, out, "train-input") == 2);
}

TEST_CASE("cli: every verb is byte-reproducible, and H = 1 works") {
  TempDir t("determinism");
  const auto cfg = write_config(t.path, tiny_cstr());
  const auto a = t.path / "a", b = t.path / "b";
  for (const char* v : kVerbs) {
    INFO(v);
    REQUIRE(run(cfg, a, v) == 0);
    REQUIRE(run(cfg, b, v) == 0);
  }
  const auto sa = snapshot(a), sb = snapshot(b);
  CHECK(sa.size() == sb.size());
  CHECK(sa.count("report.md") == 1);
  CHECK(sa.count("evaluation/metrics.csv") == 1);
  CHECK(sa.count("outputs/pinn/model.ckpt") == 1);
  for (const auto& [name, bytes] : sa) {
    INFO(name);
    REQUIRE(sb.count(name) == 1);
    CHECK(sb.at(name) == bytes);
    CHECK(bytes.find(a.string()) == std::string::npos);
  }

  // Re-running evaluate over existing artifacts reproduces them.
  REQUIRE(run(cfg, a, "evaluate") == 0);
  CHECK(snapshot(a) == sa);

  // One-step horizon: only the forecast stages change.
  auto j = tiny_cstr();
  j["forecaster"]["H"] = 1;
  const auto cfg1 = write_config(t.path, j, "h1.json");
  CHECK(run(cfg1, a, "forecast", {"--force"}) == 0);
  CHECK(run(cfg1, a, "evaluate", {"--force"}) == 0);
  const auto rows = cmd_evaluate(parse_config(j), RunOptions{a, true, nullptr});
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(r.loglik.size() == 1);
    CHECK(r.origins == 3);
    CHECK(std::isfinite(r.mse));
  }
}

TEST_CASE("evaluation rows: hybrid and conventional inputs, both output models") {
  TempDir t("rows");
  const auto c = parse_config(tiny_cstr());
  const RunOptions o{t.path, false, nullptr};
  cmd_simulate(c, o);
  cmd_train_input(c, o);
  cmd_train_output(c, o);
  const auto rows = cmd_evaluate(c, o);
  // 2 input rows, then 2 x 2 output rows, CSTR has one channel each.
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].output_model.empty());
  CHECK(rows[2].output_model == "pinn");
  for (const auto& r : rows) {
    CHECK(r.loglik.size() == 4);
    CHECK(r.coverage >= 0.0);
    CHECK(r.coverage <= 1.0);
    CHECK(r.mse >= 0.0);
  }

  // The stored output model reproduces its checkpoint.
  const auto ds = load_dataset(c, t.path);
  const auto m = load_output_model(c, t.path, OutputKind::Pinn, ds);
  CHECK(m.num_params() > 0);
  auto j = tiny_cstr();
  j["pinn"]["hidden"] = json::array({7});
  CHECK_THROWS_AS(load_output_model(parse_config(j), t.path, OutputKind::Pinn, ds), ConfigError);
}
