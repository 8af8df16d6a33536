#include "dlf/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "dlf/ad/checkpoint.hpp"

namespace dlf::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Stream tags for seeds derived from the experiment seed.
enum : std::uint64_t { kSubsetTag = 101, kInitTag = 102, kCollocationTag = 103, kHybridTag = 104 };

std::uint64_t derived_seed(const ExperimentConfig& c, std::uint64_t tag, std::uint64_t index = 0) {
  return forecast::stream_seed(c.seed, tag, index);
}

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << '\n';
}

std::string num(double v, const char* f = "%.10e") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json versions() {
  return {{"dlf", kVersion},
          {"manifest_format", 1},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}};
}

json manifest(const std::string& artifact, const std::string& command, const std::string& hash,
              const ExperimentConfig& c) {
  return {{"artifact", artifact},
          {"command", command},
          {"config_hash", hash},
          {"seed", c.seed},
          {"system", pinn::to_string(c.system)},
          {"versions", versions()}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

/// Refuses to replace an artifact made under a different config unless
/// forced. Returns true when an existing artifact is being replaced.
bool guard(const fs::path& manifest_path, const std::string& hash, bool force, const std::string& what) {
  if (!fs::exists(manifest_path)) return false;
  const json m = read_json(manifest_path);
  const std::string old = m.value("config_hash", "");
  if (old == hash) return false;
  if (!force) {
    throw ConfigError(what + " at " + manifest_path.parent_path().string() +
                      " was produced by a different config (hash " + old + ", now " + hash +
                      "); pass --force to overwrite");
  }
  return true;
}

/// Prepares an artifact directory: guard, then clear it when replacing.
void prepare_dir(const fs::path& dir, const std::string& hash, bool force, const std::string& what) {
  if (guard(dir / layout::manifest, hash, force, what)) fs::remove_all(dir);
  make_dirs(dir);
}

void expect_hash(const fs::path& manifest_path, const std::string& hash, const std::string& what,
                 const std::string& verb) {
  if (!fs::exists(manifest_path)) {
    throw ConfigError(what + " not found (" + manifest_path.string() + "); run '" + verb + "' first");
  }
  const std::string got = read_json(manifest_path).value("config_hash", "");
  if (got != hash) {
    throw ConfigError("checkpoint/config mismatch: " + what + " has config hash " + got +
                      " but the current config gives " + hash + "; rerun '" + verb + "'");
  }
}

std::span<const double> rows(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  return std::span<const double>(v).subspan(begin, end - begin);
}

std::vector<pinn::Sample> pick(std::vector<pinn::Sample> all, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n >= all.size()) return all;
  std::mt19937_64 rng(seed);
  return pinn::random_subset(all, n, rng);
}

json kernel_json(const kernels::KernelParams& p) {
  return {{"lambda", p.lambda()}, {"q_w1", p.q_w1()}, {"q_w2", p.q_w2()}, {"R", p.R()}};
}

// Running sums of per-origin metrics.
struct Accum {
  std::size_t n = 0;
  double mse = 0, mae = 0, mre = 0;
  std::size_t covered = 0, steps = 0;
  std::vector<double> loglik;

  void add(const forecast::Ensemble& e, std::span<const double> truth) {
    const auto m = forecast::metrics(e, truth);
    ++n;
    mse += m.mse;
    mae += m.mae;
    mre += m.mre;
    if (loglik.empty()) loglik.assign(m.loglik.size(), 0.0);
    for (std::size_t h = 0; h < m.loglik.size(); ++h) loglik[h] += m.loglik[h];
    const auto mean = e.mean();
    const auto var = e.variance();
    for (int h = 0; h < e.H; ++h) {
      const double sd = std::sqrt(var[h]);
      covered += std::abs(truth[h] - mean[h]) <= 1.96 * sd;
      ++steps;
    }
  }

  MetricRow row(std::string in, std::string out, std::string channel) const {
    MetricRow r;
    r.input_model = std::move(in);
    r.output_model = std::move(out);
    r.channel = std::move(channel);
    r.origins = n;
    const double k = n ? static_cast<double>(n) : 1.0;
    r.mse = mse / k;
    r.mae = mae / k;
    r.mre = mre / k;
    for (double l : loglik) r.loglik.push_back(l / k);
    double s = 0.0;
    for (double l : r.loglik) s += l;
    r.mean_loglik = r.loglik.empty() ? 0.0 : s / static_cast<double>(r.loglik.size());
    r.coverage = steps ? static_cast<double>(covered) / static_cast<double>(steps) : 0.0;
    return r;
  }
};

void write_metrics(const fs::path& path, const std::vector<MetricRow>& rows, pinn::System sys, int H, bool outputs) {
  std::ofstream out(path);
  out << "system," << (outputs ? "input_model,output_model," : "input_model,")
      << "channel,origins,mse,mae,mre,mean_loglik,coverage95";
  for (int h = 1; h <= H; ++h) out << ",loglik_" << h;
  out << '\n';
  for (const auto& r : rows) {
    out << pinn::to_string(sys) << ',' << r.input_model << ',';
    if (outputs) out << r.output_model << ',';
    out << r.channel << ',' << r.origins << ',' << num(r.mse) << ',' << num(r.mae) << ',' << num(r.mre) << ','
        << num(r.mean_loglik) << ',' << num(r.coverage, "%.6f");
    for (double l : r.loglik) out << ',' << num(l);
    out << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<double> truth_after(const std::vector<double>& v, std::size_t origin, int H) {
  return std::vector<double>(v.begin() + origin + 1, v.begin() + origin + 1 + H);
}

forecast::ForecastConfig forecast_config(const ExperimentConfig& c) {
  forecast::ForecastConfig fc;
  fc.H = c.forecaster.H;
  fc.M = c.forecaster.M;
  fc.init_steps = c.forecaster.init_steps;
  fc.seed = c.seed;
  return fc;
}

struct Loaded {
  sim::Dataset ds;
  std::vector<std::pair<InputKind, std::vector<forecast::InputModel>>> inputs;
  std::vector<std::pair<OutputKind, pinn::OutputModel>> outputs;
};

Loaded load_all(const ExperimentConfig& c, const fs::path& out) {
  Loaded l;
  l.ds = load_dataset(c, out);
  for (auto k : c.input_models) l.inputs.emplace_back(k, load_input_models(c, out, k, l.ds));
  for (auto k : c.output_models) l.outputs.emplace_back(k, load_output_model(c, out, k, l.ds));
  return l;
}

}  // namespace

sim::Dataset simulate(const ExperimentConfig& c) {
  const auto& s = c.simulators;
  std::vector<sim::MultiFreqSignal> sig;
  for (std::size_t i = 0; i < s.signals.size(); ++i) {
    const auto& sc = s.signals[i].second;
    try {
      sig.push_back(sim::MultiFreqSignal::seeded(sc.offset, sc.scale, sc.periods, s.seed + i));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("simulators.signals." + s.signals[i].first + ": " + e.what());
    }
  }
  sim::Dataset ds;
  switch (c.system) {
    case pinn::System::Cstr:
      ds = sim::simulate_cstr(sig[0], s.cstr, s.samples, s.dt);
      break;
    case pinn::System::Adpfr:
      ds = sim::simulate_adpfr(sig[0], sig[1], s.adpfr, s.samples, s.dt);
      break;
    case pinn::System::Flotation:
      ds = sim::simulate_flotation({sig[0], sig[1], sig[2], sig[3]}, s.flotation, sim::default_rate(s.flotation),
                                   s.samples, s.dt);
      break;
  }
  ds.set_split(s.split[0], s.split[1], s.split[2]);
  return ds;
}

pinn::OutputModelConfig output_model_config(const ExperimentConfig& c, OutputKind kind, const sim::Dataset& ds) {
  pinn::OutputModelConfig oc;
  oc.system = c.system;
  oc.physics = kind == OutputKind::Pinn;
  oc.q = c.pinn.q;
  oc.dt = c.simulators.dt;
  oc.hidden = c.pinn.hidden;
  oc.rate_hidden = c.pinn.rate_hidden;
  oc.residual_skip = c.pinn.residual_skip;
  oc.cstr = c.simulators.cstr;
  oc.pfr = c.simulators.adpfr;
  oc.flotation = c.simulators.flotation;
  if (c.system == pinn::System::Adpfr) oc.profile_z = pinn::profile_grid(ds);
  return oc;
}

sim::Dataset load_dataset(const ExperimentConfig& c, const fs::path& out) {
  expect_hash(out / layout::dataset_manifest, dataset_hash(c), "dataset", "simulate");
  return sim::read_dataset(out / layout::dataset);
}

std::vector<forecast::InputModel> load_input_models(const ExperimentConfig& c, const fs::path& out, InputKind kind,
                                                    const sim::Dataset& ds) {
  const fs::path dir = out / layout::inputs;
  expect_hash(dir / layout::manifest, input_models_hash(c), "input models", "train-input");
  std::vector<forecast::InputModel> models;
  for (const auto& ch : ds.input_names) {
    const fs::path p = dir / to_string(kind) / ch;
    if (!fs::exists(p)) throw ConfigError("checkpoint/config mismatch: missing input model " + p.string());
    try {
      if (is_hybrid(kind)) {
        auto hm = hybrid::load_hybrid(p);
        if (hm.kind != base_kernel(kind) || hm.dt != c.simulators.dt || hm.lag != c.hybrid_ssm.fit.lag) {
          throw ConfigError("checkpoint/config mismatch: " + p.string());
        }
        models.push_back(forecast::InputModel::make_hybrid(std::move(hm)));
      } else {
        auto km = kernels::load_kernel(p / "kernel.txt");
        if (km.kind != base_kernel(kind) || km.dt != c.simulators.dt) {
          throw ConfigError("checkpoint/config mismatch: " + p.string());
        }
        models.push_back(forecast::InputModel::make_conventional(km));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("checkpoint/config mismatch: " + p.string() + ": " + e.what());
    }
  }
  return models;
}

pinn::OutputModel load_output_model(const ExperimentConfig& c, const fs::path& out, OutputKind kind,
                                    const sim::Dataset& ds) {
  const fs::path dir = out / layout::outputs;
  expect_hash(dir / layout::manifest, output_models_hash(c), "output models", "train-output");
  const fs::path p = dir / to_string(kind) / "model.ckpt";
  pinn::OutputModel model(output_model_config(c, kind, ds));
  try {
    model.load_records(ad::read_checkpoint(p));
  } catch (const std::exception& e) {
    throw ConfigError("checkpoint/config mismatch: " + p.string() + ": " + e.what());
  }
  return model;
}

std::vector<std::size_t> reported_outputs(const sim::Dataset& ds, pinn::System sys) {
  if (sys == pinn::System::Adpfr) return {ds.outputs.size() - 1};
  std::vector<std::size_t> idx(ds.outputs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::vector<std::size_t> evaluation_origins(const ExperimentConfig& c, const sim::Dataset& ds) {
  std::size_t need = static_cast<std::size_t>(c.forecaster.init_steps);
  for (auto k : c.input_models) {
    if (is_hybrid(k)) need = std::max(need, static_cast<std::size_t>(c.forecaster.init_steps + c.hybrid_ssm.fit.lag));
  }
  auto o = forecast::forecast_origins(ds.n_train + ds.n_val, ds.rows(), c.forecaster.H, need, c.forecaster.stride);
  if (c.forecaster.max_origins && o.size() > c.forecaster.max_origins) o.resize(c.forecaster.max_origins);
  if (o.empty()) throw ConfigError("forecaster: the test split leaves no forecast origins");
  return o;
}

void cmd_simulate(const ExperimentConfig& c, const RunOptions& o) {
  make_dirs(o.out);
  const std::string hash = dataset_hash(c);
  guard(o.out / layout::dataset_manifest, hash, o.force, "dataset");
  say(o, "simulating " + pinn::to_string(c.system) + " (" + std::to_string(c.simulators.samples) + " rows)");
  const auto ds = simulate(c);
  try {
    sim::write_dataset(o.out / layout::dataset, ds);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  json m = manifest("dataset", "simulate", hash, c);
  m["files"] = {layout::dataset};
  m["parameters"] = to_json(c)["simulators"];
  m["rows"] = ds.rows();
  m["split"] = {{"train", ds.n_train}, {"val", ds.n_val}, {"test", ds.n_test}};
  m["inputs"] = ds.input_names;
  m["outputs"] = ds.output_names;
  m["warnings"] = ds.warnings;
  write_json(o.out / layout::dataset_manifest, m);
}

void cmd_train_input(const ExperimentConfig& c, const RunOptions& o) {
  const auto ds = load_dataset(c, o.out);
  const fs::path dir = o.out / layout::inputs;
  const std::string hash = input_models_hash(c);
  prepare_dir(dir, hash, o.force, "input models");
  const double dt = c.simulators.dt;
  json results = json::object();
  for (std::size_t ch = 0; ch < ds.inputs.size(); ++ch) {
    const auto& name = ds.input_names[ch];
    const auto train = rows(ds.inputs[ch], 0, ds.n_train);
    const auto val = rows(ds.inputs[ch], ds.n_train, ds.n_train + ds.n_val);
    std::map<kernels::KernelKind, kernels::KernelParams> conventional;
    auto conventional_fit = [&](kernels::KernelKind kk) {
      auto it = conventional.find(kk);
      if (it != conventional.end()) return it->second;
      const auto rep = kernels::fit_kernel(kk, train, dt, c.kernels, val);
      conventional[kk] = rep.params;
      return rep.params;
    };
    for (auto kind : c.input_models) {
      const fs::path p = dir / to_string(kind) / name;
      make_dirs(p);
      say(o, "training " + to_string(kind) + " on " + name);
      json r;
      if (is_hybrid(kind)) {
        hybrid::HybridFitConfig hc = c.hybrid_ssm.fit;
        hc.seed = derived_seed(c, kHybridTag, ch * 8 + static_cast<std::uint64_t>(kind));
        if (c.hybrid_ssm.init_from_conventional) hc.init = conventional_fit(base_kernel(kind));
        const auto rep = hybrid::fit_hybrid(base_kernel(kind), train, val, dt, hc);
        hybrid::save_hybrid(p, rep.model);
        r = {{"best_score", rep.best_score},
             {"best_iter", rep.best_iter},
             {"iters", rep.iters},
             {"skipped_steps", rep.skipped_steps},
             {"kernel", kernel_json(rep.model.params)}};
      } else {
        const auto rep = kernels::fit_kernel(base_kernel(kind), train, dt, c.kernels, val);
        conventional[base_kernel(kind)] = rep.params;
        kernels::save_kernel(p / "kernel.txt", {base_kernel(kind), rep.params, dt});
        r = {{"best_score", rep.best_score},
             {"best_iter", rep.best_iter},
             {"iters", rep.iters},
             {"skipped_steps", rep.skipped_steps},
             {"kernel", kernel_json(rep.params)}};
      }
      results[to_string(kind)][name] = r;
    }
  }
  json m = manifest("input_models", "train-input", hash, c);
  m["depends"] = {{"dataset", dataset_hash(c)}};
  m["config"] = {{"kernels", to_json(c)["kernels"]}, {"hybrid_ssm", to_json(c)["hybrid_ssm"]}};
  m["results"] = results;
  write_json(dir / layout::manifest, m);
}

void cmd_train_output(const ExperimentConfig& c, const RunOptions& o) {
  const auto ds = load_dataset(c, o.out);
  const fs::path dir = o.out / layout::outputs;
  const std::string hash = output_models_hash(c);
  prepare_dir(dir, hash, o.force, "output models");
  const auto& p = c.pinn;
  const std::size_t a = ds.n_train, b = ds.n_train + ds.n_val;
  const auto train = pick(pinn::transition_samples(ds, c.system, 0, a, p.node_stride), p.train_points,
                          derived_seed(c, kSubsetTag, 0));
  const auto val = pick(pinn::transition_samples(ds, c.system, a, b, p.node_stride), p.val_points,
                        derived_seed(c, kSubsetTag, 1));
  const auto test = pick(pinn::transition_samples(ds, c.system, b, ds.rows(), p.node_stride), p.test_points,
                         derived_seed(c, kSubsetTag, 2));
  json results = json::object();
  for (auto kind : c.output_models) {
    auto oc = output_model_config(c, kind, ds);
    if (p.standardize) pinn::fit_scaling(oc, train);
    pinn::OutputModel model(oc);
    std::mt19937_64 init_rng(derived_seed(c, kInitTag));
    model.init(init_rng);
    std::vector<pinn::Sample> batch = train;
    std::size_t n_col = 0;
    if (kind == OutputKind::Pinn && model.carries_state() && p.collocation > 0) {
      std::mt19937_64 col_rng(derived_seed(c, kCollocationTag));
      const auto col = pinn::collocation_samples(train, p.collocation, p.margin, col_rng);
      n_col = col.size();
      batch.insert(batch.end(), col.begin(), col.end());
    }
    const fs::path sub = dir / to_string(kind);
    make_dirs(sub);
    std::ofstream log(sub / "train_log.csv");
    log << "epoch,train_loss,val_loss\n";
    say(o, "training " + to_string(kind) + " (" + std::to_string(model.num_params()) + " parameters, " +
               std::to_string(train.size()) + " labelled pairs, " + std::to_string(p.train.epochs) + " epochs)");
    const auto rep = pinn::train_output_model(model, batch, val, p.train, &log);
    if (!log) throw IoError("cannot write " + (sub / "train_log.csv").string());
    ad::write_checkpoint(sub / "model.ckpt", model.records());
    results[to_string(kind)] = {{"best_val_mse", rep.best_val},
                                {"best_epoch", rep.best_epoch},
                                {"epochs_run", rep.epochs_run},
                                {"skipped_steps", rep.skipped_steps},
                                {"final_train_loss", rep.final_train_loss},
                                {"test_mse", model.mse(test)},
                                {"parameters", model.num_params()},
                                {"labelled_pairs", train.size()},
                                {"collocation_points", n_col},
                                {"validation_pairs", val.size()},
                                {"test_pairs", test.size()}};
  }
  json m = manifest("output_models", "train-output", hash, c);
  m["depends"] = {{"dataset", dataset_hash(c)}};
  m["config"] = {{"pinn", to_json(c)["pinn"]}};
  m["results"] = results;
  write_json(dir / layout::manifest, m);
}

void cmd_forecast(const ExperimentConfig& c, const RunOptions& o) {
  const auto l = load_all(c, o.out);
  const fs::path dir = o.out / layout::forecast;
  const std::string hash = experiment_hash(c);
  prepare_dir(dir, hash, o.force, "forecast");
  std::size_t origin;
  if (c.forecaster.origin >= 0) {
    origin = static_cast<std::size_t>(c.forecaster.origin);
    if (origin + c.forecaster.H >= l.ds.rows()) throw ConfigError("forecaster.origin: no truth for the full horizon");
  } else {
    origin = evaluation_origins(c, l.ds).front();
  }
  const auto fc = forecast_config(c);
  const auto shown = reported_outputs(l.ds, c.system);
  std::vector<MetricRow> in_rows, out_rows;
  int clipped = 0;
  for (const auto& [ik, models] : l.inputs) {
    say(o, "forecasting with " + to_string(ik) + " at row " + std::to_string(origin));
    const auto f = forecast::forecast_at(l.ds, origin, models, nullptr, fc);
    clipped += f.clipped;
    make_dirs(dir / to_string(ik));
    for (std::size_t ch = 0; ch < l.ds.inputs.size(); ++ch) {
      const auto truth = truth_after(l.ds.inputs[ch], origin, fc.H);
      forecast::write_band(dir / to_string(ik) / (l.ds.input_names[ch] + ".csv"), f.inputs[ch], truth);
      Accum acc;
      acc.add(f.inputs[ch], truth);
      in_rows.push_back(acc.row(to_string(ik), "", l.ds.input_names[ch]));
    }
    for (const auto& [ok, model] : l.outputs) {
      const auto outs = forecast::forecast_outputs(model, f.inputs, forecast::output_state(l.ds, origin));
      const fs::path sub = dir / (to_string(ik) + "__" + to_string(ok));
      make_dirs(sub);
      for (std::size_t s : shown) {
        const auto truth = truth_after(l.ds.outputs[s], origin, fc.H);
        forecast::write_band(sub / (l.ds.output_names[s] + ".csv"), outs[s], truth);
        Accum acc;
        acc.add(outs[s], truth);
        out_rows.push_back(acc.row(to_string(ik), to_string(ok), l.ds.output_names[s]));
      }
    }
  }
  write_metrics(dir / "input_metrics.csv", in_rows, c.system, fc.H, false);
  write_metrics(dir / "metrics.csv", out_rows, c.system, fc.H, true);
  json m = manifest("forecast", "forecast", hash, c);
  m["depends"] = {{"dataset", dataset_hash(c)}, {"inputs", input_models_hash(c)}, {"outputs", output_models_hash(c)}};
  m["origin"] = origin;
  m["forecaster"] = to_json(c)["forecaster"];
  m["clipped_covariances"] = clipped;
  write_json(dir / layout::manifest, m);
}

std::vector<MetricRow> cmd_evaluate(const ExperimentConfig& c, const RunOptions& o) {
  const auto l = load_all(c, o.out);
  const fs::path dir = o.out / layout::evaluation;
  const std::string hash = experiment_hash(c);
  prepare_dir(dir, hash, o.force, "evaluation");
  const auto origins = evaluation_origins(c, l.ds);
  const auto fc = forecast_config(c);
  const auto shown = reported_outputs(l.ds, c.system);
  std::vector<MetricRow> in_rows, out_rows;
  int clipped = 0;
  for (const auto& [ik, models] : l.inputs) {
    say(o, "evaluating " + to_string(ik) + " over " + std::to_string(origins.size()) + " origins");
    std::vector<Accum> in_acc(l.ds.inputs.size());
    std::vector<std::vector<Accum>> out_acc(l.outputs.size(), std::vector<Accum>(shown.size()));
    for (std::size_t origin : origins) {
      const auto f = forecast::forecast_at(l.ds, origin, models, nullptr, fc);
      clipped += f.clipped;
      for (std::size_t ch = 0; ch < l.ds.inputs.size(); ++ch) {
        in_acc[ch].add(f.inputs[ch], truth_after(l.ds.inputs[ch], origin, fc.H));
      }
      for (std::size_t k = 0; k < l.outputs.size(); ++k) {
        const auto outs = forecast::forecast_outputs(l.outputs[k].second, f.inputs, forecast::output_state(l.ds, origin));
        for (std::size_t j = 0; j < shown.size(); ++j) {
          out_acc[k][j].add(outs[shown[j]], truth_after(l.ds.outputs[shown[j]], origin, fc.H));
        }
      }
    }
    for (std::size_t ch = 0; ch < l.ds.inputs.size(); ++ch) {
      in_rows.push_back(in_acc[ch].row(to_string(ik), "", l.ds.input_names[ch]));
    }
    for (std::size_t k = 0; k < l.outputs.size(); ++k) {
      for (std::size_t j = 0; j < shown.size(); ++j) {
        out_rows.push_back(out_acc[k][j].row(to_string(ik), to_string(l.outputs[k].first), l.ds.output_names[shown[j]]));
      }
    }
  }
  write_metrics(dir / "input_metrics.csv", in_rows, c.system, fc.H, false);
  write_metrics(dir / "metrics.csv", out_rows, c.system, fc.H, true);
  json m = manifest("evaluation", "evaluate", hash, c);
  m["depends"] = {{"dataset", dataset_hash(c)}, {"inputs", input_models_hash(c)}, {"outputs", output_models_hash(c)}};
  m["origins"] = origins;
  m["forecaster"] = to_json(c)["forecaster"];
  m["clipped_covariances"] = clipped;
  write_json(dir / layout::manifest, m);
  std::vector<MetricRow> all = in_rows;
  all.insert(all.end(), out_rows.begin(), out_rows.end());
  return all;
}

void cmd_report(const ExperimentConfig& c, const RunOptions& o) {
  const std::string hash = experiment_hash(c);
  expect_hash(o.out / layout::evaluation / layout::manifest, hash, "evaluation", "evaluate");
  expect_hash(o.out / layout::outputs / layout::manifest, output_models_hash(c), "output models", "train-output");
  guard(o.out / layout::report_manifest, hash, o.force, "report");
  const json outm = read_json(o.out / layout::outputs / layout::manifest);

  auto read_csv = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::vector<std::vector<std::string>> table;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      table.push_back(cells);
    }
    return table;
  };
  auto g = [](const std::string& s) { return num(std::stod(s), "%.4g"); };

  std::ostringstream md;
  md << "# " << pinn::to_string(c.system) << " forecasting report\n\n";
  md << "Config hash `" << hash << "`, seed " << c.seed << ".\n\n";
  md << "## One-step output models\n\n";
  md << "| model | test MSE | best val MSE | best epoch | labelled pairs |\n|---|---|---|---|---|\n";
  for (auto k : c.output_models) {
    const auto& r = outm["results"][to_string(k)];
    md << "| " << to_string(k) << " | " << num(r["test_mse"].get<double>(), "%.4g") << " | "
       << num(r["best_val_mse"].get<double>(), "%.4g") << " | " << r["best_epoch"].get<int>() << " | "
       << r["labelled_pairs"].get<std::size_t>() << " |\n";
  }
  const auto in_tab = read_csv(o.out / layout::evaluation / "input_metrics.csv");
  const auto out_tab = read_csv(o.out / layout::evaluation / "metrics.csv");
  const std::string origins = in_tab.size() > 1 ? in_tab[1][3] : "0";
  md << "\n## " << c.forecaster.H << "-step input forecasts (" << origins << " origins, M = " << c.forecaster.M
     << ")\n\n";
  md << "| input model | channel | MSE | MAE | MRE | mean loglik | 95% coverage |\n|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 1; i < in_tab.size(); ++i) {
    const auto& r = in_tab[i];
    md << "| " << r[1] << " | " << r[2] << " | " << g(r[4]) << " | " << g(r[5]) << " | " << g(r[6]) << " | " << g(r[7])
       << " | " << g(r[8]) << " |\n";
  }
  md << "\n## " << c.forecaster.H << "-step output forecasts\n\n";
  md << "| input model | output model | channel | MSE | MAE | MRE | mean loglik | 95% coverage |\n"
        "|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 1; i < out_tab.size(); ++i) {
    const auto& r = out_tab[i];
    md << "| " << r[1] << " | " << r[2] << " | " << r[3] << " | " << g(r[5]) << " | " << g(r[6]) << " | " << g(r[7])
       << " | " << g(r[8]) << " | " << g(r[9]) << " |\n";
  }
  {
    std::ofstream out(o.out / layout::report);
    out << md.str();
    if (!out) throw IoError("cannot write " + (o.out / layout::report).string());
  }
  json m = manifest("report", "report", hash, c);
  m["depends"] = {{"evaluation", hash}};
  m["files"] = {layout::report};
  write_json(o.out / layout::report_manifest, m);
}

}  // namespace dlf::app
