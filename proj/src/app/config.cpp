#include "dlf/app/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dlf::app {

using nlohmann::json;

namespace {

// Typed access to one config table. Every key read is remembered so that
// finish() can reject the rest.
class Table {
 public:
  Table(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw ConfigError(path_ + ": expected a table");
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  double num(const std::string& key, double def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number()) fail(key, "a number");
    return v->get<double>();
  }
  long integer(const std::string& key, long def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(key, "an integer");
    return v->get<long>();
  }
  std::size_t count(const std::string& key, std::size_t def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "a non-negative integer");
    return v->get<std::size_t>();
  }
  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      fail(key, "a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }
  bool flag(const std::string& key, bool def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(key, "true or false");
    return v->get<bool>();
  }
  std::string str(const std::string& key, const std::string& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) fail(key, "a string");
    return v->get<std::string>();
  }
  std::vector<double> nums(const std::string& key, std::vector<double> def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "a list of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(key, "a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<long> ints(const std::string& key, std::vector<long> def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "a list of integers");
    std::vector<long> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer()) fail(key, "a list of integers");
      out.push_back(e.get<long>());
    }
    return out;
  }
  std::vector<std::string> strs(const std::string& key, std::vector<std::string> def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "a list of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) fail(key, "a list of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Table sub(const std::string& key) { return Table(take(key), path_ + "." + key); }
  const json* raw(const std::string& key) { return take(key); }

  /// Rejects keys nobody asked for.
  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
    }
  }

  void check(bool ok, const std::string& key, const std::string& what) const {
    if (!ok) throw ConfigError(path_ + "." + key + ": " + what);
  }

 private:
  const json* take(const std::string& key) {
    used_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + "." + key + ": expected " + what);
  }

  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

const std::vector<double> kCstrPeriods{500, 750, 1000, 1500, 2000, 3000};
const std::vector<double> kPfrPeriods{50, 75, 100, 150, 200, 300};
const std::vector<double> kFlotationPeriods{200, 300, 500, 750, 1000, 1500};

ExperimentConfig defaults(pinn::System sys) {
  ExperimentConfig c;
  c.system = sys;
  c.input_models = {InputKind::Exponential, InputKind::Matern, InputKind::HybridExponential, InputKind::HybridMatern};
  c.output_models = {OutputKind::Pinn, OutputKind::Ffnn};
  auto& s = c.simulators;
  c.kernels.max_iters = 300;
  c.kernels.lr = 0.05;
  auto& h = c.hybrid_ssm.fit;
  h.max_iters = 300;
  h.hidden = 8;
  h.train_window = 1000;
  auto& p = c.pinn;
  p.train.epochs = 3000;
  p.train.lr = 1e-3;
  p.train.patience = 30000;
  p.train.eval_every = 50;
  switch (sys) {
    case pinn::System::Cstr:
      s.samples = 10000;
      s.dt = 1.0;
      s.split = {7000, 1500, 1500};
      s.signals = {{"C_in", {2.0, 0.15, kCstrPeriods}}};
      p.q = 10;
      p.train_points = 15;
      p.collocation = 200;
      p.train.epochs = 5000;
      break;
    case pinn::System::Adpfr:
      s.samples = 5500;
      s.dt = 0.5;
      s.split = {4000, 900, 600};
      s.signals = {{"C_in", {1.0, 0.15, kPfrPeriods}}, {"v", {0.05, 0.0075, kPfrPeriods}}};
      p.q = 8;
      p.train_points = 1000;
      p.val_points = 1000;
      p.test_points = 2000;
      p.node_stride = 5;
      p.train.epochs = 1000;
      break;
    case pinn::System::Flotation:
      s.samples = 30000;
      s.dt = 1.0;
      s.split = {10000, 10000, 10000};
      s.signals = {{"C_feed", {1.0, 0.1, kFlotationPeriods}},
                   {"Q_feed", {4.0, 0.3, kFlotationPeriods}},
                   {"Q_t", {3.6, 0.25, kFlotationPeriods}},
                   {"Q_c", {0.4, 0.03, kFlotationPeriods}}};
      p.q = 8;
      p.train_points = 150;
      p.val_points = 1000;
      p.standardize = true;
      break;
  }
  return c;
}

void parse_fit(Table& t, int& max_iters, double& lr, int& patience, double& tol) {
  max_iters = static_cast<int>(t.count("max_iters", max_iters));
  lr = t.num("lr", lr);
  patience = static_cast<int>(t.count("patience", patience));
  tol = t.num("tol", tol);
  t.check(lr > 0.0, "lr", "must be positive");
  t.check(patience >= 1, "patience", "must be at least 1");
  t.check(tol >= 0.0, "tol", "must be non-negative");
}

json fit_json(int max_iters, double lr, int patience, double tol) {
  return {{"max_iters", max_iters}, {"lr", lr}, {"patience", patience}, {"tol", tol}};
}

}  // namespace

std::string to_string(InputKind k) {
  switch (k) {
    case InputKind::Exponential: return "exponential";
    case InputKind::Matern: return "matern";
    case InputKind::HybridExponential: return "hybrid_exponential";
    case InputKind::HybridMatern: return "hybrid_matern";
  }
  return "?";
}

InputKind input_kind_from_string(const std::string& s) {
  for (auto k : {InputKind::Exponential, InputKind::Matern, InputKind::HybridExponential, InputKind::HybridMatern}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown input model '" + s + "'");
}

bool is_hybrid(InputKind k) { return k == InputKind::HybridExponential || k == InputKind::HybridMatern; }

kernels::KernelKind base_kernel(InputKind k) {
  return k == InputKind::Exponential || k == InputKind::HybridExponential ? kernels::KernelKind::ExponentialAugmented
                                                                         : kernels::KernelKind::Matern32Augmented;
}

std::string to_string(OutputKind k) { return k == OutputKind::Pinn ? "pinn" : "ffnn"; }

OutputKind output_kind_from_string(const std::string& s) {
  if (s == "pinn") return OutputKind::Pinn;
  if (s == "ffnn") return OutputKind::Ffnn;
  throw ConfigError("unknown output model '" + s + "'");
}

ExperimentConfig parse_config(const json& j, std::optional<std::uint64_t> seed) {
  Table root(&j, "config");
  Table ex = root.sub("experiment");
  if (!ex.has("system")) throw ConfigError("config.experiment.system is required");
  const std::string sys_name = ex.str("system", "");
  pinn::System sys;
  try {
    sys = pinn::system_from_string(sys_name);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config.experiment.system: unknown system '" + sys_name + "'");
  }
  ExperimentConfig c = defaults(sys);
  c.seed = ex.u64("seed", 0);
  if (seed) c.seed = *seed;
  c.paper_scale = ex.flag("paper_scale", false);
  c.out = ex.str("out", "runs/" + sys_name);
  {
    std::vector<std::string> names;
    for (auto k : c.input_models) names.push_back(to_string(k));
    names = ex.strs("input_models", names);
    c.input_models.clear();
    for (const auto& n : names) c.input_models.push_back(input_kind_from_string(n));
    names.clear();
    for (auto k : c.output_models) names.push_back(to_string(k));
    names = ex.strs("output_models", names);
    c.output_models.clear();
    for (const auto& n : names) c.output_models.push_back(output_kind_from_string(n));
  }
  ex.finish();

  Table st = root.sub("simulators");
  auto& s = c.simulators;
  s.samples = st.count("samples", s.samples);
  s.dt = st.num("dt", s.dt);
  st.check(s.dt > 0.0, "dt", "must be positive");
  {
    std::vector<long> sp{static_cast<long>(s.split[0]), static_cast<long>(s.split[1]), static_cast<long>(s.split[2])};
    sp = st.ints("split", sp);
    st.check(sp.size() == 3 && sp[0] > 0 && sp[1] > 0 && sp[2] > 0, "split", "expected [train, val, test], all positive");
    for (int i = 0; i < 3; ++i) s.split[i] = static_cast<std::size_t>(sp[i]);
    st.check(s.split[0] + s.split[1] + s.split[2] == s.samples, "split", "must add up to samples");
  }
  s.seed = st.u64("seed", c.seed);
  {
    Table sig = st.sub("signals");
    for (auto& [name, sc] : s.signals) {
      Table one = sig.sub(name);
      sc.offset = one.num("offset", sc.offset);
      sc.scale = one.num("scale", sc.scale);
      sc.periods = one.nums("periods", sc.periods);
      one.check(sc.scale >= 0.0, "scale", "must be non-negative");
      one.check(!sc.periods.empty(), "periods", "must not be empty");
      for (double T : sc.periods) one.check(T > 0.0, "periods", "must be positive");
      one.finish();
    }
    sig.finish();
  }
  switch (sys) {
    case pinn::System::Cstr: {
      Table t = st.sub("cstr");
      s.cstr.F_over_V = t.num("F_over_V", s.cstr.F_over_V);
      s.cstr.k = t.num("k", s.cstr.k);
      s.cstr.C0 = t.num("C0", s.cstr.C0);
      t.finish();
      break;
    }
    case pinn::System::Adpfr: {
      Table t = st.sub("adpfr");
      s.adpfr.L = t.num("L", s.adpfr.L);
      s.adpfr.D = t.num("D", s.adpfr.D);
      s.adpfr.k = t.num("k", s.adpfr.k);
      s.adpfr.nodes = static_cast<int>(t.count("nodes", s.adpfr.nodes));
      s.adpfr.dt_internal = t.num("dt_internal", s.adpfr.dt_internal);
      s.adpfr.profile_stride = static_cast<int>(t.count("profile_stride", s.adpfr.profile_stride));
      t.check(s.adpfr.nodes >= 10, "nodes", "must be at least 10");
      t.check(s.adpfr.profile_stride >= 1, "profile_stride", "must be at least 1");
      t.check(s.adpfr.dt_internal > 0.0, "dt_internal", "must be positive");
      t.finish();
      break;
    }
    case pinn::System::Flotation: {
      Table t = st.sub("flotation");
      auto& f = s.flotation;
      f.V_p = t.num("V_p", f.V_p);
      f.V_f = t.num("V_f", f.V_f);
      f.rho_feed = t.num("rho_feed", f.rho_feed);
      f.rho_p = t.num("rho_p", f.rho_p);
      f.rho_f = t.num("rho_f", f.rho_f);
      f.kappa = t.num("kappa", f.kappa);
      t.finish();
      break;
    }
  }
  st.finish();

  Table kt = root.sub("kernels");
  parse_fit(kt, c.kernels.max_iters, c.kernels.lr, c.kernels.patience, c.kernels.tol);
  kt.finish();

  Table ht = root.sub("hybrid_ssm");
  auto& h = c.hybrid_ssm.fit;
  parse_fit(ht, h.max_iters, h.lr, h.patience, h.tol);
  h.hidden = static_cast<int>(ht.count("hidden", h.hidden));
  h.layers = static_cast<int>(ht.count("layers", h.layers));
  h.lag = static_cast<int>(ht.count("lag", h.lag));
  h.chunk = ht.count("chunk", h.chunk);
  h.train_window = ht.count("train_window", h.train_window);
  h.standardize = ht.flag("standardize", h.standardize);
  h.warm_start_head = ht.flag("warm_start_head", h.warm_start_head);
  c.hybrid_ssm.init_from_conventional = ht.flag("init_from_conventional", c.hybrid_ssm.init_from_conventional);
  ht.check(h.hidden >= 1 && h.layers >= 1 && h.lag >= 1, "hidden/layers/lag", "must be at least 1");
  ht.check(h.chunk >= 1, "chunk", "must be at least 1");
  ht.finish();

  Table pt = root.sub("pinn");
  auto& p = c.pinn;
  p.q = static_cast<int>(pt.count("q", p.q));
  pt.check(p.q >= 1, "q", "must be at least 1");
  {
    std::vector<long> hid(p.hidden.begin(), p.hidden.end());
    hid = pt.ints("hidden", hid);
    p.hidden.clear();
    for (long w : hid) {
      pt.check(w >= 1, "hidden", "widths must be at least 1");
      p.hidden.push_back(static_cast<int>(w));
    }
  }
  p.rate_hidden = static_cast<int>(pt.count("rate_hidden", p.rate_hidden));
  p.residual_skip = pt.flag("residual_skip", p.residual_skip);
  p.standardize = pt.flag("standardize", p.standardize);
  p.train_points = pt.count("train_points", p.train_points);
  p.val_points = pt.count("val_points", p.val_points);
  p.test_points = pt.count("test_points", p.test_points);
  p.collocation = pt.count("collocation", p.collocation);
  p.margin = pt.num("margin", p.margin);
  p.node_stride = pt.count("node_stride", p.node_stride);
  p.train.epochs = static_cast<int>(pt.count("epochs", p.train.epochs));
  p.train.lr = pt.num("lr", p.train.lr);
  p.train.patience = static_cast<int>(pt.count("patience", p.train.patience));
  p.train.tol = pt.num("tol", p.train.tol);
  p.train.eval_every = static_cast<int>(pt.count("eval_every", p.train.eval_every));
  pt.check(p.rate_hidden >= 1, "rate_hidden", "must be at least 1");
  pt.check(p.margin >= 0.0, "margin", "must be non-negative");
  pt.check(p.node_stride >= 1, "node_stride", "must be at least 1");
  pt.check(p.train.lr > 0.0, "lr", "must be positive");
  pt.check(p.train.patience >= 1, "patience", "must be at least 1");
  pt.check(p.train.tol >= 0.0, "tol", "must be non-negative");
  pt.check(p.train.eval_every >= 1, "eval_every", "must be at least 1");
  pt.finish();

  Table ft = root.sub("forecaster");
  auto& f = c.forecaster;
  f.H = static_cast<int>(ft.count("H", f.H));
  f.M = static_cast<int>(ft.count("M", f.M));
  f.init_steps = static_cast<int>(ft.count("init_steps", f.init_steps));
  f.stride = ft.count("stride", f.stride);
  f.max_origins = ft.count("max_origins", f.max_origins);
  f.origin = ft.integer("origin", f.origin);
  ft.check(f.H >= 1 && f.M >= 1, "H/M", "must be at least 1");
  ft.check(f.init_steps >= 1, "init_steps", "must be at least 1");
  ft.check(f.stride >= 1, "stride", "must be at least 1");
  ft.check(f.origin >= -1, "origin", "must be a row index or -1");
  ft.finish();

  root.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, seed);
}

json to_json(const ExperimentConfig& c) {
  json j;
  json ins = json::array(), outs = json::array();
  for (auto k : c.input_models) ins.push_back(to_string(k));
  for (auto k : c.output_models) outs.push_back(to_string(k));
  j["experiment"] = {{"system", pinn::to_string(c.system)},
                     {"seed", c.seed},
                     {"paper_scale", c.paper_scale},
                     {"out", c.out},
                     {"input_models", ins},
                     {"output_models", outs}};

  const auto& s = c.simulators;
  json sig = json::object();
  for (const auto& [name, sc] : s.signals) {
    sig[name] = {{"offset", sc.offset}, {"scale", sc.scale}, {"periods", sc.periods}};
  }
  json sj = {{"samples", s.samples}, {"dt", s.dt}, {"split", s.split}, {"seed", s.seed}, {"signals", sig}};
  switch (c.system) {
    case pinn::System::Cstr:
      sj["cstr"] = {{"F_over_V", s.cstr.F_over_V}, {"k", s.cstr.k}, {"C0", s.cstr.C0}};
      break;
    case pinn::System::Adpfr:
      sj["adpfr"] = {{"L", s.adpfr.L},
                     {"D", s.adpfr.D},
                     {"k", s.adpfr.k},
                     {"nodes", s.adpfr.nodes},
                     {"dt_internal", s.adpfr.dt_internal},
                     {"profile_stride", s.adpfr.profile_stride}};
      break;
    case pinn::System::Flotation: {
      const auto& f = s.flotation;
      sj["flotation"] = {{"V_p", f.V_p},     {"V_f", f.V_f},     {"rho_feed", f.rho_feed},
                         {"rho_p", f.rho_p}, {"rho_f", f.rho_f}, {"kappa", f.kappa}};
      break;
    }
  }
  j["simulators"] = sj;

  j["kernels"] = fit_json(c.kernels.max_iters, c.kernels.lr, c.kernels.patience, c.kernels.tol);
  const auto& h = c.hybrid_ssm.fit;
  json hj = fit_json(h.max_iters, h.lr, h.patience, h.tol);
  hj["hidden"] = h.hidden;
  hj["layers"] = h.layers;
  hj["lag"] = h.lag;
  hj["chunk"] = h.chunk;
  hj["train_window"] = h.train_window;
  hj["standardize"] = h.standardize;
  hj["warm_start_head"] = h.warm_start_head;
  hj["init_from_conventional"] = c.hybrid_ssm.init_from_conventional;
  j["hybrid_ssm"] = hj;

  const auto& p = c.pinn;
  j["pinn"] = {{"q", p.q},
               {"hidden", p.hidden},
               {"rate_hidden", p.rate_hidden},
               {"residual_skip", p.residual_skip},
               {"standardize", p.standardize},
               {"train_points", p.train_points},
               {"val_points", p.val_points},
               {"test_points", p.test_points},
               {"collocation", p.collocation},
               {"margin", p.margin},
               {"node_stride", p.node_stride},
               {"epochs", p.train.epochs},
               {"lr", p.train.lr},
               {"patience", p.train.patience},
               {"tol", p.train.tol},
               {"eval_every", p.train.eval_every}};

  const auto& f = c.forecaster;
  j["forecaster"] = {{"H", f.H},
                     {"M", f.M},
                     {"init_steps", f.init_steps},
                     {"stride", f.stride},
                     {"max_origins", f.max_origins},
                     {"origin", f.origin}};
  return j;
}

void apply_paper_scale(ExperimentConfig& c) {
  c.paper_scale = true;
  c.kernels.lr = 1e-5;
  c.kernels.patience = 1000;
  c.kernels.tol = 1e-5;
  c.kernels.max_iters = 1000000;
  auto& h = c.hybrid_ssm.fit;
  h.lr = 1e-5;
  h.patience = 1000;
  h.tol = 1e-5;
  h.max_iters = 1000000;
  h.hidden = 128;
  h.layers = 5;
  h.train_window = 0;
  auto& p = c.pinn;
  p.q = c.system == pinn::System::Cstr ? 10 : 50;
  p.hidden = {256, 512, 256};
  p.rate_hidden = 100;
  p.train.lr = 1e-5;
  p.train.patience = 30000;
  p.train.tol = 1e-5;
  p.train.epochs = 10000000;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_hash(const ExperimentConfig& c) {
  const json j = to_json(c);
  return hex64(fnv1a(json{{"system", j["experiment"]["system"]}, {"simulators", j["simulators"]}}.dump()));
}

std::string input_models_hash(const ExperimentConfig& c) {
  const json j = to_json(c);
  return hex64(fnv1a(json{{"dataset", dataset_hash(c)},
                          {"seed", c.seed},
                          {"input_models", j["experiment"]["input_models"]},
                          {"kernels", j["kernels"]},
                          {"hybrid_ssm", j["hybrid_ssm"]}}
                         .dump()));
}

std::string output_models_hash(const ExperimentConfig& c) {
  const json j = to_json(c);
  return hex64(fnv1a(json{{"dataset", dataset_hash(c)},
                          {"seed", c.seed},
                          {"output_models", j["experiment"]["output_models"]},
                          {"pinn", j["pinn"]}}
                         .dump()));
}

std::string experiment_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j["experiment"].erase("out");
  return hex64(fnv1a(j.dump()));
}

}  // namespace dlf::app
