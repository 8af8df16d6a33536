#include "dlf/kernels/kernels.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "dlf/ad/value.hpp"

namespace dlf::kernels {

using Eigen::MatrixXd;

std::string to_string(KernelKind kind) {
  return kind == KernelKind::Matern32Augmented ? "matern32" : "exponential";
}

KernelKind kind_from_string(const std::string& s) {
  if (s == "matern32" || s == "matern") return KernelKind::Matern32Augmented;
  if (s == "exponential") return KernelKind::ExponentialAugmented;
  throw std::invalid_argument("unknown kernel kind '" + s + "'");
}

std::size_t state_dim(KernelKind kind) { return kind == KernelKind::Matern32Augmented ? 3 : 2; }

KernelParams KernelParams::natural(double lambda, double q_w1, double q_w2, double R) {
  if (!(lambda > 0 && q_w1 > 0 && q_w2 > 0 && R > 0)) {
    throw std::invalid_argument("kernel parameters must be positive");
  }
  return KernelParams{{std::log(lambda), std::log(q_w1), std::log(q_w2), std::log(R)}};
}

KernelParams initial_params(std::span<const double> ys, double dt) {
  if (ys.size() < 2) throw std::invalid_argument("initial_params: need at least two observations");
  const double n = static_cast<double>(ys.size());
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double var = 0.0;
  for (double y : ys) var += (y - mean) * (y - mean);
  var /= n;
  var = std::max(var, 1e-12);
  const double T = n * dt;
  return KernelParams::natural(1.0 / (10.0 * dt), var, 0.1 * var / T, 0.01 * var);
}

ssm::ContinuousSSM matern32_continuous(const KernelParams& p) {
  const double l = p.lambda();
  ssm::ContinuousSSM c;
  c.F = (MatrixXd(3, 3) << 0, 1, 0, -l * l, -2 * l, l * l, 0, 0, 0).finished();
  c.L = (MatrixXd(3, 2) << 0, 1, 1, 0, 0, 1).finished();
  c.Sigma_w = (MatrixXd(2, 2) << p.q_w1(), 0, 0, p.q_w2()).finished();
  c.H = (Eigen::RowVectorXd(3) << 1, 0, 0).finished();
  c.R = p.R();
  return c;
}

ssm::ContinuousSSM exponential_continuous(const KernelParams& p) {
  const double l = p.lambda();
  ssm::ContinuousSSM c;
  c.F = (MatrixXd(2, 2) << -l, l, 0, 0).finished();
  c.L = (MatrixXd(2, 2) << 1, 1, 0, 1).finished();
  c.Sigma_w = (MatrixXd(2, 2) << p.q_w1(), 0, 0, p.q_w2()).finished();
  c.H = (Eigen::RowVectorXd(2) << 1, 0).finished();
  c.R = p.R();
  return c;
}

ssm::ContinuousSSM matern32_stationary(const KernelParams& p) {
  const double l = p.lambda();
  ssm::ContinuousSSM c;
  c.F = (MatrixXd(2, 2) << 0, 1, -l * l, -2 * l).finished();
  c.L = (MatrixXd(2, 1) << 0, 1).finished();
  c.Sigma_w = MatrixXd::Constant(1, 1, p.q_w1());
  c.H = (Eigen::RowVectorXd(2) << 1, 0).finished();
  c.R = p.R();
  return c;
}

ssm::ContinuousSSM exponential_stationary(const KernelParams& p) {
  ssm::ContinuousSSM c;
  c.F = MatrixXd::Constant(1, 1, -p.lambda());
  c.L = MatrixXd::Ones(1, 1);
  c.Sigma_w = MatrixXd::Constant(1, 1, p.q_w1());
  c.H = Eigen::RowVectorXd::Ones(1);
  c.R = p.R();
  return c;
}

double nll(const KernelModel& km, std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("nll: empty sequence");
  return ssm::kf_filter(build(km, ys[0]), ys).nll;
}

double continuation_nll(const KernelModel& km, std::span<const double> train, std::span<const double> val) {
  if (train.empty() || val.empty()) throw std::invalid_argument("continuation_nll: empty sequence");
  const auto model = build(km, train[0]);
  ssm::GaussianBelief b{model.m0, model.P0};
  for (double y : train) b = ssm::kf_step(model, b, y).posterior;
  double total = 0.0;
  for (double y : val) {
    auto st = ssm::kf_step(model, b, y);
    total += st.nll_increment;
    b = st.posterior;
  }
  return total;
}

FitReport fit_kernel(KernelKind kind, std::span<const double> ys, double dt, const FitConfig& cfg,
                     std::span<const double> ys_val, std::optional<KernelParams> init) {
  if (ys.size() < state_dim(kind)) throw std::invalid_argument("fit_kernel: sequence shorter than state dimension");
  FitReport rep;
  rep.params = init ? *init : initial_params(ys, dt);
  KernelModel km{kind, rep.params, dt};
  auto score = [&](const KernelParams& p) {
    km.params = p;
    return ys_val.empty() ? nll(km, ys) : continuation_nll(km, ys, ys_val);
  };
  rep.best_score = score(rep.params);
  if (!std::isfinite(rep.best_score)) throw std::runtime_error("fit_kernel: non-finite NLL at initial parameters");

  std::vector<double> theta(rep.params.log.begin(), rep.params.log.end());
  ad::Adam opt(4, ad::AdamConfig{.lr = cfg.lr});
  ad::EarlyStopping stop(cfg.patience, cfg.tol);
  stop.update(rep.best_score);
  ad::Tape tape;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    tape.clear();
    auto tv = tape.variables(theta);
    std::array<ad::Value, 4> lt{tv[0], tv[1], tv[2], tv[3]};
    std::vector<double> g(4, 0.0);
    bool ok = true;
    try {
      auto model = build<ad::Value>(kind, lt, dt, ys[0]);
      auto res = ssm::kf_filter(model, ys);
      auto adj = tape.backward(res.nll);
      for (int k = 0; k < 4; ++k) g[k] = adj[tv[k].id()];
    } catch (const ad::NonFiniteError&) {
      ok = false;
    } catch (const ssm::SingularInnovation&) {
      ok = false;
    }
    if (ok) {
      opt.step(theta, g);
    } else {
      opt.skip();
    }
    rep.iters = it;
    KernelParams cur;
    std::copy(theta.begin(), theta.end(), cur.log.begin());
    double s;
    try {
      s = score(cur);
    } catch (const std::exception&) {
      s = std::numeric_limits<double>::infinity();
    }
    if (stop.update(s)) {
      rep.params = cur;
      rep.best_score = s;
      rep.best_iter = it;
    }
    if (stop.should_stop()) break;
  }
  rep.skipped_steps = opt.skipped();
  return rep;
}

void save_kernel(const std::filesystem::path& path, const KernelModel& km) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_kernel: cannot open " + path.string());
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%a", v);
    out << key << ' ' << buf << '\n';
  };
  out << "kind " << to_string(km.kind) << '\n';
  put("lambda", km.params.lambda());
  put("q_w1", km.params.q_w1());
  put("q_w2", km.params.q_w2());
  put("R", km.params.R());
  put("dt", km.dt);
}

KernelModel load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_kernel: cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string k, v;
    if (!(ls >> k >> v)) throw std::runtime_error("load_kernel: bad line: " + line);
    kv[k] = v;
  }
  auto num = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("load_kernel: missing key ") + key);
    return std::strtod(it->second.c_str(), nullptr);
  };
  if (!kv.count("kind")) throw std::runtime_error("load_kernel: missing key kind");
  KernelModel km;
  km.kind = kind_from_string(kv["kind"]);
  km.params = KernelParams::natural(num("lambda"), num("q_w1"), num("q_w2"), num("R"));
  km.dt = num("dt");
  return km;
}

}  // namespace dlf::kernels
