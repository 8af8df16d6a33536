#include "dlf/sim/systems.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dlf/sim/ode.hpp"

namespace dlf::sim {

double MultiFreqSignal::operator()(double t) const {
  double s = offset;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double w = 2.0 * static_cast<double>(i + 1) * std::numbers::pi * t / terms[i].period;
    s += terms[i].a * std::sin(w) + terms[i].b * std::cos(w);
  }
  return s;
}

double MultiFreqSignal::lower_bound() const {
  double s = offset;
  for (const auto& tm : terms) s -= std::abs(tm.a) + std::abs(tm.b);
  return s;
}

MultiFreqSignal MultiFreqSignal::seeded(double offset, double scale, std::vector<double> periods, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MultiFreqSignal s;
  s.offset = offset;
  for (std::size_t i = 0; i < periods.size(); ++i) {
    if (!(periods[i] > 0.0)) throw std::invalid_argument("multifreq: periods must be positive");
    const double amp = scale / static_cast<double>(i + 1);
    std::uniform_real_distribution<double> u(-amp, amp);
    Term tm;
    tm.a = u(rng);
    tm.b = u(rng);
    tm.period = periods[i];
    s.terms.push_back(tm);
  }
  if (s.lower_bound() <= 0.0) throw std::invalid_argument("multifreq: signal can reach non-positive values");
  return s;
}

double multifreq(const MultiFreqSignal& s, double t) { return s(t); }

const std::vector<double>& Dataset::input(const std::string& name) const {
  for (std::size_t i = 0; i < input_names.size(); ++i)
    if (input_names[i] == name) return inputs[i];
  throw std::out_of_range("dataset: no input channel " + name);
}

const std::vector<double>& Dataset::output(const std::string& name) const {
  for (std::size_t i = 0; i < output_names.size(); ++i)
    if (output_names[i] == name) return outputs[i];
  throw std::out_of_range("dataset: no output channel " + name);
}

void Dataset::set_split(std::size_t train, std::size_t val, std::size_t test) {
  if (train + val + test != rows()) throw std::invalid_argument("dataset: split does not cover all rows");
  n_train = train;
  n_val = val;
  n_test = test;
}

namespace {

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + xs[i];
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot open " + path.string() + " for writing");
  out << "# system=" << ds.system << '\n';
  out << "# inputs=" << join(ds.input_names) << '\n';
  out << "# outputs=" << join(ds.output_names) << '\n';
  out << "# split=" << ds.n_train << ',' << ds.n_val << ',' << ds.n_test << '\n';
  out << "# warnings=" << ds.warnings << '\n';
  out << "t";
  for (const auto& n : ds.input_names) out << ',' << n;
  for (const auto& n : ds.output_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.times[r]);
    out << buf;
    for (const auto& ch : ds.inputs) {
      std::snprintf(buf, sizeof buf, "%.17g", ch[r]);
      out << ',' << buf;
    }
    for (const auto& ch : ds.outputs) {
      std::snprintf(buf, sizeof buf, "%.17g", ch[r]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("dataset: write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path.string());
  Dataset ds;
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    break;  // CSV header row
  }
  const auto header = split(line, ',');
  ds.system = meta["system"];
  ds.input_names = meta["inputs"].empty() ? std::vector<std::string>{} : split(meta["inputs"], ',');
  ds.output_names = meta["outputs"].empty() ? std::vector<std::string>{} : split(meta["outputs"], ',');
  if (header.size() != 1 + ds.input_names.size() + ds.output_names.size()) {
    throw std::runtime_error("dataset: header does not match channel metadata in " + path.string());
  }
  ds.inputs.assign(ds.input_names.size(), {});
  ds.outputs.assign(ds.output_names.size(), {});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    auto next = [&]() {
      const double v = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("dataset: bad number in " + path.string());
      p = (*end == ',') ? end + 1 : end;
      return v;
    };
    ds.times.push_back(next());
    for (auto& ch : ds.inputs) ch.push_back(next());
    for (auto& ch : ds.outputs) ch.push_back(next());
  }
  const auto parts = split(meta["split"], ',');
  if (parts.size() == 3) {
    ds.set_split(std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2]));
  }
  if (meta.count("warnings")) ds.warnings = std::stol(meta["warnings"]);
  return ds;
}

Dataset simulate_cstr(const MultiFreqSignal& c_in, const CstrParams& p, std::size_t samples, double dt_sample,
                      double tol) {
  if (samples == 0 || !(dt_sample > 0.0)) throw std::invalid_argument("simulate_cstr: need samples and dt > 0");
  Dataset ds;
  ds.system = "cstr";
  ds.input_names = {"C_in"};
  ds.output_names = {"C"};
  ds.inputs.assign(1, {});
  ds.outputs.assign(1, {});
  Rhs f = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    dy[0] = p.F_over_V * (c_in(t) - y[0]) - p.k * y[0] * y[0];
  };
  Dopri5 solver(Dopri5Options{.rtol = tol, .atol = tol});
  std::vector<double> y{p.C0};
  double h = 0.0;
  for (std::size_t r = 0; r < samples; ++r) {
    const double t = static_cast<double>(r) * dt_sample;
    if (r > 0) h = solver.integrate(f, t - dt_sample, t, y, h);
    ds.times.push_back(t);
    ds.inputs[0].push_back(c_in(t));
    ds.outputs[0].push_back(y[0]);
  }
  return ds;
}

std::vector<double> pfr_grid(const PfrParams& p) {
  std::vector<double> z(p.nodes);
  for (int i = 0; i < p.nodes; ++i) z[i] = p.L * i / (p.nodes - 1);
  return z;
}

void pfr_rhs(const PfrParams& p, double c_in, double v, std::span<const double> C, std::span<double> dCdt) {
  const int N = p.nodes;
  const double dz = p.L / (N - 1);
  const double dd = p.D / (dz * dz);
  for (int i = 0; i < N; ++i) {
    const double left = i == 0 ? C[1] + 2.0 * dz * (v / p.D) * (c_in - C[0]) : C[i - 1];
    const double right = i == N - 1 ? C[N - 2] : C[i + 1];
    dCdt[i] = dd * (right - 2.0 * C[i] + left) - v * (C[i] - left) / dz - p.k * C[i] * C[i];
  }
}

int pfr_trapezoid_step(const PfrParams& p, std::vector<double>& C, double t, double h,
                       const std::function<double(double)>& c_in, const std::function<double(double)>& v) {
  const int N = p.nodes;
  const double dz = p.L / (N - 1);
  const double dd = p.D / (dz * dz);
  std::vector<double> f0(N), f1(N), r(N), lo(N), di(N), up(N), x(N);
  pfr_rhs(p, c_in(t), v(t), C, f0);
  const double cin1 = c_in(t + h);
  const double v1 = v(t + h);
  std::vector<double> Cn = C;  // Newton iterate, starts from previous state
  const double g = 2.0 * dz * v1 / p.D;
  int it = 0;
  for (; it < 20; ++it) {
    pfr_rhs(p, cin1, v1, Cn, f1);
    double rnorm = 0.0, cnorm = 0.0;
    for (int i = 0; i < N; ++i) {
      r[i] = Cn[i] - C[i] - 0.5 * h * (f0[i] + f1[i]);
      rnorm = std::max(rnorm, std::abs(r[i]));
      cnorm = std::max(cnorm, std::abs(Cn[i]));
    }
    if (rnorm <= 1e-12 * std::max(1.0, cnorm)) break;
    // Jacobian of f (tridiagonal), then J_r = I - h/2 J_f.
    for (int i = 0; i < N; ++i) {
      double jl = dd + v1 / dz;  // d f_i / d C_{i-1}
      double jd = -2.0 * dd - v1 / dz - 2.0 * p.k * Cn[i];
      double ju = dd;  // d f_i / d C_{i+1}
      if (i == 0) {
        // ghost C_{-1} = C_1 + g (c_in - C_0)
        jd += (dd + v1 / dz) * (-g);
        ju += dd + v1 / dz;
        jl = 0.0;
      }
      if (i == N - 1) {
        // ghost C_N = C_{N-2}
        jl += dd;
        ju = 0.0;
      }
      lo[i] = -0.5 * h * jl;
      di[i] = 1.0 - 0.5 * h * jd;
      up[i] = -0.5 * h * ju;
    }
    // Thomas algorithm: J_r dx = r.
    for (int i = 1; i < N; ++i) {
      const double m = lo[i] / di[i - 1];
      di[i] -= m * up[i - 1];
      r[i] -= m * r[i - 1];
    }
    x[N - 1] = r[N - 1] / di[N - 1];
    for (int i = N - 2; i >= 0; --i) x[i] = (r[i] - up[i] * x[i + 1]) / di[i];
    for (int i = 0; i < N; ++i) Cn[i] -= x[i];
  }
  if (it == 20) throw std::runtime_error("adpfr: Newton iteration did not converge");
  C.swap(Cn);
  return it;
}

Dataset simulate_adpfr(const MultiFreqSignal& c_in, const MultiFreqSignal& v, const PfrParams& p,
                       std::size_t samples, double dt_sample) {
  if (p.nodes < 10) throw std::invalid_argument("simulate_adpfr: need at least 10 nodes");
  if (p.profile_stride < 1) throw std::invalid_argument("simulate_adpfr: profile_stride must be >= 1");
  const auto z = pfr_grid(p);
  std::vector<int> keep;
  for (int i = 0; i < p.nodes; i += p.profile_stride) keep.push_back(i);
  if (keep.back() != p.nodes - 1) keep.push_back(p.nodes - 1);

  Dataset ds;
  ds.system = "adpfr";
  ds.input_names = {"C_in", "v"};
  ds.inputs.assign(2, {});
  char buf[48];
  for (int i : keep) {
    std::snprintf(buf, sizeof buf, "C@%.17g", z[i]);
    ds.output_names.emplace_back(buf);
  }
  ds.outputs.assign(keep.size(), {});

  std::vector<double> C(p.nodes, 0.0);
  auto fin = [&](double t) { return c_in(t); };
  auto fv = [&](double t) { return v(t); };
  const long sub = std::max(1L, std::lround(dt_sample / p.dt_internal));
  const double h = dt_sample / static_cast<double>(sub);
  for (std::size_t r = 0; r < samples; ++r) {
    const double t = static_cast<double>(r) * dt_sample;
    if (r > 0) {
      const double t0 = t - dt_sample;
      for (long s = 0; s < sub; ++s) pfr_trapezoid_step(p, C, t0 + s * h, h, fin, fv);
    }
    ds.times.push_back(t);
    ds.inputs[0].push_back(c_in(t));
    ds.inputs[1].push_back(v(t));
    for (std::size_t k = 0; k < keep.size(); ++k) ds.outputs[k].push_back(C[keep[k]]);
  }
  return ds;
}

RateFn default_rate(const FlotationParams& p) {
  return [k = p.kappa, V = p.V_p](double C_p, double) { return k * C_p * V; };
}

Dataset simulate_flotation(const FlotationInputs& in, const FlotationParams& p, const RateFn& rate,
                           std::size_t samples, double dt_sample, const std::vector<double>& init, double tol) {
  if (samples == 0 || !(dt_sample > 0.0)) throw std::invalid_argument("simulate_flotation: need samples and dt > 0");
  auto rhs_at = [&](double C_feed, double Q_feed, double Q_t, double Q_c, const std::vector<double>& y,
                    std::vector<double>& dy) {
    const double R = rate(y[0], y[1]);
    dy[0] = C_feed * (p.rho_feed / p.rho_p) * (Q_feed / p.V_p) - Q_t / p.V_p * y[0] - R / (p.rho_p * p.V_p);
    dy[1] = -Q_c / p.V_f * y[1] + R / (p.rho_f * p.V_f);
  };
  Dopri5 solver(Dopri5Options{.rtol = tol, .atol = tol});
  std::vector<double> y = init;
  if (y.empty()) {
    // Steady state under the inputs frozen at t = 0.
    y = {1.0, 1.0};
    const double cf = in.C_feed(0.0), qf = in.Q_feed(0.0), qt = in.Q_t(0.0), qc = in.Q_c(0.0);
    Rhs frozen = [&](double, const std::vector<double>& yy, std::vector<double>& dy) {
      rhs_at(cf, qf, qt, qc, yy, dy);
    };
    const double tau = std::max(p.V_p / qt, p.V_f / qc);
    Dopri5 warm(Dopri5Options{.rtol = tol, .atol = tol});
    warm.integrate(frozen, 0.0, 200.0 * tau, y);
  }
  if (y.size() != 2) throw std::invalid_argument("simulate_flotation: init must be {C_p, C_f}");
  Rhs f = [&](double t, const std::vector<double>& yy, std::vector<double>& dy) {
    rhs_at(in.C_feed(t), in.Q_feed(t), in.Q_t(t), in.Q_c(t), yy, dy);
  };

  Dataset ds;
  ds.system = "flotation";
  ds.input_names = {"C_feed", "Q_feed", "Q_t", "Q_c"};
  ds.output_names = {"C_p", "C_f"};
  ds.inputs.assign(4, {});
  ds.outputs.assign(2, {});
  double h = 0.0;
  for (std::size_t r = 0; r < samples; ++r) {
    const double t = static_cast<double>(r) * dt_sample;
    if (r > 0) h = solver.integrate(f, t - dt_sample, t, y, h);
    for (auto& c : y) {
      if (c < 0.0) {
        c = 0.0;
        ++ds.warnings;
      }
    }
    ds.times.push_back(t);
    ds.inputs[0].push_back(in.C_feed(t));
    ds.inputs[1].push_back(in.Q_feed(t));
    ds.inputs[2].push_back(in.Q_t(t));
    ds.inputs[3].push_back(in.Q_c(t));
    ds.outputs[0].push_back(y[0]);
    ds.outputs[1].push_back(y[1]);
  }
  return ds;
}

}  // namespace dlf::sim
