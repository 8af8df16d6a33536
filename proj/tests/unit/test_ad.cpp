#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "dlf/ad/value.hpp"

using dlf::ad::Tape;
using dlf::ad::Value;

namespace {

double central_diff(const std::function<double(const std::vector<double>&)>& f,
                    std::vector<double> x, std::size_t i, double h = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

}  // namespace

TEST_CASE("square and tanh basics") {
  Tape t;
  Value x = t.variable(3.0);
  Value y = dlf::ad::square(x);
  auto adj = t.backward(y);
  CHECK(adj[x.id()] == doctest::Approx(6.0));

  Tape t2;
  Value z = t2.variable(0.0);
  Value w = dlf::ad::tanh(z);
  CHECK(t2.backward(w)[z.id()] == doctest::Approx(1.0));
}

TEST_CASE("constants fold without touching the tape") {
  Tape t;
  Value a = 2.0;
  Value b = a * 3.0 + dlf::ad::exp(Value(0.0));
  CHECK(b.is_constant());
  CHECK(b.value() == doctest::Approx(7.0));
  CHECK(t.size() == 0);
}

TEST_CASE("mixed expression gradient matches finite differences") {
  auto fd = [](const std::vector<double>& v) {
    const double a = v[0], b = v[1], c = v[2];
    return std::log(a * a + 1.0) / b + std::sqrt(c) * std::tanh(a - b) +
           1.0 / (1.0 + std::exp(-c * a)) - 2.0 / c;
  };
  std::vector<double> x0{0.7, 1.3, 2.1};
  Tape t;
  auto v = t.variables(x0);
  Value y = dlf::ad::log(v[0] * v[0] + 1.0) / v[1] + dlf::ad::sqrt(v[2]) * dlf::ad::tanh(v[0] - v[1]) +
            dlf::ad::sigmoid(v[2] * v[0]) - 2.0 / v[2];
  CHECK(y.value() == doctest::Approx(fd(x0)).epsilon(1e-14));
  auto adj = t.backward(y);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(adj[v[i].id()] == doctest::Approx(central_diff(fd, x0, i)).epsilon(1e-7));
  }
}

TEST_CASE("affine and dot agree with scalar arithmetic") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(6), x(6);
  for (auto& e : w) e = u(rng);
  for (auto& e : x) e = u(rng);
  Tape t;
  auto wv = t.variables(w);
  auto xv = t.variables(x);
  Value b = t.variable(0.25);
  Value aff = t.affine(wv, xv, b);
  Value dp = t.dot(wv, xv) + b;
  CHECK(aff.value() == doctest::Approx(dp.value()).epsilon(1e-15));
  auto g1 = t.backward(aff);
  auto g2 = t.backward(dp);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(g1[wv[i].id()] == doctest::Approx(x[i]));
    CHECK(g1[xv[i].id()] == doctest::Approx(w[i]));
    CHECK(g2[wv[i].id()] == doctest::Approx(x[i]));
  }
  CHECK(g1[b.id()] == doctest::Approx(1.0));
}

TEST_CASE("affine on non-contiguous operands gathers") {
  Tape t;
  Value a = t.variable(1.0);
  Value junk = t.variable(9.0);
  Value c = t.variable(2.0);
  (void)junk;
  std::vector<Value> w{a, c};
  std::vector<Value> x{Value(3.0), c};
  Value y = t.affine(w, x, 0.0);
  CHECK(y.value() == doctest::Approx(7.0));
  auto adj = t.backward(y);
  CHECK(adj[a.id()] == doctest::Approx(3.0));
  CHECK(adj[c.id()] == doctest::Approx(4.0));
}

TEST_CASE("two-layer tanh network gradient matches finite differences") {
  // 2 -> 3 -> 1, params packed as W1(3x2), b1, W2(1x3), b2.
  auto forward = [](const std::vector<double>& p) {
    const double in[2] = {0.3, -0.8};
    double out = p[11];
    for (int j = 0; j < 3; ++j) {
      double h = p[6 + j];
      for (int k = 0; k < 2; ++k) h += p[j * 2 + k] * in[k];
      out += p[9 + j] * std::tanh(h);
    }
    return out * out;
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> p(12);
  for (auto& e : p) e = u(rng);

  Tape t;
  auto pv = t.variables(p);
  std::vector<Value> in{Value(0.3), Value(-0.8)};
  std::vector<Value> hidden;
  for (int j = 0; j < 3; ++j) {
    std::span<const Value> wj(pv.data() + j * 2, 2);
    hidden.push_back(dlf::ad::tanh(t.affine(wj, in, pv[6 + j])));
  }
  Value out = t.affine(std::span<const Value>(pv.data() + 9, 3), hidden, pv[11]);
  Value loss = dlf::ad::square(out);
  CHECK(loss.value() == doctest::Approx(forward(p)).epsilon(1e-14));
  auto adj = t.backward(loss);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(adj[pv[i].id()] == doctest::Approx(central_diff(forward, p, i)).epsilon(1e-7));
  }
}

TEST_CASE("grad records a differentiable gradient graph") {
  SUBCASE("cubic") {
    Tape t;
    Value x = t.variable(1.5);
    Value y = x * x * x;
    Value dy = t.grad(y, std::vector<Value>{x})[0];
    CHECK(dy.value() == doctest::Approx(3.0 * 1.5 * 1.5));
    Value d2y = t.grad(dy, std::vector<Value>{x})[0];
    CHECK(d2y.value() == doctest::Approx(6.0 * 1.5));
    Value d3y = t.grad(d2y, std::vector<Value>{x})[0];
    CHECK(d3y.value() == doctest::Approx(6.0));
  }
  SUBCASE("tanh second derivative") {
    Tape t;
    const double x0 = 0.4;
    Value x = t.variable(x0);
    Value y = dlf::ad::tanh(2.0 * x);
    Value dy = t.grad(y, std::vector<Value>{x})[0];
    Value d2y = t.grad(dy, std::vector<Value>{x})[0];
    const double th = std::tanh(2.0 * x0);
    CHECK(dy.value() == doctest::Approx(2.0 * (1.0 - th * th)));
    CHECK(d2y.value() == doctest::Approx(-8.0 * th * (1.0 - th * th)));
  }
  SUBCASE("mixed partial through affine network then reverse to params") {
    // u(z) = w2 . tanh(w1 * z + b1); d2u/dz2 then d/dw via backward, checked by FD.
    auto d2u = [](const std::vector<double>& p, double z) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) {
        const double th = std::tanh(p[j] * z + p[3 + j]);
        s += p[6 + j] * p[j] * p[j] * (-2.0 * th * (1.0 - th * th));
      }
      return s;
    };
    std::vector<double> p{0.5, -1.1, 0.9, 0.1, 0.2, -0.3, 1.2, -0.7, 0.4};
    const double z0 = 0.35;
    Tape t;
    auto pv = t.variables(p);
    Value z = t.variable(z0);
    std::vector<Value> h;
    for (int j = 0; j < 3; ++j) {
      std::vector<Value> wj{pv[j]};
      std::vector<Value> zj{z};
      h.push_back(dlf::ad::tanh(t.affine(wj, zj, pv[3 + j])));
    }
    Value u = t.affine(std::span<const Value>(pv.data() + 6, 3), h, 0.0);
    Value uz = t.grad(u, std::vector<Value>{z})[0];
    Value uzz = t.grad(uz, std::vector<Value>{z})[0];
    CHECK(uzz.value() == doctest::Approx(d2u(p, z0)).epsilon(1e-12));
    auto adj = t.backward(uzz);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto f = [&](const std::vector<double>& q) { return d2u(q, z0); };
      CHECK(adj[pv[i].id()] == doctest::Approx(central_diff(f, p, i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("backward reports non-finite nodes") {
  Tape t;
  Value x = t.variable(-1.0);
  Value y = dlf::ad::log(x);
  CHECK_THROWS_AS(t.backward(y), dlf::ad::NonFiniteError);
}

TEST_CASE("operands from different tapes are rejected") {
  Tape a, b;
  Value x = a.variable(1.0);
  Value y = b.variable(2.0);
  CHECK_THROWS_AS(x + y, std::logic_error);
}

TEST_CASE("lincomb matches the scalar expression to first and second order") {
  const std::vector<double> w{0.5, -2.0, 3.0, 1.25};
  auto f = [&](const std::vector<double>& x) {
    return 0.7 + w[0] * x[0] * x[1] + w[1] * std::exp(x[1]) + w[2] * 4.0 + w[3] * x[0] * x[0] * x[0];
  };
  const std::vector<double> x0{0.3, -0.8};
  Tape t;
  auto xv = t.variables(x0);
  std::vector<Value> terms{xv[0] * xv[1], dlf::ad::exp(xv[1]), Value(4.0), xv[0] * xv[0] * xv[0]};
  Value y = t.lincomb(w, terms, 0.7);
  CHECK(y.value() == doctest::Approx(f(x0)).epsilon(1e-14));
  auto adj = t.backward(y);
  for (std::size_t i = 0; i < 2; ++i) CHECK(adj[xv[i].id()] == doctest::Approx(central_diff(f, x0, i)).epsilon(1e-7));
  // d/dx0 = w0 x1 + 3 w3 x0^2, then d2/dx0^2 = 6 w3 x0.
  Value g0 = t.grad(y, std::vector<Value>{xv[0]})[0];
  CHECK(g0.value() == doctest::Approx(w[0] * x0[1] + 3.0 * w[3] * x0[0] * x0[0]).epsilon(1e-14));
  Value g00 = t.grad(g0, std::vector<Value>{xv[0]})[0];
  CHECK(g00.value() == doctest::Approx(6.0 * w[3] * x0[0]).epsilon(1e-14));

  Tape c;
  std::vector<Value> consts{Value(1.0), Value(2.0)};
  const std::vector<double> w2{3.0, 4.0};
  Value k = c.lincomb(w2, consts, 1.0);
  CHECK(k.is_constant());
  CHECK(k.value() == 12.0);
  CHECK(c.size() == 0);
}
