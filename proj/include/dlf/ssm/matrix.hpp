#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "dlf/ad/value.hpp"

namespace dlf::ssm {

/// Small dense row-major matrix over double or ad::Value. Vectors are
/// column matrices. Only what the filters need.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, T fill = T(0.0)) : r_(rows), c_(cols), d_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::initializer_list<T> vals) : r_(rows), c_(cols), d_(vals) {
    if (d_.size() != rows * cols) throw std::invalid_argument("Mat: initializer size mismatch");
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1.0);
    return m;
  }
  static Mat column(const std::vector<T>& v) {
    Mat m(v.size(), 1);
    m.d_ = v;
    return m;
  }

  std::size_t rows() const { return r_; }
  std::size_t cols() const { return c_; }
  T& operator()(std::size_t i, std::size_t j) { return d_[i * c_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return d_[i * c_ + j]; }
  T& operator[](std::size_t i) { return d_[i]; }
  const T& operator[](std::size_t i) const { return d_[i]; }
  const std::vector<T>& data() const { return d_; }

  Mat transpose() const {
    Mat t(c_, r_);
    for (std::size_t i = 0; i < r_; ++i)
      for (std::size_t j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t r_ = 0;
  std::size_t c_ = 0;
  std::vector<T> d_;
};

namespace detail {

inline ad::Tape* find_tape(const ad::Value* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (a[i].tape()) return a[i].tape();
  return nullptr;
}

}  // namespace detail

template <class T>
Mat<T> operator+(const Mat<T>& a, const Mat<T>& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Mat<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c[i] = a[i] + b[i];
  return c;
}

template <class T>
Mat<T> operator-(const Mat<T>& a, const Mat<T>& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Mat<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c[i] = a[i] - b[i];
  return c;
}

template <class T>
Mat<T> operator*(const Mat<T>& a, const T& s) {
  Mat<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c[i] = a[i] * s;
  return c;
}

template <class T>
Mat<T> operator*(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("Mat: product dimension mismatch");
  const std::size_t n = a.cols();
  Mat<T> c(a.rows(), b.cols());
  if constexpr (std::is_same_v<T, double>) {
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += a(i, k) * b(k, j);
        c(i, j) = s;
      }
  } else {
    ad::Tape* tape = detail::find_tape(a.data().data(), a.data().size());
    if (!tape) tape = detail::find_tape(b.data().data(), b.data().size());
    std::vector<ad::Value> lhs(n), rhs(n);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          lhs[k] = a(i, k);
          rhs[k] = b(k, j);
        }
        if (tape) {
          c(i, j) = tape->dot(lhs, rhs);
        } else {
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k) s += lhs[k].value() * rhs[k].value();
          c(i, j) = s;
        }
      }
  }
  return c;
}

template <class T>
Mat<T> symmetrize(const Mat<T>& p) {
  Mat<T> s(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) s(i, j) = 0.5 * (p(i, j) + p(j, i));
  return s;
}

inline Mat<double> value_of(const Mat<double>& m) { return m; }
inline Mat<double> value_of(const Mat<ad::Value>& m) {
  Mat<double> d(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) d[i] = m[i].value();
  return d;
}

template <class T>
Mat<ad::Value> lift(const Mat<T>& m) {
  Mat<ad::Value> v(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) v[i] = m[i];
  return v;
}

inline Eigen::MatrixXd to_eigen(const Mat<double>& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline Mat<double> from_eigen(const Eigen::MatrixXd& e) {
  Mat<double> m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

}  // namespace dlf::ssm
