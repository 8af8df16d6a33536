#include "dlf/ssm/ssm.hpp"

#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace dlf::ssm {

void ContinuousSSM::validate() const {
  const auto m = F.rows();
  if (F.cols() != m) throw std::invalid_argument("ssm: F must be square");
  if (L.rows() != m) throw std::invalid_argument("ssm: L row count must match F");
  if (Sigma_w.rows() != L.cols() || Sigma_w.cols() != L.cols()) {
    throw std::invalid_argument("ssm: Sigma_w must be s x s with s = cols(L)");
  }
  if (H.size() != 0 && H.size() != m) throw std::invalid_argument("ssm: H must be 1 x m");
  if (P0.size() != 0 && (P0.rows() != m || P0.cols() != m)) throw std::invalid_argument("ssm: P0 must be m x m");
}

Mat<double> condition_covariance(const Mat<double>& P) {
  Mat<double> s = symmetrize(P);
  const Eigen::MatrixXd e = to_eigen(s);
  if (Eigen::LLT<Eigen::MatrixXd>(e).info() == Eigen::Success) return s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  const double lo = es.eigenvalues().minCoeff();
  if (lo >= 0.0) return s;
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (lo < -1e-9 * scale) {
    throw std::runtime_error("ssm: covariance not positive semidefinite (min eigenvalue " + std::to_string(lo) + ")");
  }
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd fixed = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return symmetrize(from_eigen(fixed));
}

Eigen::MatrixXd psd_factor(const Mat<double>& S, bool* clipped) {
  const Eigen::MatrixXd e = to_eigen(symmetrize(S));
  if (!e.allFinite()) throw std::domain_error("psd_factor: non-finite matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  if (clipped) *clipped = es.eigenvalues().minCoeff() < 0.0;
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  if (!M.allFinite()) throw std::domain_error("expm: non-finite input");
  Eigen::MatrixXd E = M.exp();
  if (!E.allFinite()) throw std::domain_error("expm: non-finite result");
  return E;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const ContinuousSSM& cont, double dt) {
  cont.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("discretize: dt must be positive");
  const auto m = cont.F.rows();
  Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  blk.topLeftCorner(m, m) = cont.F;
  blk.topRightCorner(m, m) = cont.L * cont.Sigma_w * cont.L.transpose();
  blk.bottomRightCorner(m, m) = -cont.F.transpose();
  const Eigen::MatrixXd E = expm(blk * dt);
  Eigen::MatrixXd A = E.topLeftCorner(m, m);
  Eigen::MatrixXd Q = E.topRightCorner(m, m) * A.transpose();
  Q = 0.5 * (Q + Q.transpose()).eval();
  return {A, Q};
}

Eigen::MatrixXd steady_state_covariance(const ContinuousSSM& cont) {
  cont.validate();
  const auto m = cont.F.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(cont.F, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0) throw std::domain_error("no finite steady state");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  // vec(F P + P F^T) = (I (x) F + F (x) I) vec(P), column-major vec.
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      K.block(i * m, j * m, m, m) += I(i, j) * cont.F;
      K.block(i * m, j * m, m, m) += cont.F(i, j) * I;
    }
  const Eigen::MatrixXd C = cont.L * cont.Sigma_w * cont.L.transpose();
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(C.data(), m * m);
  Eigen::VectorXd x = K.partialPivLu().solve(rhs);
  Eigen::MatrixXd P = Eigen::Map<Eigen::MatrixXd>(x.data(), m, m);
  return 0.5 * (P + P.transpose());
}

std::vector<GaussianBelief> rts_smooth(const DiscreteSSM& model, const std::vector<GaussianBelief>& filtered) {
  std::vector<GaussianBelief> out(filtered);
  if (filtered.size() < 2) return out;
  const Eigen::MatrixXd A = to_eigen(model.A);
  const Eigen::MatrixXd Q = to_eigen(model.Q);
  for (std::size_t k = filtered.size() - 1; k-- > 0;) {
    const Eigen::MatrixXd m = to_eigen(filtered[k].m);
    const Eigen::MatrixXd P = to_eigen(filtered[k].P);
    const Eigen::MatrixXd mp = A * m;
    Eigen::MatrixXd Pp = A * P * A.transpose() + Q;
    Pp = 0.5 * (Pp + Pp.transpose()).eval();
    // G = P A^T Pp^{-1}; a singular Pp gets the pseudo-inverse.
    Eigen::MatrixXd G;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Pp);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      G = ldlt.solve(A * P).transpose();
    } else {
      G = P * A.transpose() * Pp.completeOrthogonalDecomposition().pseudoInverse();
    }
    const Eigen::MatrixXd ms = m + G * (to_eigen(out[k + 1].m) - mp);
    const Eigen::MatrixXd Ps = P + G * (to_eigen(out[k + 1].P) - Pp) * G.transpose();
    out[k].m = from_eigen(ms);
    out[k].P = condition_covariance(from_eigen(Ps));
  }
  return out;
}

}  // namespace dlf::ssm
