#include "conformal/linalg.hpp"

#include <cmath>

namespace conformal {

RankInfo rank_kernel(const Mat& m, double rel_tol) {
  RankInfo info;
  if (m.cols() == 0) return info;
  if (m.rows() == 0 || m.cwiseAbs().maxCoeff() == 0.0) {
    info.rank = 0;
    info.kernel = Mat::Identity(m.cols(), m.cols());
    return info;
  }
  Eigen::FullPivLU<Mat> lu(m);
  lu.setThreshold(rel_tol);
  info.rank = static_cast<int>(lu.rank());
  if (info.rank < m.cols()) {
    Mat k = lu.kernel();
    Eigen::HouseholderQR<Mat> qr(k);
    info.kernel = qr.householderQ() * Mat::Identity(k.rows(), k.cols());
  } else {
    info.kernel = Mat(m.cols(), 0);
  }
  return info;
}

double determinant(const Mat& m) {
  if (m.rows() == 0) return 1.0;
  return Eigen::FullPivLU<Mat>(m).determinant();
}

Mat adjugate(const Mat& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) return Mat(0, 0);
  if (n == 1) return Mat::Ones(1, 1);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  Vec adj_s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) p *= s(j);
    adj_s(i) = p;
  }
  double sign = determinant(svd.matrixU()) * determinant(svd.matrixV());
  sign = sign < 0 ? -1.0 : 1.0;
  return sign * svd.matrixV() * adj_s.asDiagonal() * svd.matrixU().transpose();
}

double determinant_derivative(const Mat& m, const Mat& dm) { return (adjugate(m) * dm).trace(); }

namespace {

Mat minor_of(const Mat& m, Eigen::Index row, Eigen::Index col) {
  const Eigen::Index n = m.rows();
  Mat out(n - 1, n - 1);
  for (Eigen::Index i = 0, oi = 0; i < n; ++i) {
    if (i == row) continue;
    for (Eigen::Index j = 0, oj = 0; j < n; ++j) {
      if (j == col) continue;
      out(oi, oj++) = m(i, j);
    }
    ++oi;
  }
  return out;
}

}  // namespace

// adj(M)_ij = (-1)^(i+j) det(M without row j, column i), and
// d det(X) = tr(adj(X) dX) applied to each minor.
std::vector<Mat> adjugate_derivatives(const Mat& m, const std::vector<Mat>& dms) {
  const Eigen::Index n = m.rows();
  std::vector<Mat> out(dms.size(), Mat::Zero(n, n));
  if (n == 1) return out;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Mat adj_minor = adjugate(minor_of(m, j, i));
      const double sign = ((i + j) % 2) ? -1.0 : 1.0;
      for (std::size_t k = 0; k < dms.size(); ++k)
        out[k](i, j) = sign * (adj_minor * minor_of(dms[k], j, i)).trace();
    }
  return out;
}

Mat to_matrix(const NumTensor& t) {
  Mat m(t.dim(0), t.dim(1));
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) m(i, j) = t(i, j);
  return m;
}

NumTensor from_matrix(const Mat& m) {
  NumTensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
  return t;
}

}  // namespace conformal
