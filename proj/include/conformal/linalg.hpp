#pragma once

// Small dense linear algebra at a point: rank, kernel, determinant, adjugate
// and the derivative of the adjugate.

#include <Eigen/Dense>
#include <vector>

#include "conformal/tensor.hpp"

namespace conformal {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct RankInfo {
  int rank = 0;
  Mat kernel;  // orthonormal columns spanning the null space
};

/// Numerical rank with full pivoting; pivots below rel_tol * (largest pivot)
/// count as zero.
RankInfo rank_kernel(const Mat& m, double rel_tol);

double determinant(const Mat& m);

/// adj(M) with adj(M) M = det(M) I; well defined for singular M.
Mat adjugate(const Mat& m);

/// Directional derivative of det and adj along dm.
double determinant_derivative(const Mat& m, const Mat& dm);
std::vector<Mat> adjugate_derivatives(const Mat& m, const std::vector<Mat>& dms);

Mat to_matrix(const NumTensor& t);  // rank-2 tensor
NumTensor from_matrix(const Mat& m);

}  // namespace conformal
