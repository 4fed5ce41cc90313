#pragma once

// Row-major GEMM on top of Eigen's blocked product kernels.

#include <Eigen/Core>

#include <cstddef>

namespace adasiam::detail {

enum class Trans { kNo, kYes };

namespace eigen {
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>>;
using View = Eigen::Map<RowMajor, 0, Eigen::OuterStride<>>;
}  // namespace eigen

// C (m x n) = alpha * op(A) (m x k) * op(B) (k x n) + beta * C
inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                 const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
                 double* c, std::size_t ldc) {
  using namespace eigen;
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  const ConstView A(a, ta == Trans::kYes ? K : M, ta == Trans::kYes ? M : K,
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(lda)));
  const ConstView B(b, tb == Trans::kYes ? N : K, tb == Trans::kYes ? K : N,
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(ldb)));
  View C(c, M, N, Eigen::OuterStride<>(static_cast<Eigen::Index>(ldc)));
  if (beta == 0.0) {
    C.setZero();
  } else if (beta != 1.0) {
    C *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;
  if (ta == Trans::kNo && tb == Trans::kNo) {
    C.noalias() += alpha * A * B;
  } else if (ta == Trans::kNo) {
    C.noalias() += alpha * A * B.transpose();
  } else if (tb == Trans::kNo) {
    C.noalias() += alpha * A.transpose() * B;
  } else {
    C.noalias() += alpha * A.transpose() * B.transpose();
  }
}

}  // namespace adasiam::detail
