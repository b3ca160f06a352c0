#include "dqjl/matrix.hpp"

#include <cblas.h>

#include <cmath>
#include <string>

#include "dqjl/errors.hpp"

namespace dqjl {

bool Matrix::all_finite() const {
  for (double v : d_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix::check_finite(const char* what) const {
  if (!all_finite()) {
    throw contract_error(std::string("non-finite entries in ") + what);
  }
}

namespace {

// Concurrency lives at the agent level; keep BLAS itself single-threaded.
const bool kBlasConfigured = [] {
  openblas_set_num_threads(1);
  return true;
}();

void check_gemm(std::size_t am, std::size_t ak, std::size_t bk, std::size_t bn,
                const Matrix& c, std::size_t cm, std::size_t cn) {
  if (ak != bk || c.rows() != cm || c.cols() != cn || am != cm || bn != cn) {
    throw contract_error("gemm shape mismatch");
  }
}

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_gemm(a.rows(), a.cols(), b.rows(), b.cols(), c, a.rows(), b.cols());
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
              static_cast<int>(a.rows()), static_cast<int>(b.cols()),
              static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
              accumulate ? 1.0 : 0.0, c.data(), static_cast<int>(c.cols()));
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_gemm(a.rows(), a.cols(), b.cols(), b.rows(), c, a.rows(), b.rows());
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans,
              static_cast<int>(a.rows()), static_cast<int>(b.rows()),
              static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
              accumulate ? 1.0 : 0.0, c.data(), static_cast<int>(c.cols()));
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_gemm(a.cols(), a.rows(), b.rows(), b.cols(), c, a.cols(), b.cols());
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
              static_cast<int>(a.cols()), static_cast<int>(b.cols()),
              static_cast<int>(a.rows()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
              accumulate ? 1.0 : 0.0, c.data(), static_cast<int>(c.cols()));
}

}  // namespace dqjl
