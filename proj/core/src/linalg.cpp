// Copyright 2026 The qbreak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qbreak/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace qbreak {

std::optional<Matrix> symmetric_inverse_sqrt(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return std::nullopt;
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const Vector& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || ev.minCoeff() <= 1e-12 * top) return std::nullopt;
  const Vector inv_root = ev.array().rsqrt().matrix();
  return eig.eigenvectors() * inv_root.asDiagonal() *
         eig.eigenvectors().transpose();
}

std::optional<Matrix> spd_inverse(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return std::nullopt;
  Eigen::LDLT<Matrix> ldlt(0.5 * (m + m.transpose()));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Vector d = ldlt.vectorD();
  const double top = d.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || d.minCoeff() <= 1e-13 * top) return std::nullopt;
  return ldlt.solve(Matrix::Identity(m.rows(), m.cols()));
}

std::optional<Matrix> general_inverse(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return std::nullopt;
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) return std::nullopt;
  return lu.inverse();
}

std::optional<double> inverse_quadratic_form(const Matrix& m, const Vector& x) {
  auto inv = spd_inverse(m);
  if (!inv) return std::nullopt;
  return x.dot(*inv * x);
}

Matrix row_block(const Matrix& m, Eigen::Index begin, Eigen::Index end) {
  return m.middleRows(begin, end - begin);
}

Vector segment(const Vector& v, Eigen::Index begin, Eigen::Index end) {
  return v.segment(begin, end - begin);
}

Eigen::Index column_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace qbreak
