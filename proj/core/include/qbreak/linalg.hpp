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

#ifndef QBREAK_LINALG_HPP_
#define QBREAK_LINALG_HPP_

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace qbreak {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Symmetric inverse square root M^{-1/2} via eigendecomposition. Returns
// nullopt when M is not symmetric positive definite (relative eigenvalue
// floor 1e-12).
std::optional<Matrix> symmetric_inverse_sqrt(const Matrix& m);

// Inverse of a symmetric positive definite matrix, or nullopt if singular.
std::optional<Matrix> spd_inverse(const Matrix& m);

// Inverse of a general square matrix, or nullopt if (numerically) singular.
std::optional<Matrix> general_inverse(const Matrix& m);

// x' M^{-1} x for symmetric positive definite M, or nullopt if singular.
std::optional<double> inverse_quadratic_form(const Matrix& m, const Vector& x);

// Rows [begin, end) of a matrix / entries of a vector.
Matrix row_block(const Matrix& m, Eigen::Index begin, Eigen::Index end);
Vector segment(const Vector& v, Eigen::Index begin, Eigen::Index end);

// Column rank of m with a scale-aware tolerance.
Eigen::Index column_rank(const Matrix& m);

}  // namespace qbreak

#endif  // QBREAK_LINALG_HPP_
