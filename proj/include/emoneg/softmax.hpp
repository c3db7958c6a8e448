// Copyright 2026 The emoneg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMONEG_SOFTMAX_HPP_
#define EMONEG_SOFTMAX_HPP_

#include <Eigen/Dense>
#include <cmath>

namespace emoneg {

template <typename Derived>
typename Derived::Scalar LogSumExp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

// Max-shifted softmax of a column vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, 1> Softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, 1> p =
      (logits.array() - logits.maxCoeff()).exp().matrix();
  p /= p.sum();
  return p;
}

// Row-wise softmax of a matrix.
template <typename Derived>
typename Derived::PlainObject RowSoftmax(const Eigen::MatrixBase<Derived>& logits) {
  typename Derived::PlainObject out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = Softmax(logits.row(r).transpose()).transpose();
  }
  return out;
}

}  // namespace emoneg

#endif  // EMONEG_SOFTMAX_HPP_
