// Copyright 2026 The sdemd Authors. All Rights Reserved.
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

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sdemd/emd.hpp"

namespace sdemd {

// Brute-force EMD: every (2m - 1)-subset of the m * m cells is tried as a
// basis, the marginal equations are solved on it by LU, and the cheapest
// nonnegative solution wins. Independent of the transportation simplex.
template <typename Scalar>
Scalar oracle_emd_enum(const Vector<Scalar>& h, const Vector<Scalar>& g, const Matrix<Scalar>& d) {
  validate_transport_inputs(h, g, d, 1e-9);
  const int m = static_cast<int>(h.size());
  if (m > 4) throw std::invalid_argument("enumeration oracle supports m <= 4");
  const int cells = m * m;
  const int k = 2 * m - 1;

  Vector<Scalar> rhs(2 * m);
  rhs << h, g;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    Matrix<Scalar> a = Matrix<Scalar>::Zero(2 * m, k);
    for (int col = 0; col < k; ++col) {
      const int c = pick[static_cast<std::size_t>(col)];
      a(c / m, col) = 1;
      a(m + c % m, col) = 1;
    }
    Eigen::FullPivLU<Matrix<Scalar>> lu(a);
    if (lu.rank() == k) {
      const Vector<Scalar> xs = lu.solve(rhs);
      if ((a * xs - rhs).cwiseAbs().maxCoeff() <= 1e-10 && xs.minCoeff() >= -1e-12) {
        Scalar cost = 0;
        for (int col = 0; col < k; ++col) {
          const int c = pick[static_cast<std::size_t>(col)];
          cost += d(c / m, c % m) * std::max<Scalar>(xs(col), 0);
        }
        best = std::min(best, cost);
      }
    }
    // Next combination in lexicographic order.
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == cells - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// Closed form for |j - k| costs: sum of absolute CDF differences.
template <typename Scalar>
Scalar oracle_emd_1d(const Vector<Scalar>& h, const Vector<Scalar>& g) {
  if (h.size() != g.size()) throw DimensionMismatch("histogram lengths differ");
  Scalar ch = 0, cg = 0, total = 0;
  for (Eigen::Index j = 0; j + 1 < h.size(); ++j) {
    ch += h(j);
    cg += g(j);
    total += std::abs(ch - cg);
  }
  return total;
}

}  // namespace sdemd
