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

// Random problem generators and optimality certificates shared by the tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "sdemd/emd.hpp"

namespace sdemd::testing {

// Random histogram; with `sparse` some bins are exactly zero.
inline Vector<double> random_histogram(Rng& rng, Eigen::Index m, bool sparse = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector<double> h(m);
  for (Eigen::Index i = 0; i < m; ++i) h(i) = u(rng) + 1e-3;
  if (sparse) {
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    h(pick(rng)) = 0;
  }
  if (h.sum() == 0) h(0) = 1;
  return h / h.sum();
}

// Nonnegative costs with a zero diagonal; symmetric when requested.
inline Matrix<double> random_costs(Rng& rng, Eigen::Index m, bool symmetric) {
  std::uniform_real_distribution<double> u(0.0, 5.0);
  Matrix<double> d(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k) d(j, k) = j == k ? 0.0 : u(rng);
  if (symmetric) d = ((d + d.transpose()) / 2).eval();
  return d;
}

struct Certificate {
  double marginal_error = 0;    // max |row/col sum - marginal|
  double min_flow = 0;          // most negative flow entry
  double duality_gap = 0;       // |value - beta . [h; g]|
  double primal_gap = 0;        // |value - sum f d|
  double dual_violation = 0;    // max(beta_j + beta_{m+k} - d_jk, 0)
  double slackness = 0;         // max |beta_j + beta_{m+k} - d_jk| over f_jk > 0
  double anchor = 0;            // |beta_0|
  std::size_t basis_size = 0;

  bool ok(std::size_t m, double tol = 1e-9) const {
    return marginal_error <= tol && min_flow >= -tol && duality_gap <= tol && primal_gap <= tol &&
           dual_violation <= tol && slackness <= tol && anchor == 0 && basis_size == 2 * m - 1;
  }
};

inline Certificate certify(const EmdSolution& s, const Vector<double>& h, const Vector<double>& g,
                           const Matrix<double>& d) {
  const Eigen::Index m = h.size();
  Certificate c;
  c.marginal_error = std::max((s.flow.rowwise().sum() - h).cwiseAbs().maxCoeff(),
                              (s.flow.colwise().sum().transpose() - g).cwiseAbs().maxCoeff());
  c.min_flow = s.flow.minCoeff();
  c.duality_gap = std::abs(s.value - (s.beta.head(m).dot(h) + s.beta.tail(m).dot(g)));
  c.primal_gap = std::abs(s.value - (s.flow.array() * d.array()).sum());
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k) {
      const double r = s.beta(j) + s.beta(m + k) - d(j, k);
      c.dual_violation = std::max(c.dual_violation, r);
      if (s.flow(j, k) > 1e-12) c.slackness = std::max(c.slackness, std::abs(r));
    }
  c.anchor = std::abs(s.beta(0));
  c.basis_size = s.basis.size();
  return c;
}

}  // namespace sdemd::testing
