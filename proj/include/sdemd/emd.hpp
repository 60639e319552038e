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

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdemd/bag.hpp"
#include "sdemd/quantizer.hpp"

namespace sdemd {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TransportOptions {
  // Supply perturbation keeping every basis nondegenerate.
  double perturbation = 1e-12;
  // Marginal and normalisation tolerance on the inputs.
  double tolerance = 1e-9;
};

// Optimal transport plan between two histograms together with the dual
// potentials of the final basis. beta(j) belongs to source bin j and
// beta(m + k) to sink bin k; beta(0) is pinned to zero.
template <typename Scalar>
struct BasicEmdSolution {
  Scalar value = 0;
  Matrix<Scalar> flow;
  Vector<Scalar> beta;
  std::vector<std::pair<int, int>> basis;
  int pivots = 0;
};

using EmdSolution = BasicEmdSolution<double>;

// Pairwise Euclidean distances between dictionary atoms.
template <typename Scalar>
Matrix<Scalar> ground_distance_from_dictionary(const BasicDictionary<Scalar>& dict) {
  validate_dictionary(dict);
  const Eigen::Index m = dict.size();
  Matrix<Scalar> d = Matrix<Scalar>::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = j + 1; k < m; ++k) {
      d(j, k) = (dict.atoms.col(j) - dict.atoms.col(k)).norm();
      d(k, j) = d(j, k);
    }
  return d;
}

// |j - k| costs on m bins.
template <typename Scalar = double>
Matrix<Scalar> line_ground_distance(Eigen::Index m) {
  Matrix<Scalar> d(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k) d(j, k) = static_cast<Scalar>(j > k ? j - k : k - j);
  return d;
}

template <typename Scalar>
void validate_histogram(const Vector<Scalar>& h, double tolerance, const char* name) {
  if (h.size() < 1) throw std::invalid_argument(std::string(name) + " histogram is empty");
  if (!h.allFinite()) throw std::invalid_argument(std::string(name) + " histogram is not finite");
  if ((h.array() < 0).any()) throw std::invalid_argument(std::string(name) + " histogram has negative bins");
  if (std::abs(static_cast<double>(h.sum()) - 1.0) > tolerance)
    throw std::invalid_argument(std::string(name) + " histogram does not sum to 1");
}

template <typename Scalar>
void validate_transport_inputs(const Vector<Scalar>& h, const Vector<Scalar>& g,
                               const Matrix<Scalar>& d, double tolerance) {
  if (h.size() != g.size()) throw DimensionMismatch("histogram lengths differ");
  if (d.rows() != h.size() || d.cols() != h.size())
    throw DimensionMismatch("ground distance must be m x m for m-bin histograms");
  validate_histogram(h, tolerance, "source");
  validate_histogram(g, tolerance, "sink");
  if (!d.allFinite()) throw std::invalid_argument("ground distance has non-finite entries");
  if ((d.array() < 0).any()) throw std::invalid_argument("ground distance has negative entries");
}

namespace detail {

// Spanning tree over m row nodes [0, m) and m column nodes [m, 2m) whose
// edges are the basic cells.
class BasisTree {
 public:
  explicit BasisTree(int m) : m_(m), adj_(static_cast<std::size_t>(2 * m)) {}

  void rebuild(const std::vector<int>& cells) {
    for (auto& a : adj_) a.clear();
    for (int c : cells) {
      const int r = c / m_, k = c % m_;
      adj_[static_cast<std::size_t>(r)].push_back({m_ + k, c});
      adj_[static_cast<std::size_t>(m_ + k)].push_back({r, c});
    }
  }

  // Potentials with u(0) = 0 solving u(r) + v(k) = cost(r, k) on the tree.
  template <typename Scalar>
  void potentials(const Matrix<Scalar>& cost, Vector<Scalar>& u, Vector<Scalar>& v) const {
    std::vector<char> seen(adj_.size(), 0);
    std::vector<Scalar> pot(adj_.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
      const int n = queue.front();
      queue.pop_front();
      for (const auto& [next, cell] : adj_[static_cast<std::size_t>(n)]) {
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = 1;
        pot[static_cast<std::size_t>(next)] =
            cost(cell / m_, cell % m_) - pot[static_cast<std::size_t>(n)];
        queue.push_back(next);
      }
    }
    u.resize(m_);
    v.resize(m_);
    for (int i = 0; i < m_; ++i) {
      u(i) = pot[static_cast<std::size_t>(i)];
      v(i) = pot[static_cast<std::size_t>(m_ + i)];
    }
  }

  // Cells of the tree path from column node `col` to row node `row`, in
  // order starting at the edge touching `col`.
  std::vector<int> path(int row, int col) const {
    const int target = m_ + col;
    std::vector<int> parent_node(adj_.size(), -1), parent_cell(adj_.size(), -1);
    std::deque<int> queue{row};
    parent_node[static_cast<std::size_t>(row)] = row;
    while (!queue.empty() && parent_node[static_cast<std::size_t>(target)] < 0) {
      const int n = queue.front();
      queue.pop_front();
      for (const auto& [next, cell] : adj_[static_cast<std::size_t>(n)]) {
        if (parent_node[static_cast<std::size_t>(next)] >= 0) continue;
        parent_node[static_cast<std::size_t>(next)] = n;
        parent_cell[static_cast<std::size_t>(next)] = cell;
        queue.push_back(next);
      }
    }
    std::vector<int> cells;
    for (int n = target; n != row; n = parent_node[static_cast<std::size_t>(n)])
      cells.push_back(parent_cell[static_cast<std::size_t>(n)]);
    return cells;
  }

  // Flows on the tree edges that meet the given row and column marginals.
  template <typename Scalar>
  Matrix<Scalar> flows(const Vector<Scalar>& supply, const Vector<Scalar>& demand) const {
    std::vector<Scalar> rem(adj_.size());
    for (int i = 0; i < m_; ++i) {
      rem[static_cast<std::size_t>(i)] = supply(i);
      rem[static_cast<std::size_t>(m_ + i)] = demand(i);
    }
    std::vector<int> degree(adj_.size());
    for (std::size_t n = 0; n < adj_.size(); ++n) degree[n] = static_cast<int>(adj_[n].size());
    std::vector<char> cell_done(static_cast<std::size_t>(m_ * m_), 0);
    Matrix<Scalar> f = Matrix<Scalar>::Zero(m_, m_);
    std::deque<int> leaves;
    for (std::size_t n = 0; n < adj_.size(); ++n)
      if (degree[n] == 1) leaves.push_back(static_cast<int>(n));
    while (!leaves.empty()) {
      const int n = leaves.front();
      leaves.pop_front();
      if (degree[static_cast<std::size_t>(n)] != 1) continue;
      for (const auto& [next, cell] : adj_[static_cast<std::size_t>(n)]) {
        if (cell_done[static_cast<std::size_t>(cell)]) continue;
        cell_done[static_cast<std::size_t>(cell)] = 1;
        const Scalar amount = std::max<Scalar>(rem[static_cast<std::size_t>(n)], 0);
        f(cell / m_, cell % m_) = amount;
        rem[static_cast<std::size_t>(n)] = 0;
        rem[static_cast<std::size_t>(next)] -= amount;
        degree[static_cast<std::size_t>(n)] = 0;
        if (--degree[static_cast<std::size_t>(next)] == 1) leaves.push_back(next);
        break;
      }
    }
    return f;
  }

 private:
  int m_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
};

}  // namespace detail

// Transportation simplex: northwest-corner start on perturbed supplies, MODI
// potentials for pricing, Dantzig entering rule. The optimal basis is
// re-solved against the unperturbed marginals for the reported flow.
template <typename Scalar>
BasicEmdSolution<Scalar> solve_transport(const Vector<Scalar>& h, const Vector<Scalar>& g,
                                         const Matrix<Scalar>& d,
                                         const TransportOptions& opts = {}) {
  validate_transport_inputs(h, g, d, opts.tolerance);
  const int m = static_cast<int>(h.size());
  const auto cell_of = [m](int r, int k) { return r * m + k; };

  // Charnes perturbation: eps on every supply, m * eps on the last demand.
  const Scalar eps = static_cast<Scalar>(opts.perturbation);
  Vector<Scalar> supply = h.array() + eps;
  Vector<Scalar> demand = g;
  demand(m - 1) += static_cast<Scalar>(m) * eps;

  std::vector<int> basis;
  basis.reserve(static_cast<std::size_t>(2 * m - 1));
  std::vector<Scalar> x(static_cast<std::size_t>(m * m), 0);
  std::vector<char> is_basic(static_cast<std::size_t>(m * m), 0);
  {
    Vector<Scalar> s = supply, t = demand;
    int r = 0, k = 0;
    while (true) {
      const Scalar q = std::min(s(r), t(k));
      const int c = cell_of(r, k);
      basis.push_back(c);
      is_basic[static_cast<std::size_t>(c)] = 1;
      x[static_cast<std::size_t>(c)] = std::max<Scalar>(q, 0);
      s(r) -= q;
      t(k) -= q;
      if (r == m - 1 && k == m - 1) break;
      if (k == m - 1 || (r < m - 1 && s(r) <= t(k))) {
        ++r;
      } else {
        ++k;
      }
    }
  }

  detail::BasisTree tree(m);
  Vector<Scalar> u, v;
  const Scalar scale = std::max<Scalar>(1, d.cwiseAbs().maxCoeff());
  const Scalar price_tol = static_cast<Scalar>(1e-12) * scale;
  const int cap = 10 * m * m;
  int pivots = 0;
  while (true) {
    tree.rebuild(basis);
    tree.potentials(d, u, v);

    int entering = -1;
    Scalar best = -price_tol;
    for (int r = 0; r < m; ++r)
      for (int k = 0; k < m; ++k) {
        const int c = cell_of(r, k);
        if (is_basic[static_cast<std::size_t>(c)]) continue;
        const Scalar reduced = d(r, k) - u(r) - v(k);
        if (reduced < best) {
          best = reduced;
          entering = c;
        }
      }
    if (entering < 0) break;
    if (pivots >= cap)
      throw ConvergenceError("transportation simplex exceeded " + std::to_string(cap) + " pivots");
    ++pivots;

    const std::vector<int> path = tree.path(entering / m, entering % m);
    // Path cells alternate -, +, -, ... starting at the entering column.
    int leaving = -1;
    Scalar theta = std::numeric_limits<Scalar>::infinity();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Scalar xf = x[static_cast<std::size_t>(path[p])];
      if (xf < theta) {
        theta = xf;
        leaving = path[p];
      }
    }
    if (leaving < 0) throw ConvergenceError("entering cell closes no cycle in the basis tree");
    x[static_cast<std::size_t>(entering)] = theta;
    for (std::size_t p = 0; p < path.size(); ++p) {
      Scalar& xf = x[static_cast<std::size_t>(path[p])];
      xf = (p % 2 == 0) ? std::max<Scalar>(xf - theta, 0) : xf + theta;
    }
    x[static_cast<std::size_t>(leaving)] = 0;
    is_basic[static_cast<std::size_t>(leaving)] = 0;
    is_basic[static_cast<std::size_t>(entering)] = 1;
    for (int& c : basis)
      if (c == leaving) c = entering;
  }

  BasicEmdSolution<Scalar> sol;
  sol.flow = tree.flows(h, g);
  sol.value = (sol.flow.array() * d.array()).sum();
  sol.beta.resize(2 * m);
  sol.beta.head(m) = u;
  sol.beta.tail(m) = v;
  std::sort(basis.begin(), basis.end());
  for (int c : basis) sol.basis.emplace_back(c / m, c % m);
  sol.pivots = pivots;
  return sol;
}

template <typename Scalar>
Scalar emd_value(const Vector<Scalar>& h, const Vector<Scalar>& g, const Matrix<Scalar>& d,
                 const TransportOptions& opts = {}) {
  return solve_transport(h, g, d, opts).value;
}

}  // namespace sdemd
