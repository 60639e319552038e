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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sdemd/bag.hpp"

namespace sdemd {

// Ordered list of m atoms stored column-wise (dim x m).
template <typename Scalar>
struct BasicDictionary {
  Matrix<Scalar> atoms;

  Eigen::Index dim() const { return atoms.rows(); }
  Eigen::Index size() const { return atoms.cols(); }
};

using Dictionary = BasicDictionary<double>;

template <typename Scalar>
void validate_dictionary(const BasicDictionary<Scalar>& dict, Eigen::Index expected_dim = -1) {
  if (dict.size() < 1) throw std::invalid_argument("dictionary has no atoms");
  if (dict.dim() < 1) throw std::invalid_argument("dictionary atoms have zero dimension");
  if (!dict.atoms.allFinite()) throw std::invalid_argument("dictionary has non-finite atoms");
  if (expected_dim >= 0 && dict.dim() != expected_dim)
    throw DimensionMismatch("dictionary dimension " + std::to_string(dict.dim()) +
                            " does not match data dimension " + std::to_string(expected_dim));
}

// Smallest kernel value handed out; keeps histograms strictly positive.
template <typename Scalar>
constexpr Scalar kernel_floor() {
  return std::max<Scalar>(static_cast<Scalar>(1e-300), std::numeric_limits<Scalar>::min());
}

namespace detail {

template <typename Scalar>
void check_sigma(Scalar sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma))
    throw std::invalid_argument("kernel bandwidth must be finite and > 0");
}

// Sum in ascending order so the result does not depend on input order.
template <typename Scalar>
Scalar ordered_sum(std::vector<Scalar>& terms) {
  std::sort(terms.begin(), terms.end());
  Scalar s = 0;
  for (Scalar t : terms) s += t;
  return s;
}

}  // namespace detail

template <typename DerivedX, typename DerivedZ>
typename DerivedX::Scalar kernel_sim(const Eigen::MatrixBase<DerivedX>& x,
                                     const Eigen::MatrixBase<DerivedZ>& z,
                                     typename DerivedX::Scalar sigma) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_sigma(sigma);
  if (x.size() != z.size())
    throw DimensionMismatch("instance and atom dimensions differ");
  const Scalar k = std::exp(-(x - z).squaredNorm() / (2 * sigma * sigma));
  return k < std::numeric_limits<Scalar>::min() ? kernel_floor<Scalar>() : k;
}

// Sum of kernel similarities between every instance of the bag and z.
template <typename Scalar, typename DerivedZ>
Scalar raw_similarity(const BasicBag<Scalar>& bag, const Eigen::MatrixBase<DerivedZ>& z,
                      Scalar sigma) {
  if (bag.size() < 1) throw std::invalid_argument("bag has no instances");
  std::vector<Scalar> terms(static_cast<std::size_t>(bag.size()));
  for (Eigen::Index i = 0; i < bag.size(); ++i)
    terms[static_cast<std::size_t>(i)] = kernel_sim(bag.instances.col(i), z, sigma);
  return detail::ordered_sum(terms);
}

// Raw similarity of the bag against every atom.
template <typename Scalar>
Vector<Scalar> raw_similarities(const BasicBag<Scalar>& bag, const BasicDictionary<Scalar>& dict,
                                Scalar sigma) {
  if (dict.dim() != bag.dim())
    throw DimensionMismatch("dictionary dimension does not match bag dimension");
  Vector<Scalar> s(dict.size());
  for (Eigen::Index j = 0; j < dict.size(); ++j) s(j) = raw_similarity(bag, dict.atoms.col(j), sigma);
  return s;
}

template <typename Scalar>
Scalar normalizer_of(const Vector<Scalar>& raw) {
  std::vector<Scalar> terms(raw.data(), raw.data() + raw.size());
  return detail::ordered_sum(terms);
}

// Total similarity mass of the bag over all atoms (the histogram normaliser).
template <typename Scalar>
Scalar normalizer(const BasicBag<Scalar>& bag, const BasicDictionary<Scalar>& dict, Scalar sigma) {
  const Vector<Scalar> raw = raw_similarities(bag, dict, sigma);
  return normalizer_of(raw);
}

template <typename Scalar>
struct BasicQuantization {
  Vector<Scalar> histogram;
  Scalar normalizer = 0;
};

template <typename Scalar>
BasicQuantization<Scalar> quantize_with_normalizer(const BasicBag<Scalar>& bag,
                                                   const BasicDictionary<Scalar>& dict,
                                                   Scalar sigma) {
  const Vector<Scalar> raw = raw_similarities(bag, dict, sigma);
  const Scalar pi = normalizer_of(raw);
  return {raw / pi, pi};
}

// Normalised kernel-similarity histogram of the bag against the dictionary.
template <typename Scalar>
Vector<Scalar> quantize(const BasicBag<Scalar>& bag, const BasicDictionary<Scalar>& dict,
                        Scalar sigma) {
  return quantize_with_normalizer(bag, dict, sigma).histogram;
}

// Median pairwise Euclidean distance over a seeded sample of at most
// `sample_cap` pooled instances.
template <typename Scalar>
Scalar median_heuristic_sigma(const BasicLabeledDataset<Scalar>& data, std::uint64_t seed,
                              std::size_t sample_cap = 1000) {
  std::vector<std::pair<std::size_t, Eigen::Index>> pool;
  for (std::size_t b = 0; b < data.bags.size(); ++b)
    for (Eigen::Index i = 0; i < data.bags[b].size(); ++i) pool.emplace_back(b, i);
  if (pool.size() < 2) throw std::invalid_argument("median heuristic needs at least 2 instances");
  if (pool.size() > sample_cap) {
    Rng rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(sample_cap);
  }
  std::vector<Scalar> dists;
  dists.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t a = 0; a < pool.size(); ++a) {
    const auto xa = data.bags[pool[a].first].instances.col(pool[a].second);
    for (std::size_t b = a + 1; b < pool.size(); ++b)
      dists.push_back((xa - data.bags[pool[b].first].instances.col(pool[b].second)).norm());
  }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  const Scalar sigma = *mid;
  if (!(sigma > 0)) throw std::invalid_argument("median pairwise distance is zero; pass sigma explicitly");
  return sigma;
}

}  // namespace sdemd
