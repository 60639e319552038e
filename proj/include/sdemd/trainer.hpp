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
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdemd/bag.hpp"
#include "sdemd/emd.hpp"
#include "sdemd/quantizer.hpp"

namespace sdemd {

struct TrainerConfig {
  int m = 8;
  // Kernel bandwidth; the median heuristic is used when unset.
  std::optional<double> sigma;
  double tau = 0.1;
  double c_tradeoff = 1.0;
  double eta = 0.01;
  // Step size at iteration t (1-based) is eta / sqrt(t) when set.
  bool eta_decay = true;
  // Number of sampled triplets; 50 per bag when unset.
  std::optional<std::size_t> iterations;
  std::uint64_t seed = 1;
  std::size_t kmeans_sample = 10000;
  int kmeans_max_iter = 300;
};

inline void validate_config(const TrainerConfig& cfg) {
  if (cfg.m < 1) throw std::invalid_argument("atom count m must be >= 1");
  if (cfg.sigma && !(*cfg.sigma > 0)) throw std::invalid_argument("sigma must be > 0");
  if (!(cfg.tau >= 0)) throw std::invalid_argument("tau must be >= 0");
  if (!(cfg.c_tradeoff >= 0)) throw std::invalid_argument("C must be >= 0");
  if (!(cfg.eta >= 0)) throw std::invalid_argument("eta must be >= 0");
  if (cfg.iterations && *cfg.iterations == 0) throw std::invalid_argument("iterations must be >= 1");
  if (cfg.kmeans_sample < 1) throw std::invalid_argument("kmeans sample cap must be >= 1");
}

template <typename Scalar>
std::size_t resolved_iterations(const TrainerConfig& cfg, const BasicLabeledDataset<Scalar>& data) {
  return cfg.iterations ? *cfg.iterations : 50 * data.size();
}

// Lloyd's algorithm with k-means++ seeding on a seeded sample of at most
// `sample_cap` pooled instances. With fewer distinct instances than m, the
// distinct instances are reused with a small deterministic jitter.
template <typename Scalar>
BasicDictionary<Scalar> init_dictionary_kmeans(const BasicLabeledDataset<Scalar>& data, int m,
                                               std::uint64_t seed, std::size_t sample_cap,
                                               int max_iter = 300) {
  if (m < 1) throw std::invalid_argument("atom count m must be >= 1");
  validate_dataset(data);
  const Eigen::Index dim = data.dim();
  std::vector<std::pair<std::size_t, Eigen::Index>> pool;
  for (std::size_t b = 0; b < data.bags.size(); ++b)
    for (Eigen::Index i = 0; i < data.bags[b].size(); ++i) pool.emplace_back(b, i);
  if (pool.size() < static_cast<std::size_t>(m))
    throw std::invalid_argument("fewer instances than dictionary atoms");
  Rng rng(seed);
  if (pool.size() > sample_cap) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(sample_cap);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pool.size());
  Matrix<Scalar> points(dim, n);
  for (Eigen::Index i = 0; i < n; ++i)
    points.col(i) = data.bags[pool[static_cast<std::size_t>(i)].first].instances.col(
        pool[static_cast<std::size_t>(i)].second);

  BasicDictionary<Scalar> dict;
  dict.atoms.resize(dim, m);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // k-means++ seeding.
  Vector<Scalar> nearest(n);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  dict.atoms.col(0) = points.col(first(rng));
  for (Eigen::Index i = 0; i < n; ++i) nearest(i) = (points.col(i) - dict.atoms.col(0)).squaredNorm();
  int seeded = 1;
  for (; seeded < m; ++seeded) {
    const Scalar total = nearest.sum();
    if (!(total > 0)) break;
    const Scalar target = static_cast<Scalar>(unif(rng)) * total;
    Scalar acc = 0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (nearest(i) <= 0) continue;
      acc += nearest(i);
      pick = i;
      if (acc > target) break;
    }
    dict.atoms.col(seeded) = points.col(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      nearest(i) = std::min(nearest(i), (points.col(i) - dict.atoms.col(seeded)).squaredNorm());
  }
  if (seeded < m) {
    std::cerr << "warning: only " << seeded << " distinct instances for " << m
              << " atoms; filling with jittered duplicates\n";
    const Scalar scale = std::max<Scalar>(1, points.cwiseAbs().maxCoeff());
    std::normal_distribution<double> jitter(0.0, 1e-6);
    for (int j = seeded; j < m; ++j) {
      dict.atoms.col(j) = dict.atoms.col(j % seeded);
      for (Eigen::Index r = 0; r < dim; ++r) dict.atoms(r, j) += static_cast<Scalar>(jitter(rng)) * scale;
    }
    return dict;
  }

  // Lloyd iterations until assignments stop changing.
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_d = std::numeric_limits<Scalar>::infinity();
      for (int j = 0; j < m; ++j) {
        const Scalar dj = (points.col(i) - dict.atoms.col(j)).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix<Scalar> sums = Matrix<Scalar>::Zero(dim, m);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += points.col(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    // Empty clusters keep their previous centroid.
    for (int j = 0; j < m; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0)
        dict.atoms.col(j) = sums.col(j) / static_cast<Scalar>(counts[static_cast<std::size_t>(j)]);
  }
  return dict;
}

// Everything one stochastic step needs from a triplet, computed against a
// fixed dictionary.
template <typename Scalar>
struct BasicTripletEvaluation {
  Vector<Scalar> h, g, u;
  Scalar pi_plus = 0, pi_minus = 0;
  Scalar z_pos = 0;  // EMD(h, g)
  Scalar gamma = 0;  // EMD(h, u)
  Vector<Scalar> beta_pos, beta_neg;
  Matrix<Scalar> ground;
  int xi = 0;
  Scalar loss = 0;
};

using TripletEvaluation = BasicTripletEvaluation<double>;

template <typename Scalar>
Scalar hinge_loss(Scalar z_pos, Scalar gamma, Scalar tau) {
  return std::max<Scalar>(0, z_pos + tau - gamma);
}

template <typename Scalar>
BasicTripletEvaluation<Scalar> evaluate_triplet(const BasicTriplet<Scalar>& t,
                                                const BasicDictionary<Scalar>& dict,
                                                Scalar sigma, Scalar tau) {
  validate_dictionary(dict, t.base->dim());
  BasicTripletEvaluation<Scalar> ev;
  ev.h = quantize(*t.base, dict, sigma);
  auto qp = quantize_with_normalizer(*t.positive, dict, sigma);
  auto qn = quantize_with_normalizer(*t.negative, dict, sigma);
  ev.g = std::move(qp.histogram);
  ev.u = std::move(qn.histogram);
  ev.pi_plus = qp.normalizer;
  ev.pi_minus = qn.normalizer;
  ev.ground = ground_distance_from_dictionary(dict);
  auto pos = solve_transport(ev.h, ev.g, ev.ground);
  auto neg = solve_transport(ev.h, ev.u, ev.ground);
  ev.z_pos = pos.value;
  ev.gamma = neg.value;
  ev.beta_pos = std::move(pos.beta);
  ev.beta_neg = std::move(neg.beta);
  ev.loss = hinge_loss(ev.z_pos, ev.gamma, tau);
  ev.xi = ev.loss > 0 ? 1 : 0;
  return ev;
}

template <typename Scalar>
BasicTripletEvaluation<Scalar> evaluate_triplet(const BasicTriplet<Scalar>& t,
                                                const BasicDictionary<Scalar>& dict, Scalar sigma,
                                                const TrainerConfig& cfg) {
  return evaluate_triplet(t, dict, sigma, static_cast<Scalar>(cfg.tau));
}

namespace detail {

// sum_i k(x_i, z) (x_i - z) / sigma^2 over the instances of a bag.
template <typename Scalar, typename DerivedZ>
Vector<Scalar> kernel_pull(const BasicBag<Scalar>& bag, const Eigen::MatrixBase<DerivedZ>& z,
                           Scalar sigma) {
  Vector<Scalar> acc = Vector<Scalar>::Zero(z.size());
  for (Eigen::Index i = 0; i < bag.size(); ++i)
    acc += kernel_sim(bag.instances.col(i), z, sigma) * (bag.instances.col(i) - z);
  return acc / (sigma * sigma);
}

}  // namespace detail

// Sub-gradient of the per-triplet objective with respect to atom k, with the
// normalisers, dual potentials and xi of `ev` held fixed. Positive-bag terms
// are weighted by the sink potentials of EMD(h, g), negative-bag terms by
// those of EMD(h, u).
template <typename Scalar>
Vector<Scalar> subgradient(Eigen::Index k, const BasicTripletEvaluation<Scalar>& ev,
                           const BasicTriplet<Scalar>& t, const BasicDictionary<Scalar>& dict,
                           Scalar sigma, Scalar c_tradeoff) {
  const Eigen::Index m = dict.size();
  if (k < 0 || k >= m) throw std::out_of_range("atom index out of range");
  Vector<Scalar> grad = dict.atoms.col(k);
  if (ev.xi == 0 || c_tradeoff == 0) return grad;
  const auto z = dict.atoms.col(k);
  grad += c_tradeoff * (ev.beta_pos(m + k) / ev.pi_plus * detail::kernel_pull(*t.positive, z, sigma) -
                        ev.beta_neg(m + k) / ev.pi_minus * detail::kernel_pull(*t.negative, z, sigma));
  return grad;
}

template <typename Scalar>
Vector<Scalar> subgradient(Eigen::Index k, const BasicTripletEvaluation<Scalar>& ev,
                           const BasicTriplet<Scalar>& t, const BasicDictionary<Scalar>& dict,
                           Scalar sigma, const TrainerConfig& cfg) {
  return subgradient(k, ev, t, dict, sigma, static_cast<Scalar>(cfg.c_tradeoff));
}

// Per-triplet objective as a function of the dictionary with pi, beta and xi
// taken from `ev`:
//   1/2 sum_j |z_j|^2 + C xi (sum_k beta+_{m+k} g_k(z) - beta-_{m+k} u_k(z) + tau)
template <typename Scalar>
Scalar frozen_objective(const BasicDictionary<Scalar>& dict, const BasicTripletEvaluation<Scalar>& ev,
                        const BasicTriplet<Scalar>& t, Scalar sigma, Scalar c_tradeoff, Scalar tau) {
  const Eigen::Index m = dict.size();
  Scalar obj = dict.atoms.squaredNorm() / 2;
  if (ev.xi == 0) return obj;
  Scalar lin = tau;
  for (Eigen::Index k = 0; k < m; ++k) {
    lin += ev.beta_pos(m + k) * raw_similarity(*t.positive, dict.atoms.col(k), sigma) / ev.pi_plus;
    lin -= ev.beta_neg(m + k) * raw_similarity(*t.negative, dict.atoms.col(k), sigma) / ev.pi_minus;
  }
  return obj + c_tradeoff * lin;
}

// One simultaneous update of every atom from gradients taken at the pre-step
// dictionary.
template <typename Scalar>
std::pair<BasicDictionary<Scalar>, BasicTripletEvaluation<Scalar>> sgd_step(
    const BasicDictionary<Scalar>& dict, const BasicTriplet<Scalar>& t, Scalar sigma,
    Scalar c_tradeoff, Scalar tau, Scalar eta) {
  auto ev = evaluate_triplet(t, dict, sigma, tau);
  BasicDictionary<Scalar> next = dict;
  for (Eigen::Index k = 0; k < dict.size(); ++k)
    next.atoms.col(k) -= eta * subgradient(k, ev, t, dict, sigma, c_tradeoff);
  return {std::move(next), std::move(ev)};
}

template <typename Scalar>
std::pair<BasicDictionary<Scalar>, BasicTripletEvaluation<Scalar>> sgd_step(
    const BasicDictionary<Scalar>& dict, const BasicTriplet<Scalar>& t, Scalar sigma,
    const TrainerConfig& cfg) {
  return sgd_step(dict, t, sigma, static_cast<Scalar>(cfg.c_tradeoff), static_cast<Scalar>(cfg.tau),
                  static_cast<Scalar>(cfg.eta));
}

struct TrainRecord {
  std::size_t iteration = 0;
  double loss = 0;
  int xi = 0;
  double z_pos = 0;
  double gamma = 0;
  double mean_atom_norm = 0;
};

struct TrainReport {
  std::vector<TrainRecord> records;
};

template <typename Scalar>
struct BasicTrainResult {
  BasicDictionary<Scalar> initial;
  BasicDictionary<Scalar> dictionary;
  Scalar sigma = 0;
  TrainReport report;
};

using TrainResult = BasicTrainResult<double>;

// Called after every update with the 1-based iteration and the new dictionary.
template <typename Scalar>
using TrainObserver = std::function<void(std::size_t, const BasicDictionary<Scalar>&)>;

template <typename Scalar>
Scalar resolved_sigma(const TrainerConfig& cfg, const BasicLabeledDataset<Scalar>& data) {
  return cfg.sigma ? static_cast<Scalar>(*cfg.sigma) : median_heuristic_sigma(data, cfg.seed);
}

// Stochastic triplet training from a k-means start. Triplets are drawn
// uniformly with replacement; the regulariser shrinks atoms every iteration
// and the hinge term contributes only on violated triplets.
template <typename Scalar>
BasicTrainResult<Scalar> train(const BasicLabeledDataset<Scalar>& data, const TrainerConfig& cfg,
                               const TrainObserver<Scalar>& observer = {}) {
  validate_config(cfg);
  validate_dataset(data);
  BasicTripletSampler<Scalar> sampler(data);

  BasicTrainResult<Scalar> out;
  out.sigma = resolved_sigma(cfg, data);
  out.initial = init_dictionary_kmeans(data, cfg.m, cfg.seed, cfg.kmeans_sample, cfg.kmeans_max_iter);
  BasicDictionary<Scalar> dict = out.initial;

  const std::size_t iterations = resolved_iterations(cfg, data);
  // Sampling stream is separate from the k-means stream.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  out.report.records.reserve(iterations);
  for (std::size_t t = 1; t <= iterations; ++t) {
    const auto triplet = sampler(rng);
    const Scalar eta = static_cast<Scalar>(cfg.eta_decay ? cfg.eta / std::sqrt(static_cast<double>(t)) : cfg.eta);
    auto [next, ev] = sgd_step(dict, triplet, out.sigma, static_cast<Scalar>(cfg.c_tradeoff),
                               static_cast<Scalar>(cfg.tau), eta);
    if (!next.atoms.allFinite())
      throw std::runtime_error("non-finite atom after iteration " + std::to_string(t) +
                               " (loss " + std::to_string(static_cast<double>(ev.loss)) +
                               ", eta " + std::to_string(static_cast<double>(eta)) + ")");
    dict = std::move(next);
    TrainRecord rec;
    rec.iteration = t;
    rec.loss = static_cast<double>(ev.loss);
    rec.xi = ev.xi;
    rec.z_pos = static_cast<double>(ev.z_pos);
    rec.gamma = static_cast<double>(ev.gamma);
    rec.mean_atom_norm = static_cast<double>(dict.atoms.colwise().norm().mean());
    out.report.records.push_back(rec);
    if (observer) observer(t, dict);
  }
  out.dictionary = std::move(dict);
  return out;
}

// Triplets whose base comes from the query half of a split and whose positive
// and negative come from the database half. Bases without a same-class
// database bag are skipped.
template <typename Scalar>
std::vector<BasicTriplet<Scalar>> heldout_triplets(const BasicSplit<Scalar>& split, std::size_t count,
                                                   std::uint64_t seed) {
  const auto& db = split.database.bags;
  std::vector<std::size_t> bases;
  for (std::size_t q = 0; q < split.query.bags.size(); ++q) {
    bool pos = false, neg = false;
    for (const auto& b : db) (b.label == split.query.bags[q].label ? pos : neg) = true;
    if (pos && neg) bases.push_back(q);
  }
  if (bases.empty()) throw std::invalid_argument("no query bag admits a held-out triplet");
  Rng rng(seed);
  std::vector<BasicTriplet<Scalar>> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    std::uniform_int_distribution<std::size_t> pick_base(0, bases.size() - 1);
    const auto& base = split.query.bags[bases[pick_base(rng)]];
    std::vector<std::size_t> same, other;
    for (std::size_t i = 0; i < db.size(); ++i) (db[i].label == base.label ? same : other).push_back(i);
    std::uniform_int_distribution<std::size_t> ps(0, same.size() - 1), po(0, other.size() - 1);
    const std::size_t p = same[ps(rng)];
    const std::size_t n = other[po(rng)];
    out.push_back({&base, &db[p], &db[n]});
  }
  return out;
}

template <typename Scalar>
Scalar mean_hinge_loss(const std::vector<BasicTriplet<Scalar>>& triplets,
                       const BasicDictionary<Scalar>& dict, Scalar sigma, Scalar tau) {
  if (triplets.empty()) throw std::invalid_argument("no triplets");
  const Matrix<Scalar> ground = ground_distance_from_dictionary(dict);
  Scalar total = 0;
  for (const auto& t : triplets) {
    const Vector<Scalar> h = quantize(*t.base, dict, sigma);
    const Scalar z = emd_value(h, quantize(*t.positive, dict, sigma), ground);
    const Scalar gamma = emd_value(h, quantize(*t.negative, dict, sigma), ground);
    total += hinge_loss(z, gamma, tau);
  }
  return total / static_cast<Scalar>(triplets.size());
}

struct GridPoint {
  double eta = 0;
  double c_tradeoff = 0;
  double heldout_loss = 0;
};

// Trains on the database half of fold 0 for every (eta, C) pair and scores
// each on held-out triplets. Points come back in input order; the best one
// has the smallest held-out loss.
template <typename Scalar>
std::vector<GridPoint> grid_search(const BasicLabeledDataset<Scalar>& data, const TrainerConfig& base,
                                   const std::vector<double>& etas, const std::vector<double>& cs,
                                   std::size_t heldout_count = 200) {
  const auto split = tenfold_split(data, 0, base.seed);
  const auto triplets = heldout_triplets(split, heldout_count, base.seed + 1);
  std::vector<GridPoint> out;
  for (double eta : etas)
    for (double c : cs) {
      TrainerConfig cfg = base;
      cfg.eta = eta;
      cfg.c_tradeoff = c;
      const auto res = train(split.database, cfg);
      out.push_back({eta, c,
                     static_cast<double>(mean_hinge_loss(triplets, res.dictionary, res.sigma,
                                                         static_cast<Scalar>(cfg.tau)))});
    }
  return out;
}

}  // namespace sdemd
