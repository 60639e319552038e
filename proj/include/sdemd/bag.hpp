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
#include <cstdio>
#include <iterator>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdemd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Rng = std::mt19937_64;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A labeled bag of instances. Instances are stored column-wise: column i is
// the feature vector of instance i, so instances.rows() is the feature
// dimension and instances.cols() the instance count.
template <typename Scalar>
struct BasicBag {
  std::string id;
  std::string label;
  Matrix<Scalar> instances;

  Eigen::Index dim() const { return instances.rows(); }
  Eigen::Index size() const { return instances.cols(); }

  friend bool operator==(const BasicBag& a, const BasicBag& b) {
    return a.id == b.id && a.label == b.label &&
           a.instances.rows() == b.instances.rows() &&
           a.instances.cols() == b.instances.cols() &&
           a.instances == b.instances;
  }
};

using Bag = BasicBag<double>;

template <typename Scalar>
void validate_bag(const BasicBag<Scalar>& bag) {
  if (bag.size() < 1)
    throw std::invalid_argument("bag '" + bag.id + "' has no instances");
  if (bag.dim() < 1)
    throw std::invalid_argument("bag '" + bag.id + "' has zero feature dimension");
  if (!bag.instances.allFinite())
    throw std::invalid_argument("bag '" + bag.id + "' has non-finite features");
}

template <typename Scalar>
struct BasicLabeledDataset {
  std::vector<BasicBag<Scalar>> bags;
  std::set<std::string> class_set;

  BasicLabeledDataset() = default;
  explicit BasicLabeledDataset(std::vector<BasicBag<Scalar>> b) : bags(std::move(b)) {
    for (const auto& bag : bags) class_set.insert(bag.label);
  }

  std::size_t size() const { return bags.size(); }
  bool empty() const { return bags.empty(); }
  // Feature dimension, or 0 for an empty dataset.
  Eigen::Index dim() const { return bags.empty() ? 0 : bags.front().dim(); }

  std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& bag : bags) n += static_cast<std::size_t>(bag.size());
    return n;
  }

  friend bool operator==(const BasicLabeledDataset& a, const BasicLabeledDataset& b) {
    return a.bags == b.bags && a.class_set == b.class_set;
  }
};

using LabeledDataset = BasicLabeledDataset<double>;

template <typename Scalar>
void validate_dataset(const BasicLabeledDataset<Scalar>& data) {
  for (const auto& bag : data.bags) {
    validate_bag(bag);
    if (bag.dim() != data.dim())
      throw DimensionMismatch("bag '" + bag.id + "' has dimension " +
                              std::to_string(bag.dim()) + ", expected " +
                              std::to_string(data.dim()));
    if (!data.class_set.count(bag.label))
      throw std::invalid_argument("bag '" + bag.id + "' label not in class set");
  }
}

// Non-owning view of three bags of one dataset. The dataset must outlive it.
template <typename Scalar>
struct BasicTriplet {
  const BasicBag<Scalar>* base = nullptr;
  const BasicBag<Scalar>* positive = nullptr;
  const BasicBag<Scalar>* negative = nullptr;
};

using Triplet = BasicTriplet<double>;

struct SyntheticConfig {
  int n_classes = 3;
  int bags_per_class = 20;
  int min_instances = 10;
  int max_instances = 20;
  int dim = 5;
  double class_separation = 4.0;
  std::uint64_t seed = 7;
  int components_per_class = 2;
  double component_spread = 1.0;
  double instance_noise = 1.0;
};

// Each class owns a mixture of isotropic Gaussians. Class centres are placed
// pairwise class_separation apart (axis-aligned when dim >= n_classes,
// otherwise random directions of length class_separation / sqrt(2)) and the
// set of centres is shifted to have zero mean. Bags are shuffled and given
// sequential ids after shuffling, so ids carry no label information.
template <typename Scalar = double>
BasicLabeledDataset<Scalar> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_classes < 2) throw std::invalid_argument("synthetic data needs at least 2 classes");
  if (cfg.bags_per_class < 1) throw std::invalid_argument("bags_per_class must be >= 1");
  if (cfg.min_instances < 1 || cfg.max_instances < cfg.min_instances)
    throw std::invalid_argument("invalid instance range");
  if (cfg.dim < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(cfg.class_separation >= 0) || !std::isfinite(cfg.class_separation))
    throw std::invalid_argument("class_separation must be finite and >= 0");
  if (cfg.components_per_class < 1) throw std::invalid_argument("components_per_class must be >= 1");

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index dim = cfg.dim;
  const double leg = cfg.class_separation / std::sqrt(2.0);

  Matrix<double> centres = Matrix<double>::Zero(dim, cfg.n_classes);
  for (int c = 0; c < cfg.n_classes; ++c) {
    if (dim >= cfg.n_classes) {
      centres(c, c) = leg;
    } else {
      Vector<double> dir(dim);
      for (Eigen::Index r = 0; r < dim; ++r) dir(r) = normal(rng);
      centres.col(c) = leg * dir.normalized();
    }
  }
  centres.colwise() -= centres.rowwise().mean();

  std::vector<BasicBag<Scalar>> bags;
  std::uniform_int_distribution<int> count(cfg.min_instances, cfg.max_instances);
  std::uniform_int_distribution<int> pick(0, cfg.components_per_class - 1);
  for (int c = 0; c < cfg.n_classes; ++c) {
    Matrix<double> comps(dim, cfg.components_per_class);
    for (Eigen::Index k = 0; k < comps.cols(); ++k)
      for (Eigen::Index r = 0; r < dim; ++r)
        comps(r, k) = centres(r, c) + cfg.component_spread * normal(rng);
    for (int b = 0; b < cfg.bags_per_class; ++b) {
      BasicBag<Scalar> bag;
      bag.label = "class-" + std::to_string(c);
      bag.instances.resize(dim, count(rng));
      for (Eigen::Index i = 0; i < bag.instances.cols(); ++i) {
        const int k = pick(rng);
        for (Eigen::Index r = 0; r < dim; ++r)
          bag.instances(r, i) = static_cast<Scalar>(comps(r, k) + cfg.instance_noise * normal(rng));
      }
      bags.push_back(std::move(bag));
    }
  }
  std::shuffle(bags.begin(), bags.end(), rng);
  for (std::size_t i = 0; i < bags.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "bag-%05zu", i);
    bags[i].id = buf;
  }
  return BasicLabeledDataset<Scalar>(std::move(bags));
}

template <typename Scalar>
struct BasicSplit {
  BasicLabeledDataset<Scalar> query;
  BasicLabeledDataset<Scalar> database;
};

// Seeded partition into ten near-equal folds; fold `fold_index` is the query
// set and the other nine are the database. Both halves keep the full
// class_set of the input so labels stay comparable.
template <typename Scalar>
BasicSplit<Scalar> tenfold_split(const BasicLabeledDataset<Scalar>& data, int fold_index,
                                 std::uint64_t seed) {
  constexpr int kFolds = 10;
  if (fold_index < 0 || fold_index >= kFolds)
    throw std::out_of_range("fold index must be in [0, 9]");
  if (data.size() < kFolds) throw std::invalid_argument("ten-fold split needs at least 10 bags");

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = data.size();
  const std::size_t lo = n * static_cast<std::size_t>(fold_index) / kFolds;
  const std::size_t hi = n * static_cast<std::size_t>(fold_index + 1) / kFolds;
  BasicSplit<Scalar> split;
  split.query.class_set = data.class_set;
  split.database.class_set = data.class_set;
  for (std::size_t p = 0; p < n; ++p) {
    auto& dst = (p >= lo && p < hi) ? split.query : split.database;
    dst.bags.push_back(data.bags[order[p]]);
  }
  return split;
}

// Uniform triplet sampling with per-class index tables built once.
template <typename Scalar>
class BasicTripletSampler {
 public:
  static constexpr int kMaxRetries = 1000;

  explicit BasicTripletSampler(const BasicLabeledDataset<Scalar>& data) : data_(&data) {
    std::set<std::string> labels;
    for (const auto& bag : data.bags) labels.insert(bag.label);
    if (labels.size() < 2) throw std::invalid_argument("triplet sampling needs at least 2 classes");
    for (std::size_t i = 0; i < data.bags.size(); ++i) {
      const auto pos = std::distance(labels.begin(), labels.find(data.bags[i].label));
      class_of_.push_back(static_cast<std::size_t>(pos));
    }
    members_.resize(labels.size());
    for (std::size_t i = 0; i < class_of_.size(); ++i) members_[class_of_[i]].push_back(i);
    bool any = false;
    for (const auto& m : members_) any = any || m.size() >= 2;
    if (!any) throw std::invalid_argument("triplet sampling needs a class with at least 2 bags");
  }

  BasicTriplet<Scalar> operator()(Rng& rng) const {
    const auto& bags = data_->bags;
    std::uniform_int_distribution<std::size_t> any(0, bags.size() - 1);
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      const std::size_t b = any(rng);
      const auto& same = members_[class_of_[b]];
      if (same.size() < 2) continue;
      // Positive: uniform over the other members of the base's class.
      std::uniform_int_distribution<std::size_t> pos_pick(0, same.size() - 2);
      std::size_t p = same[pos_pick(rng)];
      if (p == b) p = same.back();
      // Negative: uniform over all bags outside the base's class.
      const std::size_t n_other = bags.size() - same.size();
      std::uniform_int_distribution<std::size_t> neg_pick(0, n_other - 1);
      std::size_t rank = neg_pick(rng), neg = 0;
      for (std::size_t i = 0; i < bags.size(); ++i) {
        if (class_of_[i] == class_of_[b]) continue;
        if (rank-- == 0) {
          neg = i;
          break;
        }
      }
      return {&bags[b], &bags[p], &bags[neg]};
    }
    throw std::runtime_error("could not sample a triplet with a valid positive bag");
  }

 private:
  const BasicLabeledDataset<Scalar>* data_;
  std::vector<std::size_t> class_of_;
  std::vector<std::vector<std::size_t>> members_;
};

using TripletSampler = BasicTripletSampler<double>;

template <typename Scalar>
BasicTriplet<Scalar> sample_triplet(const BasicLabeledDataset<Scalar>& data, Rng& rng) {
  return BasicTripletSampler<Scalar>(data)(rng);
}

}  // namespace sdemd
