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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdemd/bag.hpp"
#include "sdemd/emd.hpp"
#include "sdemd/quantizer.hpp"

namespace sdemd {

struct RankedEntry {
  std::string bag_id;
  double emd = 0;
  bool relevant = false;
};

struct RankedResult {
  std::string query_id;
  std::vector<RankedEntry> entries;

  std::size_t relevant_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const RankedEntry& e) { return e.relevant; }));
  }
};

struct CurvePoint {
  double x = 0;
  double y = 0;
  // Size of the returned list; 0 for the origin and for fold-averaged curves.
  std::size_t cutoff = 0;
};

// Database side of retrieval with histograms computed once.
template <typename Scalar>
struct BasicIndexedDatabase {
  const BasicLabeledDataset<Scalar>* data = nullptr;
  std::vector<Vector<Scalar>> histograms;
  Matrix<Scalar> ground;
};

template <typename Scalar>
BasicIndexedDatabase<Scalar> index_database(const BasicLabeledDataset<Scalar>& database,
                                            const BasicDictionary<Scalar>& dict, Scalar sigma) {
  validate_dictionary(dict, database.dim());
  BasicIndexedDatabase<Scalar> db;
  db.data = &database;
  db.ground = ground_distance_from_dictionary(dict);
  db.histograms.reserve(database.size());
  for (const auto& bag : database.bags) db.histograms.push_back(quantize(bag, dict, sigma));
  return db;
}

template <typename Scalar>
RankedResult rank_database(const BasicBag<Scalar>& query, const BasicIndexedDatabase<Scalar>& db,
                           const BasicDictionary<Scalar>& dict, Scalar sigma) {
  const Vector<Scalar> q = quantize(query, dict, sigma);
  RankedResult result;
  result.query_id = query.id;
  result.entries.reserve(db.histograms.size());
  for (std::size_t i = 0; i < db.histograms.size(); ++i) {
    const auto& bag = db.data->bags[i];
    result.entries.push_back({bag.id, static_cast<double>(emd_value(q, db.histograms[i], db.ground)),
                              bag.label == query.label});
  }
  std::sort(result.entries.begin(), result.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.emd != b.emd ? a.emd < b.emd : a.bag_id < b.bag_id;
  });
  return result;
}

// Database bags ordered by ascending EMD to the query; ties go to the
// lexicographically smaller bag id.
template <typename Scalar>
RankedResult rank_database(const BasicBag<Scalar>& query, const BasicLabeledDataset<Scalar>& database,
                           const BasicDictionary<Scalar>& dict, Scalar sigma) {
  return rank_database(query, index_database(database, dict, sigma), dict, sigma);
}

// (recall, precision) at every cutoff 1..N.
inline std::vector<CurvePoint> pr_points(const RankedResult& r) {
  const std::size_t relevant = r.relevant_count();
  if (relevant == 0) throw std::invalid_argument("recall is undefined without relevant items");
  std::vector<CurvePoint> pts;
  pts.reserve(r.entries.size());
  std::size_t tp = 0;
  for (std::size_t c = 1; c <= r.entries.size(); ++c) {
    tp += r.entries[c - 1].relevant ? 1 : 0;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(relevant),
                   static_cast<double>(tp) / static_cast<double>(c), c});
  }
  return pts;
}

// (FPR, TPR) at the origin and every cutoff 1..N.
inline std::vector<CurvePoint> roc_points(const RankedResult& r) {
  const std::size_t relevant = r.relevant_count();
  const std::size_t irrelevant = r.entries.size() - relevant;
  if (relevant == 0 || irrelevant == 0)
    throw std::invalid_argument("ROC needs both relevant and irrelevant items");
  std::vector<CurvePoint> pts;
  pts.reserve(r.entries.size() + 1);
  pts.push_back({0.0, 0.0, 0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t c = 1; c <= r.entries.size(); ++c) {
    (r.entries[c - 1].relevant ? tp : fp) += 1;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(irrelevant),
                   static_cast<double>(tp) / static_cast<double>(relevant), c});
  }
  return pts;
}

// Trapezoidal area under points sorted by x.
inline double auc(const std::vector<CurvePoint>& pts) {
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].x < pts[i - 1].x) throw std::invalid_argument("curve points are not sorted by x");
    area += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) / 2;
  }
  return area;
}

constexpr std::size_t kCurveGrid = 101;

// ROC value at each grid x by linear interpolation; on vertical segments the
// upper point is used.
inline std::vector<double> interpolate_roc(const std::vector<CurvePoint>& pts) {
  std::vector<double> ys(kCurveGrid);
  for (std::size_t g = 0; g < kCurveGrid; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(kCurveGrid - 1);
    const auto it = std::upper_bound(pts.begin(), pts.end(), x,
                                     [](double v, const CurvePoint& p) { return v < p.x; });
    if (it == pts.begin()) {
      ys[g] = pts.front().y;
    } else if (it == pts.end()) {
      ys[g] = pts.back().y;
    } else {
      const auto& lo = *(it - 1);
      const auto& hi = *it;
      ys[g] = lo.y + (hi.y - lo.y) * (x - lo.x) / (hi.x - lo.x);
    }
  }
  return ys;
}

// Interpolated precision at each grid recall: the best precision reached at
// any recall >= the grid value.
inline std::vector<double> interpolate_pr(const std::vector<CurvePoint>& pts) {
  std::vector<double> ys(kCurveGrid, 0.0);
  for (std::size_t g = 0; g < kCurveGrid; ++g) {
    const double r = static_cast<double>(g) / static_cast<double>(kCurveGrid - 1);
    double best = 0;
    for (const auto& p : pts)
      if (p.x >= r - 1e-12) best = std::max(best, p.y);
    ys[g] = best;
  }
  return ys;
}

struct FoldEvaluation {
  int fold = 0;
  std::size_t queries = 0;
  double mean_auc = 0;
  std::vector<CurvePoint> roc;  // mean over queries on the grid
  std::vector<CurvePoint> pr;
};

struct Evaluation {
  std::vector<FoldEvaluation> folds;
  std::vector<CurvePoint> roc;  // mean over folds on the grid
  std::vector<CurvePoint> pr;
  double mean_auc = 0;
  double sd_auc = 0;
};

namespace detail {

inline std::vector<CurvePoint> grid_curve(const std::vector<double>& ys) {
  std::vector<CurvePoint> pts(ys.size());
  for (std::size_t g = 0; g < ys.size(); ++g)
    pts[g] = {static_cast<double>(g) / static_cast<double>(ys.size() - 1), ys[g], 0};
  return pts;
}

}  // namespace detail

// Ten-fold retrieval protocol: each fold in turn is the query set against the
// other nine. Queries whose class is absent from (or alone in) the database
// are skipped. `folds` restricts the run to a subset of fold indices.
template <typename Scalar>
Evaluation evaluate(const BasicLabeledDataset<Scalar>& data, const BasicDictionary<Scalar>& dict,
                    Scalar sigma, std::uint64_t seed, const std::vector<int>& folds = {}) {
  std::vector<int> which = folds;
  if (which.empty())
    for (int f = 0; f < 10; ++f) which.push_back(f);
  Evaluation out;
  std::vector<double> roc_sum(kCurveGrid, 0.0), pr_sum(kCurveGrid, 0.0);
  for (int f : which) {
    const auto split = tenfold_split(data, f, seed);
    const auto db = index_database(split.database, dict, sigma);
    FoldEvaluation fe;
    fe.fold = f;
    std::vector<double> roc_acc(kCurveGrid, 0.0), pr_acc(kCurveGrid, 0.0);
    double auc_acc = 0;
    for (const auto& q : split.query.bags) {
      const auto ranked = rank_database(q, db, dict, sigma);
      const std::size_t rel = ranked.relevant_count();
      if (rel == 0 || rel == ranked.entries.size()) continue;
      const auto roc = roc_points(ranked);
      const auto pr = pr_points(ranked);
      auc_acc += auc(roc);
      const auto ry = interpolate_roc(roc), py = interpolate_pr(pr);
      for (std::size_t g = 0; g < kCurveGrid; ++g) {
        roc_acc[g] += ry[g];
        pr_acc[g] += py[g];
      }
      ++fe.queries;
    }
    if (fe.queries == 0) throw std::invalid_argument("fold " + std::to_string(f) + " has no usable queries");
    const double nq = static_cast<double>(fe.queries);
    for (std::size_t g = 0; g < kCurveGrid; ++g) {
      roc_acc[g] /= nq;
      pr_acc[g] /= nq;
      roc_sum[g] += roc_acc[g];
      pr_sum[g] += pr_acc[g];
    }
    fe.mean_auc = auc_acc / nq;
    fe.roc = detail::grid_curve(roc_acc);
    fe.pr = detail::grid_curve(pr_acc);
    out.folds.push_back(std::move(fe));
  }
  const double nf = static_cast<double>(out.folds.size());
  for (std::size_t g = 0; g < kCurveGrid; ++g) {
    roc_sum[g] /= nf;
    pr_sum[g] /= nf;
  }
  out.roc = detail::grid_curve(roc_sum);
  out.pr = detail::grid_curve(pr_sum);
  for (const auto& fe : out.folds) out.mean_auc += fe.mean_auc / nf;
  if (out.folds.size() > 1) {
    double ss = 0;
    for (const auto& fe : out.folds) ss += (fe.mean_auc - out.mean_auc) * (fe.mean_auc - out.mean_auc);
    out.sd_auc = std::sqrt(ss / (nf - 1));
  }
  return out;
}

}  // namespace sdemd
