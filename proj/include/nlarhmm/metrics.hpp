#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nlarhmm/core.hpp"

namespace nlarhmm {

// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
// with potentials, O(n³)). Returns assignment[row] = column.
inline std::vector<int> hungarian_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("hungarian_min: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return assignment;
}

// Frame-overlap table between two labelings. Labels are compacted to
// 0..k-1 in increasing order of their original value.
struct Contingency {
  std::vector<int> truth_labels;
  std::vector<int> pred_labels;
  Matrix overlap;  // truth × pred frame counts
  Vector truth_sizes;
  Vector pred_sizes;
  // match[g] = matched predicted label index or -1
  std::vector<int> match;
  double matched_frames = 0.0;
};

inline Contingency match_labels(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("segmentation metrics: paths differ in length");
  if (pred.empty()) throw std::invalid_argument("segmentation metrics: empty paths");
  auto compact = [](const std::vector<int>& labels, std::vector<int>& values) {
    std::map<int, int> index;
    for (int l : labels) index.emplace(l, 0);
    int k = 0;
    for (auto& [label, idx] : index) {
      idx = k++;
      values.push_back(label);
    }
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(index[l]);
    return out;
  };
  Contingency c;
  const auto t = compact(truth, c.truth_labels);
  const auto p = compact(pred, c.pred_labels);
  const auto G = static_cast<Eigen::Index>(c.truth_labels.size());
  const auto P = static_cast<Eigen::Index>(c.pred_labels.size());
  c.overlap = Matrix::Zero(G, P);
  for (std::size_t f = 0; f < t.size(); ++f) c.overlap(t[f], p[f]) += 1.0;
  c.truth_sizes = c.overlap.rowwise().sum();
  c.pred_sizes = c.overlap.colwise().sum().transpose();

  // Maximize the matched frame count; among equally good matchings prefer the
  // larger IoU total (the IoU term sums to less than one frame), so the result
  // does not depend on how labels happen to be numbered.
  const Eigen::Index n = std::max(G, P);
  Matrix cost = Matrix::Zero(n, n);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index q = 0; q < P; ++q) {
      const double inter = c.overlap(g, q);
      const double iou = inter / (c.truth_sizes(g) + c.pred_sizes(q) - inter);
      cost(g, q) = -(inter + iou / static_cast<double>(n + 1));
    }
  }
  const auto assignment = hungarian_min(cost);
  c.match.assign(static_cast<std::size_t>(G), -1);
  for (Eigen::Index g = 0; g < G; ++g) {
    const int col = assignment[static_cast<std::size_t>(g)];
    if (col < P) {
      c.match[static_cast<std::size_t>(g)] = col;
      c.matched_frames += c.overlap(g, col);
    }
  }
  return c;
}

// Jaccard (intersection over union) per ground-truth label under the
// overlap-maximizing one-to-one matching, averaged over ground-truth labels.
// A ground-truth label left without a partner scores 0.
inline double seg_score(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = match_labels(pred, truth);
  std::vector<double> iou;
  for (std::size_t g = 0; g < c.match.size(); ++g) {
    const int p = c.match[g];
    if (p < 0) continue;
    const auto gi = static_cast<Eigen::Index>(g);
    const double inter = c.overlap(gi, p);
    const double uni = c.truth_sizes(gi) + c.pred_sizes(p) - inter;
    iou.push_back(inter / uni);
  }
  // Summed in sorted order so relabeling cannot change the rounding.
  std::sort(iou.begin(), iou.end());
  return std::accumulate(iou.begin(), iou.end(), 0.0) / static_cast<double>(c.match.size());
}

// Fraction of frames labeled correctly under the best one-to-one relabeling.
inline double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = match_labels(pred, truth);
  return c.matched_frames / static_cast<double>(pred.size());
}

// Mean silhouette (b - a) / max(a, b) with Euclidean distances between rows.
// Points in singleton clusters contribute 0.
inline double silhouette(const Matrix& points, const std::vector<int>& labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  require_same_size(points.rows(), n, "silhouette");
  std::map<int, int> index;
  for (int l : labels) index.emplace(l, 0);
  if (index.size() < 2) throw std::invalid_argument("silhouette: undefined for a single cluster");
  int k = 0;
  for (auto& [label, idx] : index) idx = k++;
  std::vector<int> lab(labels.size());
  Vector sizes = Vector::Zero(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    lab[i] = index[labels[i]];
    sizes(lab[i]) += 1.0;
  }

  double total = 0.0;
  Vector sums(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = lab[static_cast<std::size_t>(i)];
    if (sizes(own) <= 1.0) continue;
    sums.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sums(lab[static_cast<std::size_t>(j)]) += (points.row(i) - points.row(j)).norm();
    }
    const double a = sums(own) / (sizes(own) - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums(c) / sizes(c));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace nlarhmm
