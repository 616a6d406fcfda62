#pragma once

#include <cmath>
#include <vector>

#include "nlarhmm/layout.hpp"

namespace nlarhmm {

// Per-channel affine transform x ↦ (x - mean) / scale. Quaternion channels are
// passed through unchanged (mean 0, scale 1) to keep them on the unit sphere.
struct Standardization {
  Vector mean;
  Vector scale;
  std::vector<bool> passthrough;

  static Standardization identity(const ObservationLayout& layout) {
    Standardization s;
    s.mean = Vector::Zero(layout.width());
    s.scale = Vector::Ones(layout.width());
    s.passthrough.assign(static_cast<std::size_t>(layout.width()), false);
    for (const auto& b : layout.blocks()) {
      if (b.kind != BlockKind::Quaternion) continue;
      for (int c = 0; c < b.dim; ++c) s.passthrough[static_cast<std::size_t>(b.offset + c)] = true;
    }
    return s;
  }

  // Pooled statistics over every row of every sequence.
  static Standardization fit(const std::vector<ObservationSequence>& sequences) {
    if (sequences.empty()) throw DataError("Standardization::fit: no sequences");
    const auto& layout = sequences.front().layout;
    Standardization s = identity(layout);
    const Eigen::Index width = layout.width();
    Vector sum = Vector::Zero(width);
    double count = 0.0;
    for (const auto& seq : sequences) {
      if (!(seq.layout == layout)) throw DimensionError("Standardization::fit: layouts differ");
      sum += seq.values.colwise().sum().transpose();
      count += static_cast<double>(seq.values.rows());
    }
    if (!(count > 0.0)) throw DataError("Standardization::fit: empty sequences");
    const Vector mean = sum / count;
    Vector sq = Vector::Zero(width);
    for (const auto& seq : sequences) {
      sq += (seq.values.rowwise() - mean.transpose()).array().square().matrix().colwise().sum().transpose();
    }
    for (Eigen::Index c = 0; c < width; ++c) {
      if (s.passthrough[static_cast<std::size_t>(c)]) continue;
      const double sd = std::sqrt(sq(c) / count);
      s.mean(c) = mean(c);
      s.scale(c) = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  int width() const { return static_cast<int>(mean.size()); }

  Matrix apply(const Matrix& values) const {
    require_same_size(values.cols(), mean.size(), "Standardization::apply");
    Matrix out = values;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      if (passthrough[static_cast<std::size_t>(c)]) continue;
      out.col(c) = (out.col(c).array() - mean(c)) / scale(c);
    }
    return out;
  }

  Matrix invert(const Matrix& values) const {
    require_same_size(values.cols(), mean.size(), "Standardization::invert");
    Matrix out = values;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      if (passthrough[static_cast<std::size_t>(c)]) continue;
      out.col(c) = out.col(c).array() * scale(c) + mean(c);
    }
    return out;
  }

  ObservationSequence apply(const ObservationSequence& seq) const { return {seq.layout, apply(seq.values)}; }
  ObservationSequence invert(const ObservationSequence& seq) const { return {seq.layout, invert(seq.values)}; }
};

}  // namespace nlarhmm
