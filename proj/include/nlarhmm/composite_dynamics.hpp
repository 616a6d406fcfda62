#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nlarhmm/cartesian_dynamics.hpp"
#include "nlarhmm/layout.hpp"
#include "nlarhmm/quaternion_dynamics.hpp"

namespace nlarhmm {

using BlockDynamics = std::variant<CartesianDynamics, QuaternionDynamics>;
using BlockData = std::variant<CartesianData, QuaternionData>;

// One sequence with every block's transitions prepared for likelihood
// evaluation and M-steps.
using PreparedSequence = std::vector<BlockData>;

struct MStepOptions {
  CovarianceKind covariance = CovarianceKind::Full;
  OptimizerConfig optimizer{};
};

// Product-form emission: given the mode, every layout block evolves
// independently, so the log-emission is the sum of the per-block terms.
// A layout with a single block makes this the plain Cartesian or quaternion
// law.
class CompositeDynamics {
 public:
  CompositeDynamics(ObservationLayout layout, std::vector<BlockDynamics> parts)
      : layout_(std::move(layout)), parts_(std::move(parts)) {
    if (parts_.size() != layout_.size() || parts_.empty()) {
      throw DimensionError("CompositeDynamics: need exactly one dynamics per layout block");
    }
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const auto& b = layout_[i];
      const bool ok = std::visit(
          [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuaternionDynamics>) {
              return b.kind == BlockKind::Quaternion;
            } else {
              return b.kind != BlockKind::Quaternion && p.dim() == b.dim;
            }
          },
          parts_[i]);
      if (!ok) throw DimensionError("CompositeDynamics: dynamics for block '" + b.name + "' do not match its kind");
    }
  }

  const ObservationLayout& layout() const { return layout_; }
  const std::vector<BlockDynamics>& parts() const { return parts_; }

  double log_emission(const Vector& y_prev, const Vector& y_next) const {
    require_same_size(y_prev.size(), layout_.width(), "CompositeDynamics::log_emission");
    require_same_size(y_next.size(), layout_.width(), "CompositeDynamics::log_emission");
    double total = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const auto& b = layout_[i];
      const Vector prev = y_prev.segment(b.offset, b.dim);
      const Vector next = y_next.segment(b.offset, b.dim);
      total += std::visit(
          [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuaternionDynamics>) {
              return p.log_emission(UnitQuaternion::normalized(prev), UnitQuaternion::normalized(next));
            } else {
              return p.log_emission(prev, next);
            }
          },
          parts_[i]);
    }
    return total;
  }

  PreparedSequence prepare(const ObservationSequence& seq) const {
    if (!(seq.layout == layout_)) throw DimensionError("CompositeDynamics::prepare: layout mismatch");
    if (seq.steps() < 1) throw DataError("CompositeDynamics::prepare: sequence needs at least one transition");
    PreparedSequence out;
    out.reserve(parts_.size());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Matrix rows = seq.block(i);
      out.push_back(std::visit([&](const auto& p) -> BlockData { return p.prepare(rows); }, parts_[i]));
    }
    return out;
  }

  // Per-block log-emissions of every transition, T × blocks.
  Matrix block_log_emissions(const PreparedSequence& seq) const {
    require_same_size(static_cast<Eigen::Index>(seq.size()), static_cast<Eigen::Index>(parts_.size()),
                      "CompositeDynamics::block_log_emissions");
    Matrix out;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Vector col = std::visit(
          [&](const auto& p) -> Vector {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuaternionDynamics>) {
              return p.log_emissions(std::get<QuaternionData>(seq[i]));
            } else {
              return p.log_emissions(std::get<CartesianData>(seq[i]));
            }
          },
          parts_[i]);
      if (i == 0) out.resize(col.size(), static_cast<Eigen::Index>(parts_.size()));
      out.col(static_cast<Eigen::Index>(i)) = col;
    }
    return out;
  }

  Vector log_emissions(const PreparedSequence& seq) const { return block_log_emissions(seq).rowwise().sum(); }

  // Every block is re-estimated with the same responsibilities.
  CompositeDynamics m_step(const std::vector<PreparedSequence>& data, const std::vector<Vector>& gammas,
                           const MStepOptions& options = {}) const {
    std::vector<BlockDynamics> updated;
    updated.reserve(parts_.size());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      updated.push_back(std::visit(
          [&](const auto& p) -> BlockDynamics {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuaternionDynamics>) {
              return p.m_step(collect<QuaternionData>(data, i), gammas, options.optimizer, options.covariance);
            } else {
              return p.m_step(collect<CartesianData>(data, i), gammas, options.covariance);
            }
          },
          parts_[i]));
    }
    return CompositeDynamics(layout_, std::move(updated));
  }

  CompositeDynamics m_step(const std::vector<ObservationSequence>& sequences, const std::vector<Vector>& gammas,
                           const MStepOptions& options = {}) const {
    std::vector<PreparedSequence> data;
    data.reserve(sequences.size());
    for (const auto& s : sequences) data.push_back(prepare(s));
    return m_step(data, gammas, options);
  }

 private:
  template <typename D>
  static std::vector<D> collect(const std::vector<PreparedSequence>& data, std::size_t block) {
    std::vector<D> out;
    out.reserve(data.size());
    for (const auto& seq : data) out.push_back(std::get<D>(seq[block]));
    return out;
  }

  ObservationLayout layout_;
  std::vector<BlockDynamics> parts_;
};

// Every mode's emission law is a (possibly single-block) composite.
using EmissionDynamics = CompositeDynamics;

}  // namespace nlarhmm
