#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/core.hpp"

namespace nlarhmm {

enum class BlockKind { Cartesian, Quaternion, Scalar };

inline const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Cartesian:
      return "cartesian";
    case BlockKind::Quaternion:
      return "quaternion";
    case BlockKind::Scalar:
      return "scalar";
  }
  return "?";
}

inline BlockKind block_kind_from_string(const std::string& s) {
  if (s == "cartesian") return BlockKind::Cartesian;
  if (s == "quaternion") return BlockKind::Quaternion;
  if (s == "scalar") return BlockKind::Scalar;
  throw DataError("unknown block kind '" + s + "'");
}

struct Block {
  std::string name;
  BlockKind kind = BlockKind::Cartesian;
  int dim = 1;
  int offset = 0;
};

// Ordered, contiguous partition of the observation channels.
class ObservationLayout {
 public:
  ObservationLayout() = default;

  void add(std::string name, BlockKind kind, int dim = 1) {
    if (kind == BlockKind::Quaternion) dim = 4;
    if (kind == BlockKind::Scalar) dim = 1;
    if (dim < 1) throw DataError("ObservationLayout: block '" + name + "' has non-positive width");
    for (const auto& b : blocks_) {
      if (b.name == name) throw DataError("ObservationLayout: duplicate block name '" + name + "'");
    }
    blocks_.push_back({std::move(name), kind, dim, width_});
    width_ += dim;
  }

  static ObservationLayout single_cartesian(int d, std::string name = "y") {
    ObservationLayout layout;
    layout.add(std::move(name), BlockKind::Cartesian, d);
    return layout;
  }

  static ObservationLayout single_quaternion(std::string name = "q") {
    ObservationLayout layout;
    layout.add(std::move(name), BlockKind::Quaternion);
    return layout;
  }

  // Per arm: position (3), orientation quaternion, gripper angle.
  static ObservationLayout pose_gripper(int arms) {
    ObservationLayout layout;
    for (int h = 1; h <= arms; ++h) {
      layout.add("x" + std::to_string(h), BlockKind::Cartesian, 3);
      layout.add("q" + std::to_string(h), BlockKind::Quaternion);
      layout.add("th" + std::to_string(h), BlockKind::Scalar);
    }
    return layout;
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  int width() const { return width_; }
  std::size_t size() const { return blocks_.size(); }
  const Block& operator[](std::size_t i) const { return blocks_[i]; }

  // Column names used in CSV headers: a scalar block is just its name, a
  // quaternion block gets _r/_i/_j/_k, a Cartesian block _0.._{d-1}.
  std::vector<std::string> channel_names() const {
    std::vector<std::string> names;
    for (const auto& b : blocks_) {
      switch (b.kind) {
        case BlockKind::Scalar:
          names.push_back(b.name);
          break;
        case BlockKind::Quaternion:
          for (const char* s : {"_r", "_i", "_j", "_k"}) names.push_back(b.name + s);
          break;
        case BlockKind::Cartesian:
          for (int i = 0; i < b.dim; ++i) names.push_back(b.name + "_" + std::to_string(i));
          break;
      }
    }
    return names;
  }

  bool operator==(const ObservationLayout& other) const {
    if (blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& a = blocks_[i];
      const auto& b = other.blocks_[i];
      if (a.name != b.name || a.kind != b.kind || a.dim != b.dim || a.offset != b.offset) return false;
    }
    return true;
  }

 private:
  std::vector<Block> blocks_;
  int width_ = 0;
};

// Observations y_0..y_T, one per row, with their channel layout. y_0 is only
// conditioned on; modes z_1..z_T emit y_1..y_T.
struct ObservationSequence {
  ObservationLayout layout;
  Matrix values;  // (T + 1) × width

  ObservationSequence() = default;
  ObservationSequence(ObservationLayout l, Matrix v) : layout(std::move(l)), values(std::move(v)) {
    require_same_size(values.cols(), layout.width(), "ObservationSequence");
  }

  // Number of emissions T.
  Eigen::Index steps() const { return values.rows() > 0 ? values.rows() - 1 : 0; }

  Matrix block(std::size_t i) const {
    const auto& b = layout[i];
    return values.middleCols(b.offset, b.dim);
  }
};

}  // namespace nlarhmm
