#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/composite_dynamics.hpp"
#include "nlarhmm/standardization.hpp"

namespace nlarhmm {

inline bool same_basis(const BasisFamily& a, const BasisFamily& b) {
  if (a.kind().index() != b.kind().index()) return false;
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.kind());
        if constexpr (std::is_same_v<T, LinearBasis>) {
          return x.d == y.d;
        } else if constexpr (std::is_same_v<T, PolynomialBasis>) {
          return x.d == y.d && x.k == y.k;
        } else {
          return x.centers.rows() == y.centers.rows() && x.centers.cols() == y.centers.cols() &&
                 x.centers == y.centers && x.widths == y.widths;
        }
      },
      a.kind());
}

// Θ: initial distribution, transition matrix, per-mode emission dynamics, and
// the observation transform the model was trained under.
class ModelParams {
 public:
  ModelParams(InitialDistribution init, TransitionMatrix trans, std::vector<EmissionDynamics> emissions,
              std::optional<Standardization> standardization = std::nullopt)
      : modes_(init.size()),
        init_(std::move(init)),
        trans_(std::move(trans)),
        emissions_(std::move(emissions)),
        standardization_(std::move(standardization)) {
    const auto S = static_cast<std::size_t>(modes_.count());
    if (trans_.size() != modes_.count()) throw DimensionError("ModelParams: transition matrix size != S");
    if (emissions_.size() != S) throw DimensionError("ModelParams: need one emission law per mode");
    const auto& ref = emissions_.front();
    for (const auto& e : emissions_) {
      if (!(e.layout() == ref.layout())) throw DimensionError("ModelParams: emissions use different layouts");
      for (std::size_t b = 0; b < ref.parts().size(); ++b) {
        const auto* c0 = std::get_if<CartesianDynamics>(&ref.parts()[b]);
        const auto* c1 = std::get_if<CartesianDynamics>(&e.parts()[b]);
        if (c0 != nullptr && c1 != nullptr && !same_basis(c0->basis(), c1->basis())) {
          throw DimensionError("ModelParams: modes must share the basis of block '" + ref.layout()[b].name + "'");
        }
      }
    }
    if (standardization_ && standardization_->width() != layout().width()) {
      throw DimensionError("ModelParams: standardization width != layout width");
    }
  }

  int num_modes() const { return modes_.count(); }
  const ModeSet& modes() const { return modes_; }
  const InitialDistribution& init() const { return init_; }
  const TransitionMatrix& trans() const { return trans_; }
  const std::vector<EmissionDynamics>& emissions() const { return emissions_; }
  const EmissionDynamics& emission(int s) const { return emissions_[static_cast<std::size_t>(s)]; }
  const ObservationLayout& layout() const { return emissions_.front().layout(); }
  const std::optional<Standardization>& standardization() const { return standardization_; }

  ModelParams with_standardization(Standardization s) const {
    return ModelParams(init_, trans_, emissions_, std::move(s));
  }

  // Blocks share their basis across modes, so any mode can prepare data.
  PreparedSequence prepare(const ObservationSequence& seq) const { return emissions_.front().prepare(seq); }

 private:
  ModeSet modes_;
  InitialDistribution init_;
  TransitionMatrix trans_;
  std::vector<EmissionDynamics> emissions_;
  std::optional<Standardization> standardization_;
};

// New model whose mode perm[s] carries what mode s carried in `model`.
inline ModelParams permute_modes(const ModelParams& model, const std::vector<int>& perm) {
  const int S = model.num_modes();
  require_same_size(static_cast<Eigen::Index>(perm.size()), S, "permute_modes");
  Vector pi(S);
  Matrix T(S, S);
  std::vector<std::optional<EmissionDynamics>> em(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    pi(perm[static_cast<std::size_t>(s)]) = model.init()[s];
    for (int r = 0; r < S; ++r) T(perm[static_cast<std::size_t>(s)], perm[static_cast<std::size_t>(r)]) = model.trans()(s, r);
    em[static_cast<std::size_t>(perm[static_cast<std::size_t>(s)])] = model.emission(s);
  }
  std::vector<EmissionDynamics> out;
  for (auto& e : em) {
    if (!e) throw std::invalid_argument("permute_modes: not a permutation");
    out.push_back(std::move(*e));
  }
  return ModelParams(InitialDistribution(pi), TransitionMatrix(T), std::move(out), model.standardization());
}

// Structure of a model to be learned: the layout, a basis for every
// Cartesian/scalar block (ignored for quaternion blocks), and S.
struct ModelSpec {
  ObservationLayout layout;
  std::vector<std::optional<BasisFamily>> bases;
  int modes = 2;
  MStepOptions mstep{};

  // Position blocks linear, scalar blocks quadratic, quaternions linear in 𝕊³.
  static ModelSpec with_defaults(ObservationLayout layout, int modes) {
    ModelSpec spec;
    spec.modes = modes;
    for (const auto& b : layout.blocks()) {
      switch (b.kind) {
        case BlockKind::Cartesian:
          spec.bases.emplace_back(BasisFamily::linear(b.dim));
          break;
        case BlockKind::Scalar:
          spec.bases.emplace_back(BasisFamily::polynomial(1, 2));
          break;
        case BlockKind::Quaternion:
          spec.bases.emplace_back(std::nullopt);
          break;
      }
    }
    spec.layout = std::move(layout);
    return spec;
  }

  // Every Cartesian/scalar block uses the same family built by `make(dim)`.
  template <typename Make>
  static ModelSpec uniform(ObservationLayout layout, int modes, Make make) {
    ModelSpec spec = with_defaults(std::move(layout), modes);
    for (std::size_t i = 0; i < spec.layout.size(); ++i) {
      if (spec.layout[i].kind != BlockKind::Quaternion) spec.bases[i] = make(spec.layout[i].dim);
    }
    return spec;
  }

  void validate() const {
    if (modes < 1) throw std::invalid_argument("ModelSpec: need at least one mode");
    if (bases.size() != layout.size()) throw DimensionError("ModelSpec: need one basis entry per block");
    for (std::size_t i = 0; i < bases.size(); ++i) {
      const auto& b = layout[i];
      if (b.kind == BlockKind::Quaternion) continue;
      if (!bases[i]) throw DimensionError("ModelSpec: block '" + b.name + "' has no basis");
      if (bases[i]->input_dim() != b.dim) {
        throw DimensionError("ModelSpec: basis dimension of block '" + b.name + "' does not match the layout");
      }
    }
  }

  // Ω = 0, Σ = I, zero rotation for every block.
  EmissionDynamics zero_emission() const {
    validate();
    std::vector<BlockDynamics> parts;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (layout[i].kind == BlockKind::Quaternion) {
        parts.emplace_back(QuaternionDynamics::identity());
      } else {
        parts.emplace_back(CartesianDynamics::zero(*bases[i]));
      }
    }
    return CompositeDynamics(layout, std::move(parts));
  }
};

}  // namespace nlarhmm
