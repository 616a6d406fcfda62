#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlarhmm/inference.hpp"
#include "nlarhmm/serialization.hpp"
#include "nlarhmm/simulate.hpp"

namespace nlarhmm {

// Training configuration read by `train --config`. Example:
//
//   {
//     "modes": 2,
//     "layout": {"blocks": [{"name": "y", "kind": "cartesian", "dim": 2}]},
//     "basis": {"kind": "poly", "k": 2},
//     "em": {"tol": 1e-5, "max_iters": 100, "seed": 0, "restarts": 5},
//     "covariance": "full"
//   }
//
// "basis" applies to every Cartesian/scalar block; "bases" (one entry per
// block, null for quaternions) overrides it. Omitting both gives linear
// position blocks and quadratic scalar blocks. GRBF entries either list
// "centers"/"widths" or give "per_dim", which places a grid over the range
// of the standardized training data.
struct RunConfig {
  ObservationLayout layout;
  int modes = 2;
  std::vector<Json> bases;  // one per block; null = default for the block kind
  EmConfig em{};
  MStepOptions mstep{};
  bool standardize = true;
  std::string format = "csv";  // or "jigsaw"
  int arms = 2;
  std::optional<SimConfig> simulation;

  static RunConfig from_json(const Json& j) {
    try {
      RunConfig c;
      c.modes = j.value("modes", 2);
      c.format = j.value("format", std::string("csv"));
      if (c.format != "csv" && c.format != "jigsaw") throw std::invalid_argument("config: format must be csv or jigsaw");
      c.arms = j.value("arms", 2);
      if (j.contains("layout")) {
        c.layout = layout_from_json(j.at("layout"));
      } else if (c.format == "jigsaw") {
        c.layout = ObservationLayout::pose_gripper(c.arms);
      } else {
        throw std::invalid_argument("config: missing 'layout'");
      }
      c.bases.assign(c.layout.size(), Json(nullptr));
      if (j.contains("basis")) {
        for (std::size_t i = 0; i < c.layout.size(); ++i) {
          if (c.layout[i].kind != BlockKind::Quaternion) c.bases[i] = j.at("basis");
        }
      }
      if (j.contains("bases")) {
        const auto& b = j.at("bases");
        if (!b.is_array() || b.size() != c.layout.size()) {
          throw std::invalid_argument("config: 'bases' needs one entry per layout block");
        }
        for (std::size_t i = 0; i < b.size(); ++i) c.bases[i] = b[i];
      }
      if (j.contains("em")) {
        const auto& e = j.at("em");
        c.em.tol = e.value("tol", c.em.tol);
        c.em.max_iters = e.value("max_iters", c.em.max_iters);
        c.em.seed = e.value("seed", c.em.seed);
        c.em.restarts = e.value("restarts", c.em.restarts);
        c.em.max_rescues = e.value("max_rescues", c.em.max_rescues);
      }
      const auto cov = j.value("covariance", std::string("full"));
      if (cov == "full") {
        c.mstep.covariance = CovarianceKind::Full;
      } else if (cov == "diagonal") {
        c.mstep.covariance = CovarianceKind::Diagonal;
      } else {
        throw std::invalid_argument("config: covariance must be full or diagonal");
      }
      if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.mstep.optimizer.initial_step = o.value("initial_step", c.mstep.optimizer.initial_step);
        c.mstep.optimizer.grad_tol = o.value("grad_tol", c.mstep.optimizer.grad_tol);
        c.mstep.optimizer.max_iters = o.value("max_iters", c.mstep.optimizer.max_iters);
        c.mstep.optimizer.min_step = o.value("min_step", c.mstep.optimizer.min_step);
      }
      c.standardize = j.value("standardize", true);
      if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        SimConfig sim;
        sim.seed = s.value("seed", sim.seed);
        sim.n_sequences = s.value("n_sequences", sim.n_sequences);
        sim.length = s.value("length", sim.length);
        sim.dt = s.value("dt", sim.dt);
        sim.noise_std = s.value("noise_std", sim.noise_std);
        sim.validate();
        c.simulation = sim;
      }
      if (c.modes < 1) throw std::invalid_argument("config: modes must be >= 1");
      c.em.validate();
      return c;
    } catch (const Json::exception& e) {
      throw std::invalid_argument(std::string("config: ") + e.what());
    }
  }

  // Resolves the basis entries against the (already standardized) training
  // data, which fixes GRBF grids given by "per_dim".
  ModelSpec model_spec(const std::vector<ObservationSequence>& data) const {
    ModelSpec spec = ModelSpec::with_defaults(layout, modes);
    spec.mstep = mstep;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& b = layout[i];
      const auto& entry = bases[i];
      if (b.kind == BlockKind::Quaternion) {
        if (!entry.is_null()) throw std::invalid_argument("config: quaternion block '" + b.name + "' takes no basis");
        continue;
      }
      if (entry.is_null()) continue;
      const auto kind = entry.value("kind", std::string());
      if (kind == "linear") {
        spec.bases[i] = BasisFamily::linear(b.dim);
      } else if (kind == "poly") {
        spec.bases[i] = BasisFamily::polynomial(b.dim, entry.value("k", 2));
      } else if (kind == "grbf" && entry.contains("per_dim")) {
        if (data.empty()) throw DataError("config: a GRBF grid needs training data");
        Vector lo = Vector::Constant(b.dim, std::numeric_limits<double>::infinity());
        Vector hi = -lo;
        for (const auto& seq : data) {
          const Matrix block = seq.block(i);
          lo = lo.cwiseMin(block.colwise().minCoeff().transpose());
          hi = hi.cwiseMax(block.colwise().maxCoeff().transpose());
        }
        spec.bases[i] = grbf_on_grid(lo, hi, entry.at("per_dim").get<int>());
      } else if (kind == "grbf") {
        spec.bases[i] = basis_from_json(entry);
      } else {
        throw std::invalid_argument("config: unknown basis kind '" + kind + "' for block '" + b.name + "'");
      }
    }
    spec.validate();
    return spec;
  }
};

}  // namespace nlarhmm
