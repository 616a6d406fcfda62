#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/model.hpp"

namespace nlarhmm {

struct SimConfig {
  std::uint64_t seed = 0;
  int n_sequences = 50;
  int length = 100;  // emissions per sequence (T); sequences have T + 1 rows
  double dt = 0.05;
  double noise_std = 5e-3;

  void validate() const {
    if (n_sequences < 1 || length < 1 || !(dt > 0.0) || !(noise_std > 0.0)) {
      throw std::invalid_argument("SimConfig: all fields must be positive");
    }
  }
};

struct Dataset {
  ObservationLayout layout;
  std::vector<ObservationSequence> sequences;
  std::vector<std::vector<int>> paths;  // z_1..z_T per sequence
};

// Deterministic per-sequence generator: the same (seed, stream) always gives
// the same draws.
inline std::mt19937_64 sequence_rng(std::uint64_t seed, std::uint64_t stream, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu), static_cast<std::uint32_t>(stream >> 32), tag};
  return std::mt19937_64(seq);
}

inline int sample_categorical(const Vector& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

inline Vector sample_standard_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// Mode path z_1..z_T from the initial distribution and transition matrix.
inline std::vector<int> sample_mode_path(const Vector& init, const Matrix& trans, int length, std::mt19937_64& rng) {
  std::vector<int> path(static_cast<std::size_t>(length));
  path[0] = sample_categorical(init, rng);
  for (int t = 1; t < length; ++t) {
    path[static_cast<std::size_t>(t)] = sample_categorical(trans.row(path[static_cast<std::size_t>(t - 1)]).transpose(), rng);
  }
  return path;
}

// Draws y_t ~ p(· | z_t = s, y_{t-1}) for one emission law. Quaternion blocks
// are renormalized after the noise is added.
inline Vector sample_emission(const EmissionDynamics& dyn, const Vector& y_prev, std::mt19937_64& rng) {
  const auto& layout = dyn.layout();
  Vector y(layout.width());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& b = layout[i];
    const Vector prev = y_prev.segment(b.offset, b.dim);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          Vector mean;
          if constexpr (std::is_same_v<T, QuaternionDynamics>) {
            mean = p.predict(UnitQuaternion::normalized(prev)).vec();
          } else {
            mean = p.predict(prev);
          }
          const Eigen::LLT<Matrix> llt(p.noise().covariance());
          Vector draw = mean + llt.matrixL() * sample_standard_normal(b.dim, rng);
          if constexpr (std::is_same_v<T, QuaternionDynamics>) draw.normalize();
          y.segment(b.offset, b.dim) = draw;
        },
        dyn.parts()[i]);
  }
  return y;
}

// Generic sampling from a model: z_1 ~ ϖ, z_{t+1} ~ T(z_t, ·),
// y_t ~ emission(z_t, y_{t-1}).
inline std::pair<ObservationSequence, std::vector<int>> sample_model(const ModelParams& model, const SimConfig& cfg,
                                                                     const Vector& y0, std::uint64_t stream = 0) {
  require_same_size(y0.size(), model.layout().width(), "sample_model y0");
  auto rng = sequence_rng(cfg.seed, stream, 0x534d504cu);
  auto path = sample_mode_path(model.init().weights(), model.trans().probs(), cfg.length, rng);
  Matrix values(cfg.length + 1, y0.size());
  values.row(0) = y0.transpose();
  for (int t = 1; t <= cfg.length; ++t) {
    values.row(t) =
        sample_emission(model.emission(path[static_cast<std::size_t>(t - 1)]), values.row(t - 1).transpose(), rng)
            .transpose();
  }
  return {ObservationSequence(model.layout(), std::move(values)), std::move(path)};
}

// A switching system of Euler-integrated vector fields, y_{t+1} = step(y_t, z)
// + N(0, ς² I), with a Markov mode chain.
struct FieldSystem {
  int dim = 2;
  Vector init;
  Matrix trans;
  std::function<Vector(const Vector&, int, double)> step;  // (y, mode, dt) -> deterministic successor
  std::function<Vector(std::mt19937_64&)> initial_state;
  double escape_radius = std::numeric_limits<double>::infinity();
};

// Sequences whose trajectory leaves the escape radius are redrawn from the
// same stream, so the result still depends only on (seed, sequence index).
inline Dataset simulate_field_system(const FieldSystem& sys, const SimConfig& cfg, std::uint32_t tag) {
  cfg.validate();
  Dataset out;
  out.layout = ObservationLayout::single_cartesian(sys.dim);
  for (int n = 0; n < cfg.n_sequences; ++n) {
    auto rng = sequence_rng(cfg.seed, static_cast<std::uint64_t>(n), tag);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw NumericalError("simulate: trajectories keep escaping the bounded region");
      auto path = sample_mode_path(sys.init, sys.trans, cfg.length, rng);
      Matrix values(cfg.length + 1, sys.dim);
      values.row(0) = sys.initial_state(rng).transpose();
      bool escaped = false;
      for (int t = 1; t <= cfg.length; ++t) {
        const Vector prev = values.row(t - 1).transpose();
        const Vector next = sys.step(prev, path[static_cast<std::size_t>(t - 1)], cfg.dt) +
                            cfg.noise_std * sample_standard_normal(sys.dim, rng);
        values.row(t) = next.transpose();
        if (!next.allFinite() || next.norm() > sys.escape_radius) {
          escaped = true;
          break;
        }
      }
      if (escaped) continue;
      out.sequences.emplace_back(out.layout, std::move(values));
      out.paths.push_back(std::move(path));
      break;
    }
  }
  return out;
}

inline Matrix sticky_transitions() {
  Matrix t(2, 2);
  t << 0.95, 0.05, 0.05, 0.95;
  return t;
}

// f(y) = [y1³ + y2² y1 - y1 - y2,  y2³ + y1² y2 + y1 - y2]
inline Vector validation_field(const Vector& y) {
  const double y1 = y(0), y2 = y(1);
  return Vector{{y1 * y1 * y1 + y2 * y2 * y1 - y1 - y2, y2 * y2 * y2 + y1 * y1 * y2 + y1 - y2}};
}

// Two modes: y + δt f(y) and y - δt f(y); ϖ = [0.5, 0.5], 0.95 self-transition.
// y_0 is uniform on [-1, 1]². The circle |y| = 1 is repelling under the
// first mode, so sequences that escape |y| > 2 are redrawn.
inline FieldSystem validation_field_system() {
  FieldSystem sys;
  sys.dim = 2;
  sys.init = Vector::Constant(2, 0.5);
  sys.trans = sticky_transitions();
  sys.step = [](const Vector& y, int mode, double dt) -> Vector {
    const double sign = mode == 0 ? 1.0 : -1.0;
    return y + sign * dt * validation_field(y);
  };
  sys.initial_state = [](std::mt19937_64& rng) -> Vector {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng);
    const double b = u(rng);
    return Vector{{a, b}};
  };
  sys.escape_radius = 2.0;
  return sys;
}

inline Dataset validation_system(const SimConfig& cfg) {
  return simulate_field_system(validation_field_system(), cfg, 0x56414c49u);
}

// Non-polynomial two-mode fields for d = 1, 2, 3; σ = +1 for the first mode
// and -1 for the second.
//
// d = 1:  f(y) = 1.5 sin(2.5 y + 1.2 σ) - y
// d = 2:  ρ = tanh(2 (1 - |y|²)),
//         f(y) = [ρ y₁ - σ sin(y₂ + y₁/2),  ρ y₂ + σ sin(y₁ - y₂/2)]
// d = 3:  ρ = tanh(2 (1 - y₁² - y₂²)),
//         f(y) = [ρ y₁ - σ y₂,  ρ y₂ + σ y₁,  sin(σ y₁) - y₃]
inline Vector sweep_field(int d, const Vector& y, int mode) {
  const double s = mode == 0 ? 1.0 : -1.0;
  switch (d) {
    case 1: {
      const double phase = 1.2 * s;
      return Vector::Constant(1, 1.5 * std::sin(2.5 * y(0) + phase) - y(0));
    }
    case 2: {
      const double r2 = y.squaredNorm();
      const double radial = std::tanh(2.0 * (1.0 - r2));
      return Vector{{radial * y(0) - s * std::sin(y(1) + 0.5 * y(0)), radial * y(1) + s * std::sin(y(0) - 0.5 * y(1))}};
    }
    case 3: {
      const double r2 = y(0) * y(0) + y(1) * y(1);
      const double radial = std::tanh(2.0 * (1.0 - r2));
      return Vector{{radial * y(0) - s * y(1), radial * y(1) + s * y(0), std::sin(s * y(0)) - y(2)}};
    }
    default:
      throw std::invalid_argument("sweep_field: d must be 1, 2 or 3");
  }
}

inline FieldSystem sweep_field_system(int d) {
  if (d < 1 || d > 3) throw std::invalid_argument("dimension_sweep_systems: d must be 1, 2 or 3");
  FieldSystem sys;
  sys.dim = d;
  sys.init = Vector::Constant(2, 0.5);
  sys.trans = sticky_transitions();
  sys.step = [d](const Vector& y, int mode, double dt) -> Vector { return y + dt * sweep_field(d, y, mode); };
  sys.initial_state = [d](std::mt19937_64& rng) -> Vector {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector y(d);
    for (int i = 0; i < d; ++i) y(i) = u(rng);
    return y;
  };
  sys.escape_radius = 10.0;
  return sys;
}

inline Dataset dimension_sweep_systems(int d, const SimConfig& cfg) {
  return simulate_field_system(sweep_field_system(d), cfg, 0x53570000u + static_cast<std::uint32_t>(d));
}

// Model-based generator: each sequence starts from `initial_state` and is
// sampled from `model`.
inline Dataset simulate_model(const ModelParams& model, const SimConfig& cfg,
                              const std::function<Vector(std::mt19937_64&)>& initial_state, std::uint32_t tag) {
  cfg.validate();
  Dataset out;
  out.layout = model.layout();
  for (int n = 0; n < cfg.n_sequences; ++n) {
    auto rng = sequence_rng(cfg.seed, static_cast<std::uint64_t>(n), tag);
    const Vector y0 = initial_state(rng);
    auto [seq, path] = sample_model(model, cfg, y0, (static_cast<std::uint64_t>(tag) << 32) | static_cast<std::uint64_t>(n));
    out.sequences.push_back(std::move(seq));
    out.paths.push_back(std::move(path));
  }
  return out;
}

inline Vector random_unit_quaternion(std::mt19937_64& rng) {
  for (;;) {
    const Vector v = sample_standard_normal(4, rng);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

// Two modes rotating a single orientation with constant increments
// Exp(0.05 i - 0.02 j + 0.01 k) and Exp(-0.03 i + 0.04 j + 0.02 k); the
// per-component noise standard deviation is cfg.noise_std / 2.5.
inline ModelParams quaternion_system_model(const SimConfig& cfg) {
  const double sd = cfg.noise_std / 2.5;
  const GaussianNoise noise(Matrix::Identity(4, 4) * sd * sd);
  const auto layout = ObservationLayout::single_quaternion();
  std::vector<EmissionDynamics> em;
  em.emplace_back(layout, std::vector<BlockDynamics>{QuaternionDynamics(RotationVector(0.05, -0.02, 0.01), noise)});
  em.emplace_back(layout, std::vector<BlockDynamics>{QuaternionDynamics(RotationVector(-0.03, 0.04, 0.02), noise)});
  return ModelParams(InitialDistribution::uniform(2), TransitionMatrix(sticky_transitions()), std::move(em));
}

inline Dataset quaternion_system(const SimConfig& cfg) {
  return simulate_model(quaternion_system_model(cfg), cfg, random_unit_quaternion, 0x51554154u);
}

// Two-arm pose+gripper system. Per arm and mode: the position relaxes towards
// a mode-specific target (linear dynamics), the orientation turns by a
// mode-specific constant increment, and the gripper angle follows the
// quadratic law θ' = θ + δt g(θ) with g(θ) = 2 - θ - θ² (attracted to 1) or
// g(θ) = θ² - θ - 2 (attracted to -1).
inline ModelParams pose_gripper_system_model(const SimConfig& cfg) {
  const auto layout = ObservationLayout::pose_gripper(2);
  const double dt = cfg.dt;
  const double sd = cfg.noise_std;
  const GaussianNoise pos_noise(Matrix::Identity(3, 3) * sd * sd);
  const GaussianNoise quat_noise(Matrix::Identity(4, 4) * (sd / 2.5) * (sd / 2.5));
  const GaussianNoise grip_noise(Matrix::Identity(1, 1) * sd * sd);
  const Eigen::Vector3d targets[2][2] = {{{0.5, 0.2, -0.3}, {-0.4, 0.1, 0.3}}, {{-0.3, -0.4, 0.2}, {0.3, 0.5, -0.2}}};
  const RotationVector rotations[2][2] = {{{0.04, -0.02, 0.01}, {0.0, 0.03, -0.03}},
                                          {{-0.03, 0.03, 0.0}, {0.02, -0.01, 0.04}}};
  std::vector<EmissionDynamics> em;
  for (int mode = 0; mode < 2; ++mode) {
    const double sign = mode == 0 ? 1.0 : -1.0;
    std::vector<BlockDynamics> parts;
    for (int arm = 0; arm < 2; ++arm) {
      Matrix omega(3, 4);  // [b | A] with x' = x + 2 δt (target - x)
      omega.col(0) = 2.0 * dt * targets[mode][arm];
      omega.rightCols(3) = (1.0 - 2.0 * dt) * Matrix::Identity(3, 3);
      parts.emplace_back(CartesianDynamics(BasisFamily::linear(3), omega, pos_noise));
      parts.emplace_back(QuaternionDynamics(rotations[mode][arm], quat_noise));
      Matrix grip(1, 3);  // [1, θ, θ²]
      grip << sign * 2.0 * dt, 1.0 - dt, -sign * dt;
      parts.emplace_back(CartesianDynamics(BasisFamily::polynomial(1, 2), grip, grip_noise));
    }
    em.emplace_back(layout, std::move(parts));
  }
  return ModelParams(InitialDistribution::uniform(2), TransitionMatrix(sticky_transitions()), std::move(em));
}

inline Dataset pose_gripper_system(const SimConfig& cfg) {
  const auto initial = [](std::mt19937_64& rng) -> Vector {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector y(16);
    for (int arm = 0; arm < 2; ++arm) {
      const int o = arm * 8;
      for (int i = 0; i < 3; ++i) y(o + i) = u(rng);
      y.segment(o + 3, 4) = random_unit_quaternion(rng);
      y(o + 7) = u(rng);
    }
    return y;
  };
  return simulate_model(pose_gripper_system_model(cfg), cfg, initial, 0x504f5345u);
}

}  // namespace nlarhmm
