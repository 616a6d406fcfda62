#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlarhmm/model.hpp"

namespace nlarhmm {

struct Posterior {
  Matrix gamma;             // T × S, γ_s(t) for the modes z_1..z_T
  std::vector<Matrix> xi;   // T-1 matrices, ξ(t)_ij = Pr(z_t = i, z_{t+1} = j | Y)
  double loglik = 0.0;      // log p(y_1..y_T | y_0, Θ)
};

struct SegmentationResult {
  std::vector<int> path;  // z_1..z_T
  double log_joint = 0.0;
};

// log p(y_{t+1} | z_{t+1} = s, y_t) for every transition and mode, T × S.
inline Matrix log_emission_matrix(const ModelParams& model, const PreparedSequence& seq) {
  Matrix out;
  for (int s = 0; s < model.num_modes(); ++s) {
    const Vector col = model.emission(s).log_emissions(seq);
    if (s == 0) out.resize(col.size(), model.num_modes());
    out.col(s) = col;
  }
  return out;
}

inline Matrix log_emission_matrix(const ModelParams& model, const ObservationSequence& seq) {
  if (!(seq.layout == model.layout())) throw DimensionError("sequence layout does not match the model");
  return log_emission_matrix(model, model.prepare(seq));
}

// Scaled forward-backward on precomputed log-emissions. Each step's
// emissions are shifted by their maximum before exponentiation and the
// forward messages are renormalized; the log-likelihood collects the shifts
// and normalizers.
inline Posterior forward_backward(const Vector& init, const Matrix& trans, const Matrix& log_b) {
  const Eigen::Index T = log_b.rows();
  const Eigen::Index S = log_b.cols();
  if (T < 1) throw DataError("forward_backward: need at least one emission");
  require_same_size(init.size(), S, "forward_backward");
  require_same_size(trans.rows(), S, "forward_backward");

  Matrix b(T, S);  // exp(log_b - row max)
  Vector shift(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double m = log_b.row(t).maxCoeff();
    if (std::isnan(m)) throw NumericalError("forward_backward: NaN emission log-density at t=" + std::to_string(t + 1));
    if (!std::isfinite(m)) {
      throw ProbabilityUnderflow("forward_backward: every mode has zero emission density at t=" + std::to_string(t + 1));
    }
    shift(t) = m;
    b.row(t) = (log_b.row(t).array() - m).unaryExpr([](double x) { return std::exp(x); });
  }

  Matrix alpha(T, S);
  Vector scale(T);
  Posterior post;
  post.loglik = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t == 0) {
      alpha.row(0) = init.transpose().array() * b.row(0).array();
    } else {
      alpha.row(t) = (alpha.row(t - 1) * trans).array() * b.row(t).array();
    }
    const double c = alpha.row(t).sum();
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw ProbabilityUnderflow("forward_backward: total probability underflow at t=" + std::to_string(t + 1));
    }
    alpha.row(t) /= c;
    scale(t) = c;
    post.loglik += std::log(c) + shift(t);
  }

  Matrix beta(T, S);
  beta.row(T - 1).setOnes();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const Vector next = (b.row(t + 1).array() * beta.row(t + 1).array()).matrix().transpose();
    beta.row(t) = (trans * next).transpose() / scale(t + 1);
  }

  post.gamma = alpha.array() * beta.array();
  for (Eigen::Index t = 0; t < T; ++t) post.gamma.row(t) /= post.gamma.row(t).sum();

  post.xi.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(T - 1, 0)));
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Vector right = (b.row(t + 1).array() * beta.row(t + 1).array()).matrix().transpose();
    Matrix x = (alpha.row(t).transpose() * right.transpose()).cwiseProduct(trans);
    x /= x.sum();
    post.xi.push_back(std::move(x));
  }
  return post;
}

inline Posterior forward_backward(const ModelParams& model, const PreparedSequence& seq) {
  return forward_backward(model.init().weights(), model.trans().probs(), log_emission_matrix(model, seq));
}

inline Posterior forward_backward(const ModelParams& model, const ObservationSequence& seq) {
  return forward_backward(model.init().weights(), model.trans().probs(), log_emission_matrix(model, seq));
}

// Max-product recursion in log space. Ties go to the lower mode index both in
// the back-pointers and in the final state.
inline SegmentationResult viterbi(const Vector& init, const Matrix& trans, const Matrix& log_b) {
  const Eigen::Index T = log_b.rows();
  const Eigen::Index S = log_b.cols();
  if (T < 1) throw DataError("viterbi: need at least one emission");
  require_same_size(init.size(), S, "viterbi");
  require_same_size(trans.rows(), S, "viterbi");
  if (log_b.hasNaN()) throw NumericalError("viterbi: NaN emission log-density");

  const Vector log_pi = init.unaryExpr([](double p) { return safe_log(p); });
  const Matrix log_t = trans.unaryExpr([](double p) { return safe_log(p); });

  Matrix delta(T, S);
  Eigen::MatrixXi back(T, S);
  delta.row(0) = log_pi.transpose() + log_b.row(0);
  back.row(0).setZero();
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < S; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index i = 0; i < S; ++i) {
        const double v = delta(t - 1, i) + log_t(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta(t, j) = best + log_b(t, j);
      back(t, j) = arg;
    }
  }

  SegmentationResult out;
  out.path.resize(static_cast<std::size_t>(T));
  double best = kNegInf;
  int arg = 0;
  for (Eigen::Index j = 0; j < S; ++j) {
    if (delta(T - 1, j) > best) {
      best = delta(T - 1, j);
      arg = static_cast<int>(j);
    }
  }
  if (!std::isfinite(best)) throw ProbabilityUnderflow("viterbi: every mode path has zero probability");
  out.log_joint = best;
  out.path[static_cast<std::size_t>(T - 1)] = arg;
  for (Eigen::Index t = T - 1; t > 0; --t) {
    out.path[static_cast<std::size_t>(t - 1)] = back(t, out.path[static_cast<std::size_t>(t)]);
  }
  return out;
}

inline SegmentationResult viterbi(const ModelParams& model, const ObservationSequence& seq) {
  return viterbi(model.init().weights(), model.trans().probs(), log_emission_matrix(model, seq));
}

struct EmConfig {
  double tol = 1e-5;  // relative change of the total log-likelihood
  int max_iters = 100;
  std::uint64_t seed = 0;
  int restarts = 5;
  int max_rescues = 3;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("EmConfig: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("EmConfig: max_iters must be >= 1");
    if (restarts < 1) throw std::invalid_argument("EmConfig: restarts must be >= 1");
  }
};

struct EmResult {
  ModelParams model;
  std::vector<double> trace;  // total log-likelihood before the first M-step, then after each iteration
  int iterations = 0;
  int rescues = 0;
  int restart = 0;  // index of the winning restart
};

namespace detail {

inline std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x6e6c6172u};
  return std::mt19937_64(seq);
}

struct TrainingSet {
  std::vector<PreparedSequence> prepared;
  std::vector<Eigen::Index> steps;
};

inline TrainingSet prepare_all(const EmissionDynamics& shape, const std::vector<ObservationSequence>& data) {
  TrainingSet set;
  for (const auto& seq : data) {
    set.prepared.push_back(shape.prepare(seq));
    set.steps.push_back(seq.steps());
  }
  return set;
}

inline std::vector<Vector> mode_column(const std::vector<Matrix>& gammas, int s) {
  std::vector<Vector> out;
  out.reserve(gammas.size());
  for (const auto& g : gammas) out.push_back(g.col(s));
  return out;
}

// Refits a starved mode on a random window of the data (responsibility 1
// inside the window, 0 elsewhere). The M-step is applied twice so that Σ
// reflects the refitted dynamics.
inline EmissionDynamics rescue_mode(const EmissionDynamics& current, const TrainingSet& set, const MStepOptions& opts,
                                    std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, set.prepared.size() - 1);
  const std::size_t n = pick(rng);
  const Eigen::Index T = set.steps[n];
  const Eigen::Index window = std::min<Eigen::Index>(T, std::max<Eigen::Index>(20, T / 5));
  std::uniform_int_distribution<Eigen::Index> start_dist(0, T - window);
  const Eigen::Index start = start_dist(rng);
  std::vector<Vector> gammas;
  for (std::size_t m = 0; m < set.prepared.size(); ++m) gammas.push_back(Vector::Zero(set.steps[m]));
  gammas[n].segment(start, window).setOnes();
  EmissionDynamics fitted = current.m_step(set.prepared, gammas, opts);
  return fitted.m_step(set.prepared, gammas, opts);
}

}  // namespace detail

// Runs EM from `start` until the relative change of the total log-likelihood
// drops below cfg.tol or cfg.max_iters iterations have run. One iteration is an
// M-step followed by the E-step that scores it.
inline EmResult em_refine(const std::vector<ObservationSequence>& data, const ModelParams& start, const EmConfig& cfg,
                          const MStepOptions& mstep = {}, int restart_index = 0) {
  cfg.validate();
  if (data.empty()) throw DataError("em: no training sequences");
  for (const auto& seq : data) {
    if (!(seq.layout == start.layout())) throw DimensionError("em: sequence layout does not match the model");
  }
  const auto set = detail::prepare_all(start.emission(0), data);
  const int S = start.num_modes();
  auto rng = detail::restart_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull, restart_index);

  ModelParams model = start;
  auto e_step = [&](const ModelParams& m, std::vector<Posterior>& posts) {
    posts.clear();
    double total = 0.0;
    for (const auto& p : set.prepared) {
      posts.push_back(forward_backward(m, p));
      total += posts.back().loglik;
    }
    return total;
  };

  std::vector<Posterior> posts;
  double ll = e_step(model, posts);
  EmResult result{model, {ll}, 0, 0, restart_index};

  for (int it = 1; it <= cfg.max_iters; ++it) {
    Vector pi_counts = Vector::Zero(S);
    Matrix trans_counts = Matrix::Zero(S, S);
    std::vector<Matrix> gammas;
    gammas.reserve(posts.size());
    for (const auto& p : posts) {
      pi_counts += p.gamma.row(0).transpose();
      for (const auto& x : p.xi) trans_counts += x;
      gammas.push_back(p.gamma);
    }

    std::vector<EmissionDynamics> emissions;
    emissions.reserve(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
      try {
        emissions.push_back(model.emission(s).m_step(set.prepared, detail::mode_column(gammas, s), mstep));
      } catch (const InsufficientData&) {
        if (++result.rescues > cfg.max_rescues) {
          throw InsufficientData("em: mode " + std::to_string(s) + " starved of data after " +
                                 std::to_string(cfg.max_rescues) + " rescues");
        }
        emissions.push_back(detail::rescue_mode(model.emission(s), set, mstep, rng));
      }
    }
    model = ModelParams(InitialDistribution::from_counts(pi_counts), TransitionMatrix::from_counts(trans_counts),
                        std::move(emissions), start.standardization());

    const double next = e_step(model, posts);
    result.trace.push_back(next);
    result.iterations = it;
    result.model = model;
    const double rel = std::abs(next - ll) / (std::abs(ll) + 1e-12);
    ll = next;
    if (rel < cfg.tol) break;
  }
  return result;
}

// Initial model for one restart: each sequence is cut into S contiguous chunks
// of (nearly) equal length, the chunks receive a random permutation of the
// mode labels, and the emissions are fitted to that hard assignment. The
// initial distribution is uniform and the transition matrix sticky.
inline ModelParams initial_model(const std::vector<ObservationSequence>& data, const ModelSpec& spec,
                                 std::uint64_t seed, int restart) {
  spec.validate();
  if (data.empty()) throw DataError("em: no training sequences");
  const int S = spec.modes;
  auto rng = detail::restart_rng(seed, restart);
  const EmissionDynamics zero = spec.zero_emission();
  const auto set = detail::prepare_all(zero, data);

  std::vector<Matrix> gammas;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Eigen::Index T = set.steps[n];
    std::vector<int> labels(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) labels[static_cast<std::size_t>(s)] = s;
    std::shuffle(labels.begin(), labels.end(), rng);
    Matrix g = Matrix::Zero(T, S);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto chunk = static_cast<std::size_t>(std::min<Eigen::Index>(S - 1, t * S / T));
      g(t, labels[chunk]) = 1.0;
    }
    gammas.push_back(std::move(g));
  }

  std::vector<EmissionDynamics> emissions;
  for (int s = 0; s < S; ++s) {
    const auto g = detail::mode_column(gammas, s);
    EmissionDynamics e = zero;
    try {
      e = zero.m_step(set.prepared, g, spec.mstep);
      e = e.m_step(set.prepared, g, spec.mstep);
    } catch (const InsufficientData&) {
      e = detail::rescue_mode(zero, set, spec.mstep, rng);
    }
    emissions.push_back(std::move(e));
  }
  return ModelParams(InitialDistribution::uniform(S), TransitionMatrix::sticky(S, S > 1 ? 0.9 : 1.0),
                     std::move(emissions));
}

// Multi-restart EM; the restart with the highest final log-likelihood wins.
inline EmResult em_fit(const std::vector<ObservationSequence>& data, const ModelSpec& spec, const EmConfig& cfg) {
  cfg.validate();
  std::optional<EmResult> best;
  std::string last_error;
  for (int r = 0; r < cfg.restarts; ++r) {
    try {
      EmResult res = em_refine(data, initial_model(data, spec, cfg.seed, r), cfg, spec.mstep, r);
      if (!best || res.trace.back() > best->trace.back()) best = std::move(res);
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw NumericalError("em: every restart failed: " + last_error);
  return std::move(*best);
}

}  // namespace nlarhmm
