// Acceptance report: one PASS/FAIL line per criterion with its runtime.
// Exit status is the number of failed criteria; --report-only always exits 0
// once every criterion has been evaluated.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "test_util.hpp"

using namespace nlarhmm;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates the worst observed error against a bound.
struct Check {
  Outcome& out;
  void that(bool ok, const std::string& what) {
    if (!ok && out.pass) out.detail = what;
    out.pass = out.pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double log_sum(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Random models whose emissions are evaluated on random data.
struct RandomInstance {
  Vector init;
  Matrix trans;
  Matrix log_b;
};

RandomInstance random_instance(int k, std::mt19937_64& rng) {
  const int S = 1 + k % 3, T = 1 + k % 8;
  const BasisFamily basis = k % 2 ? BasisFamily::polynomial(2, 2) : BasisFamily::linear(2);
  const auto model = random_cartesian_model(S, 2, basis, rng);
  const auto seq = random_sequence(2, T, rng);
  return {model.init().weights(), model.trans().probs(), log_emission_matrix(model, seq)};
}

// ---- 1, 2 -------------------------------------------------------------------

Outcome posterior_enumeration() {
  Outcome out;
  Check c{out};
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto inst = random_instance(k, rng);
    if (k % 5 == 0) inst.log_b = 3.0 * randn(inst.log_b.rows(), inst.log_b.cols(), rng);  // sharper posteriors
    const int S = static_cast<int>(inst.init.size()), T = static_cast<int>(inst.log_b.rows());
    std::vector<double> all;
    for_each_path(S, T, [&](const std::vector<int>& z) { all.push_back(path_log_joint(inst.init, inst.trans, inst.log_b, z)); });
    const double Z = log_sum(all);
    Matrix gamma = Matrix::Zero(T, S);
    std::vector<Matrix> xi(static_cast<std::size_t>(std::max(T - 1, 0)), Matrix::Zero(S, S));
    for_each_path(S, T, [&](const std::vector<int>& z) {
      const double p = std::exp(path_log_joint(inst.init, inst.trans, inst.log_b, z) - Z);
      for (int t = 0; t < T; ++t) gamma(t, z[t]) += p;
      for (int t = 0; t + 1 < T; ++t) xi[t](z[t], z[t + 1]) += p;
    });
    const Posterior post = forward_backward(inst.init, inst.trans, inst.log_b);
    worst = std::max(worst, std::abs(post.loglik - Z));
    worst = std::max(worst, (post.gamma - gamma).cwiseAbs().maxCoeff());
    for (int t = 0; t + 1 < T; ++t) worst = std::max(worst, (post.xi[t] - xi[t]).cwiseAbs().maxCoeff());
  }
  c.that(worst <= 1e-10, "");
  out.detail = fmt("max |error| over gamma, xi, loglik = %.2e (bound 1e-10)", worst);
  return out;
}

Outcome viterbi_enumeration() {
  Outcome out;
  Check c{out};
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  int path_mismatch = 0;
  for (int k = 0; k < 50; ++k) {
    const auto inst = random_instance(k, rng);
    const int S = static_cast<int>(inst.init.size()), T = static_cast<int>(inst.log_b.rows());
    double best = kNegInf;
    std::vector<int> arg;
    for_each_path(S, T, [&](const std::vector<int>& z) {
      const double lj = path_log_joint(inst.init, inst.trans, inst.log_b, z);
      if (lj > best) {  // strict: the first maximizer in enumeration order
        best = lj;
        arg = z;
      }
    });
    const auto res = viterbi(inst.init, inst.trans, inst.log_b);
    worst = std::max(worst, std::abs(res.log_joint - best));
    worst = std::max(worst, std::abs(path_log_joint(inst.init, inst.trans, inst.log_b, res.path) - best));
    if (res.path != arg) ++path_mismatch;
  }
  c.that(worst <= 1e-12 && path_mismatch == 0, "");
  out.detail = fmt("max |log joint error| = %.2e (bound 1e-12), path mismatches = %.0f", worst, path_mismatch);
  return out;
}

// ---- 3 ------------------------------------------------------------------------

Outcome em_monotonicity() {
  Outcome out;
  Check c{out};
  double worst_drop = 0.0;
  int iterations = 0;
  for (int k = 0; k < 20; ++k) {
    SimConfig cfg;
    cfg.seed = 2000 + static_cast<std::uint64_t>(k);
    cfg.n_sequences = 10;
    Dataset data;
    switch (k % 4) {
      case 0: data = validation_system(cfg); break;
      case 1: data = dimension_sweep_systems(1, cfg); break;
      case 2: data = dimension_sweep_systems(2, cfg); break;
      default: data = dimension_sweep_systems(3, cfg); break;
    }
    const auto st = Standardization::fit(data.sequences);
    std::vector<ObservationSequence> seqs;
    for (const auto& s : data.sequences) seqs.push_back(st.apply(s));
    const int S = 2 + k % 2;
    const auto spec = ModelSpec::uniform(data.layout, S, [k](int d) {
      if (k % 3 == 0) return BasisFamily::linear(d);
      if (k % 3 == 1) return BasisFamily::polynomial(d, 2);
      return grbf_on_grid(Vector::Constant(d, -2.0), Vector::Constant(d, 2.0), d == 3 ? 3 : 4);
    });
    EmConfig cfg_em;
    cfg_em.tol = 1e-10;
    cfg_em.max_iters = 30;
    const auto res = em_refine(seqs, initial_model(seqs, spec, cfg.seed, 0), cfg_em, spec.mstep);
    for (std::size_t i = 1; i < res.trace.size(); ++i) worst_drop = std::max(worst_drop, res.trace[i - 1] - res.trace[i]);
    iterations += res.iterations;
  }
  c.that(worst_drop <= 1e-8, "");
  out.detail = fmt("largest per-iteration decrease = %.2e (bound 1e-8) over %.0f iterations", worst_drop, iterations);
  return out;
}

// ---- 4, 5 -----------------------------------------------------------------------

Outcome mstep_oracle() {
  Outcome out;
  Check c{out};
  std::mt19937_64 rng(1004);
  double omega_err = 0.0, sigma_err = 0.0, new_omega_gap = kNegInf;
  for (int k = 0; k < 10; ++k) {
    const int d = 1 + k % 3;
    const BasisFamily basis = k % 2 ? BasisFamily::polynomial(d, 2)
                                    : BasisFamily::grbf(randn(5, d, rng), Vector::Constant(5, 1.0 + 0.1 * k));
    std::vector<Matrix> seqs;
    std::vector<Vector> g;
    for (int n = 0; n < 3; ++n) {
      seqs.push_back(randn(31, d, rng));
      Vector w(30);
      for (auto& x : w) x = uniform(rng, 0.0, 1.0);
      g.push_back(w);
    }
    const Matrix old_omega = randn(d, basis.output_len(), rng);
    const CartesianDynamics start(basis, old_omega, GaussianNoise(random_spd(d, rng)));
    const auto next = start.m_step(seqs, g);

    // Oracle Ω: pseudo-inverse of the √γ-weighted stacked design.
    Matrix X(90, basis.output_len()), Y(90, d);
    Matrix scatter_old = Matrix::Zero(d, d), scatter_new = Matrix::Zero(d, d);
    double mass = 0.0;
    for (int n = 0, r = 0; n < 3; ++n) {
      for (int t = 0; t < 30; ++t, ++r) {
        const Vector phi = basis.evaluate(seqs[n].row(t).transpose());
        const Vector y = seqs[n].row(t + 1).transpose();
        X.row(r) = std::sqrt(g[n](t)) * phi.transpose();
        Y.row(r) = std::sqrt(g[n](t)) * y.transpose();
        const Vector e_old = y - old_omega * phi;
        const Vector e_new = y - next.weights() * phi;
        scatter_old += g[n](t) * e_old * e_old.transpose();
        scatter_new += g[n](t) * e_new * e_new.transpose();
        mass += g[n](t);
      }
    }
    const Matrix oracle = (X.completeOrthogonalDecomposition().pseudoInverse() * Y).transpose();
    omega_err = std::max(omega_err, (next.weights() - oracle).cwiseAbs().maxCoeff());
    sigma_err = std::max(sigma_err, (next.noise().covariance() - scatter_old / mass).cwiseAbs().maxCoeff());
    new_omega_gap = std::max(new_omega_gap, (next.noise().covariance() - scatter_new / mass).cwiseAbs().maxCoeff());
  }
  c.that(omega_err <= 1e-8 && sigma_err <= 1e-10 && new_omega_gap > 1e-6, "");
  out.detail = fmt("Omega vs WLS oracle %.2e (1e-8); Sigma vs incoming-Omega average %.2e (1e-10); "
                   "Sigma vs updated-Omega average differs by %.2e",
                   omega_err, sigma_err, new_omega_gap);
  return out;
}

Outcome linear_equivalence() {
  Outcome out;
  Check c{out};
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int S = 2 + k % 2, d = 1 + k % 3;
    const auto layout = ObservationLayout::single_cartesian(d);
    std::vector<Matrix> A, cov;
    std::vector<Vector> b;
    std::vector<EmissionDynamics> em;
    for (int s = 0; s < S; ++s) {
      A.push_back(0.5 * randn(d, d, rng));
      b.push_back(randn(d, rng));
      cov.push_back(random_spd(d, rng));
      Matrix omega(d, d + 1);
      omega << b.back(), A.back();
      em.emplace_back(layout, std::vector<BlockDynamics>{CartesianDynamics(BasisFamily::linear(d), omega, GaussianNoise(cov.back()))});
    }
    const ModelParams model(InitialDistribution(random_simplex(S, rng)), TransitionMatrix(random_stochastic(S, rng)),
                            std::move(em));
    const auto seq = random_sequence(d, 20, rng);
    // y_t = A_s y_{t-1} + b_s + N(0, Σ_s), coded directly.
    Matrix log_b(20, S);
    for (int t = 0; t < 20; ++t) {
      for (int s = 0; s < S; ++s) {
        const Vector r = seq.values.row(t + 1).transpose() - A[s] * seq.values.row(t).transpose() - b[s];
        const Eigen::LLT<Matrix> llt(cov[s]);
        const Matrix L = llt.matrixL();
        const double logdet = 2.0 * L.diagonal().array().log().sum();
        log_b(t, s) = -0.5 * (d * std::log(2.0 * M_PI) + logdet + llt.matrixL().solve(r).squaredNorm());
      }
    }
    const double direct = forward_backward(model.init().weights(), model.trans().probs(), log_b).loglik;
    worst = std::max(worst, std::abs(direct - forward_backward(model, seq).loglik));
  }
  c.that(worst <= 1e-12, "");
  out.detail = fmt("max |loglik difference| = %.2e (bound 1e-12)", worst);
  return out;
}

// ---- 6, 7, 9 ---------------------------------------------------------------------

double held_out_accuracy(const ModelParams& model, const Standardization& st, const Dataset& test) {
  std::vector<int> pred, truth;
  for (std::size_t n = 0; n < test.sequences.size(); ++n) {
    const auto path = viterbi(model, st.apply(test.sequences[n])).path;
    pred.insert(pred.end(), path.begin(), path.end());
    truth.insert(truth.end(), test.paths[n].begin(), test.paths[n].end());
  }
  return frame_accuracy(pred, truth);
}

// Trains on 50 sequences from `seed`, scores on 20 held-out sequences.
double refit_accuracy(const std::function<Dataset(const SimConfig&)>& system, std::uint64_t seed,
                      const std::function<BasisFamily(int)>& basis, int restarts, int n_train = 50) {
  SimConfig train_cfg;
  train_cfg.seed = seed;
  train_cfg.n_sequences = n_train;
  SimConfig test_cfg = train_cfg;
  test_cfg.seed = seed + 1000;
  test_cfg.n_sequences = 20;
  const Dataset train = system(train_cfg), test = system(test_cfg);
  const auto st = Standardization::fit(train.sequences);
  std::vector<ObservationSequence> seqs;
  for (const auto& s : train.sequences) seqs.push_back(st.apply(s));
  ModelSpec spec = ModelSpec::with_defaults(train.layout, 2);
  if (basis) spec = ModelSpec::uniform(train.layout, 2, basis);
  EmConfig cfg;
  cfg.seed = seed;
  cfg.restarts = restarts;
  return held_out_accuracy(em_fit(seqs, spec, cfg).model, st, test);
}

constexpr int kRefitRestarts = 20;

Outcome validation_experiment() {
  Outcome out;
  double lin = 0.0, p2 = 0.0, p2_min = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double a_lin = refit_accuracy(validation_system, seed, [](int d) { return BasisFamily::linear(d); }, kRefitRestarts);
    const double a_p2 = refit_accuracy(validation_system, seed, [](int d) { return BasisFamily::polynomial(d, 2); }, kRefitRestarts);
    lin += a_lin / 10;
    p2 += a_p2 / 10;
    p2_min = std::min(p2_min, a_p2);
  }
  const bool threshold = p2_min >= 0.90;
  const bool beats = p2 > lin;
  out.pass = threshold && beats;
  out.detail = "poly-k2 accuracy min " + fmt("%.3f", p2_min) + (threshold ? " (>= 0.90 ok)" : " (< 0.90)") + ", mean " +
               fmt("%.4f", p2) + " vs linear mean " + fmt("%.4f", lin) + (beats ? " (greater)" : " (not greater)");
  return out;
}

Outcome dimension_sweep() {
  Outcome out;
  constexpr int kSeeds = 5;
  std::string detail;
  bool ok = true;
  for (int d : {1, 3}) {
    const auto system = [d](const SimConfig& c) { return dimension_sweep_systems(d, c); };
    double lin = 0.0, p2 = 0.0, p3 = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      lin += refit_accuracy(system, seed, [](int k) { return BasisFamily::linear(k); }, kRefitRestarts) / kSeeds;
      p2 += refit_accuracy(system, seed, [](int k) { return BasisFamily::polynomial(k, 2); }, kRefitRestarts) / kSeeds;
      p3 += refit_accuracy(system, seed, [](int k) { return BasisFamily::polynomial(k, 3); }, kRefitRestarts) / kSeeds;
    }
    const double g2 = p2 - lin, g3 = p3 - lin;
    if (d == 1) {
      ok = ok && g2 >= 0.1 && g3 >= 0.1;
    } else {
      ok = ok && std::abs(g2) < 0.05 && std::abs(g3) < 0.05;
    }
    detail += fmt("d=%.0f: linear %.3f, poly-k2 %.3f, poly-k3 %.3f; ", d, lin, p2, p3);
  }
  out.pass = ok;
  out.detail = detail + "need d=1 gaps >= 0.1, d=3 |gaps| < 0.05";
  return out;
}

Outcome quaternion_checks() {
  Outcome out;
  Check c{out};
  double exp_err = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double theta = 10.0 * M_PI * i / 20000.0;
    for (const auto& axis : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0.6, -0.8, 0), Eigen::Vector3d(1, 2, 3).normalized()}) {
      exp_err = std::max(exp_err, std::abs(quat_exp(theta * axis(0), theta * axis(1), theta * axis(2)).vec().norm() - 1.0));
    }
  }
  for (double tiny : {0.0, 1e-300, 1e-12, 1e-9, 9.99e-9}) {
    exp_err = std::max(exp_err, std::abs(quat_exp(tiny, -tiny, tiny).vec().norm() - 1.0));
  }
  std::mt19937_64 rng(1008);
  double mul_err = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto p = UnitQuaternion::normalized(randn(4, rng)), q = UnitQuaternion::normalized(randn(4, rng));
    mul_err = std::max(mul_err, std::abs(quat_mul(p, q).vec().norm() - 1.0));
  }

  double grad_err = 0.0;
  bool monotone = true;
  for (int k = 0; k < 20; ++k) {
    Matrix rows(40, 4);
    for (int t = 0; t < 40; ++t) rows.row(t) = randn(4, rng).normalized().transpose();
    Vector w(39);
    for (auto& x : w) x = uniform(rng);
    const RotationObjective J({QuaternionDynamics::identity().prepare(rows)}, {w}, GaussianNoise(0.2 * random_spd(4, rng)));
    const RotationVector r = (k % 4 == 0 ? 1e-7 : 1.0) * randn(3, rng);
    const RotationVector grad = J.gradient(r);
    RotationVector fd;
    for (int i = 0; i < 3; ++i) {
      RotationVector a = r, b = r;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      fd(i) = (J.value(a) - J.value(b)) / 2e-6;
    }
    grad_err = std::max(grad_err, (grad - fd).norm() / std::max(fd.norm(), 1e-3));
    const auto [x, report] = minimize_rotation(J, randn(3, rng), OptimizerConfig{});
    monotone = monotone && report.final_objective <= report.initial_objective;
  }

  const RotationVector truth(0.05, -0.02, 0.01);
  const QuaternionDynamics gen(truth, GaussianNoise::identity(4));
  std::vector<Matrix> seqs;
  std::vector<Vector> g;
  for (int n = 0; n < 4; ++n) {
    Matrix rows(26, 4);
    UnitQuaternion q = UnitQuaternion::normalized(randn(4, rng));
    rows.row(0) = q.vec().transpose();
    for (int t = 1; t <= 25; ++t) {
      q = gen.predict(q);
      rows.row(t) = q.vec().transpose();
    }
    seqs.push_back(rows);
    g.push_back(Vector::Ones(25));
  }
  const double rec_err = (QuaternionDynamics::identity().m_step(seqs, g).rotvec() - truth).cwiseAbs().maxCoeff();

  c.that(exp_err <= 1e-12 && mul_err <= 1e-12 && grad_err < 1e-5 && rec_err <= 1e-6 && monotone, "");
  out.detail = fmt("|exp|-1 %.1e, |p*q|-1 %.1e, gradient rel. error %.1e, rotvec recovery %.1e", exp_err, mul_err,
                   grad_err, rec_err) +
               (monotone ? ", objective never increased" : ", objective INCREASED");
  return out;
}

Outcome composite_checks() {
  Outcome out;
  std::mt19937_64 rng(1009);
  SimConfig cfg;
  cfg.n_sequences = 3;
  const auto model = pose_gripper_system_model(cfg);
  const auto data = pose_gripper_system(cfg);
  double worst = 0.0;
  for (const auto& seq : data.sequences) {
    for (int s = 0; s < model.num_modes(); ++s) {
      const auto& em = model.emission(s);
      const double joint = em.log_emissions(em.prepare(seq)).sum();
      double separate = 0.0;
      for (std::size_t i = 0; i < em.parts().size(); ++i) {
        const Matrix rows = seq.block(i);
        if (const auto* q = std::get_if<QuaternionDynamics>(&em.parts()[i])) {
          separate += q->log_emissions(q->prepare(rows)).sum();
        } else {
          const auto& cd = std::get<CartesianDynamics>(em.parts()[i]);
          separate += cd.log_emissions(cd.prepare(rows)).sum();
        }
      }
      worst = std::max(worst, std::abs(joint - separate));
    }
  }
  (void)rng;
  const double acc = refit_accuracy(pose_gripper_system, 0, nullptr, 5, 20);
  out.pass = worst <= 1e-10 && acc >= 0.85;
  out.detail = fmt("|joint - sum of 6 blocks| = %.2e (1e-10); held-out accuracy %.3f (>= 0.85)", worst, acc);
  return out;
}

// ---- 10, 11 -----------------------------------------------------------------------

Outcome metric_checks() {
  Outcome out;
  const bool example = std::abs(seg_score({0, 1, 1, 1}, {0, 0, 1, 1}) - 7.0 / 12.0) < 1e-15;
  std::mt19937_64 rng(1010);
  double relabel_err = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int S = 2 + k % 4;
    std::uniform_int_distribution<int> u(0, S - 1);
    std::vector<int> a(50), b(50);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    std::vector<int> perm(static_cast<std::size_t>(S));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto pa = a, pb = b;
    for (auto& x : pa) x = perm[static_cast<std::size_t>(x)];
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& x : pb) x = perm[static_cast<std::size_t>(x)];
    const double base = seg_score(a, b);
    relabel_err = std::max({relabel_err, std::abs(seg_score(pa, b) - base), std::abs(seg_score(a, pb) - base)});
  }
  double sil_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int n = 30;
    const Matrix X = randn(n, 3, rng);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < 3 ? i : static_cast<int>(uniform(rng, 0, 3));
    double direct = 0.0;
    for (int i = 0; i < n; ++i) {
      std::map<int, std::pair<double, int>> per;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        auto& e = per[labels[static_cast<std::size_t>(j)]];
        e.first += (X.row(i) - X.row(j)).norm();
        e.second += 1;
      }
      const int own = labels[static_cast<std::size_t>(i)];
      if (!per.count(own)) continue;
      const double a = per[own].first / per[own].second;
      double b = std::numeric_limits<double>::infinity();
      for (const auto& [l, e] : per) {
        if (l != own) b = std::min(b, e.first / e.second);
      }
      direct += (b - a) / std::max(a, b);
    }
    sil_err = std::max(sil_err, std::abs(silhouette(X, labels) - direct / n));
  }
  out.pass = example && relabel_err == 0.0 && sil_err <= 1e-10;
  out.detail = std::string(example ? "7/12 example exact" : "7/12 example WRONG") +
               fmt(", relabeling error %.1e over 100 cases, silhouette vs direct %.1e (1e-10)", relabel_err, sil_err);
  return out;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_text_file(e.path().string());
  return files;
}

Outcome reproducibility() {
  Outcome out;
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("nlarhmm_accept_" + std::to_string(rd()));
  SimConfig cfg;
  cfg.seed = 42;
  cfg.n_sequences = 5;
  const std::vector<std::pair<std::string, std::function<Dataset(const SimConfig&)>>> presets = {
      {"validation", validation_system},
      {"sweep-d1", [](const SimConfig& c) { return dimension_sweep_systems(1, c); }},
      {"sweep-d2", [](const SimConfig& c) { return dimension_sweep_systems(2, c); }},
      {"sweep-d3", [](const SimConfig& c) { return dimension_sweep_systems(3, c); }},
      {"quat", quaternion_system},
      {"pose", pose_gripper_system}};
  int identical = 0;
  for (const auto& [name, make] : presets) {
    write_dataset(make(cfg), (root / (name + "_a")).string(), {{"preset", name}});
    write_dataset(make(cfg), (root / (name + "_b")).string(), {{"preset", name}});
    identical += read_tree(root / (name + "_a")) == read_tree(root / (name + "_b"));
  }

  // Model JSON: a trained composite model (with its standardization).
  const Dataset data = pose_gripper_system(cfg);
  const auto st = Standardization::fit(data.sequences);
  std::vector<ObservationSequence> seqs;
  for (const auto& s : data.sequences) seqs.push_back(st.apply(s));
  EmConfig em;
  em.restarts = 1;
  em.max_iters = 5;
  const auto model = em_fit(seqs, ModelSpec::with_defaults(data.layout, 2), em).model.with_standardization(st);
  const fs::path file = root / "model.json";
  save_model(model, file.string());
  const std::string first = read_text_file(file.string());
  save_model(load_model(file.string()), (root / "model2.json").string());
  const bool json_ok = first == read_text_file((root / "model2.json").string());
  fs::remove_all(root);

  out.pass = identical == static_cast<int>(presets.size()) && json_ok;
  out.detail = fmt("%.0f/%.0f presets byte-identical across runs; model JSON round trip ", identical,
                   static_cast<double>(presets.size())) +
               (json_ok ? "byte-identical" : "DIFFERS");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const bool report_only = argc > 1 && std::strcmp(argv[1], "--report-only") == 0;
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "posterior vs enumeration", 5, posterior_enumeration},
      {2, "viterbi vs enumeration", 5, viterbi_enumeration},
      {3, "EM monotonicity", 60, em_monotonicity},
      {4, "M-step oracle", 1e9, mstep_oracle},
      {5, "linear-basis equivalence", 1e9, linear_equivalence},
      {6, "validation experiment", 180, validation_experiment},
      {7, "dimension sweep", 300, dimension_sweep},
      {8, "quaternion checks", 10, quaternion_checks},
      {9, "composite factorization + refit", 120, composite_checks},
      {10, "metrics", 1e9, metric_checks},
      {11, "reproducibility", 1e9, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string budget = c.budget_s < 1e8 ? fmt(" (budget %.0f s)", c.budget_s) : "";
    std::printf("%s %2d %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                budget.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return report_only ? 0 : failed;
}
