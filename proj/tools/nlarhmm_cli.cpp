#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlarhmm/nlarhmm.hpp"

namespace {

using namespace nlarhmm;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

Dataset simulate_preset(const std::string& preset, const SimConfig& cfg) {
  if (preset == "validation") return validation_system(cfg);
  if (preset == "sweep-d1") return dimension_sweep_systems(1, cfg);
  if (preset == "sweep-d2") return dimension_sweep_systems(2, cfg);
  if (preset == "sweep-d3") return dimension_sweep_systems(3, cfg);
  if (preset == "quat") return quaternion_system(cfg);
  if (preset == "pose") return pose_gripper_system(cfg);
  throw UsageError("unknown preset '" + preset + "'");
}

Json sim_config_json(const SimConfig& cfg) {
  return {{"seed", cfg.seed},
          {"n_sequences", cfg.n_sequences},
          {"length", cfg.length},
          {"dt", cfg.dt},
          {"noise_std", cfg.noise_std}};
}

std::vector<ObservationSequence> load_sequences(const std::vector<std::string>& files, const ObservationLayout& layout,
                                                const std::string& format, int arms) {
  std::vector<std::string> warnings;
  std::vector<ObservationSequence> out;
  for (const auto& f : files) {
    if (format == "jigsaw") {
      auto seq = ingest_jigsaw(f, arms);
      if (!(seq.layout == layout)) throw DimensionError(f + ": JIGSAW layout does not match the configured layout");
      out.push_back(std::move(seq));
    } else {
      out.push_back(ingest_csv(f, layout, &warnings));
    }
  }
  warn(warnings);
  return out;
}

std::vector<std::string> data_files(const std::string& path) {
  if (std::filesystem::is_directory(path)) return dataset_files(path);
  if (!std::filesystem::exists(path)) throw DataError("'" + path + "' does not exist");
  return {path};
}

int run_simulate(const std::string& preset, const SimConfig& cfg, const std::string& out) {
  const Dataset data = simulate_preset(preset, cfg);
  write_dataset(data, out, {{"preset", preset}, {"config", sim_config_json(cfg)}});
  std::cout << "wrote " << data.sequences.size() << " sequences to " << out << "\n";
  return kExitOk;
}

int run_train(const std::string& config_path, const std::string& data_path, const std::string& out,
              const std::string& trace_path) {
  Json cj;
  try {
    cj = Json::parse(read_text_file(config_path));
  } catch (const Json::parse_error& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(cj);
  } catch (const std::invalid_argument& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  const auto raw = load_sequences(data_files(data_path), cfg.layout, cfg.format, cfg.arms);
  const Standardization st = cfg.standardize ? Standardization::fit(raw) : Standardization::identity(cfg.layout);
  std::vector<ObservationSequence> data;
  data.reserve(raw.size());
  for (const auto& s : raw) data.push_back(st.apply(s));

  ModelSpec spec;
  try {
    spec = cfg.model_spec(data);
  } catch (const std::invalid_argument& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  const EmResult fit = em_fit(data, spec, cfg.em);
  save_model(fit.model.with_standardization(st), out);
  if (!trace_path.empty()) {
    std::string csv = "iter,loglik\n";
    for (std::size_t i = 0; i < fit.trace.size(); ++i) {
      csv += std::to_string(i) + ",";
      detail::write_number(csv, fit.trace[i]);
      csv += "\n";
    }
    write_text_file(trace_path, csv);
  }
  std::cout << "trained " << spec.modes << "-mode model on " << data.size() << " sequences: " << fit.iterations
            << " iterations, log-likelihood " << fit.trace.back() << " (restart " << fit.restart << ")\n";
  return kExitOk;
}

ObservationSequence load_single(const std::string& file, const ObservationLayout& layout, const std::string& format) {
  const int arms = static_cast<int>(layout.size() / 3);
  auto seqs = load_sequences({file}, layout, format, arms);
  return std::move(seqs.front());
}

int run_segment(const std::string& model_path, const std::string& data_path, const std::string& out,
                const std::string& format) {
  const ModelParams model = load_model(model_path);
  ObservationSequence seq = load_single(data_path, model.layout(), format);
  if (model.standardization()) seq = model.standardization()->apply(seq);
  const SegmentationResult res = viterbi(model, seq);
  write_path_csv(res.path, out);
  std::cout << "segmented " << res.path.size() << " steps, log joint " << res.log_joint << "\n";
  return kExitOk;
}

int run_score(const std::string& pred_path, const std::string& truth_path, const std::string& data_path,
              const std::string& model_path, const std::string& layout_path, const std::string& format,
              const std::string& out) {
  const auto pred = read_path_csv(pred_path);
  Json result;
  if (!truth_path.empty()) {
    const auto truth = read_path_csv(truth_path);
    if (truth.size() != pred.size()) throw DataError("score: predicted and true paths differ in length");
    result["seg_score"] = seg_score(pred, truth);
    result["frame_accuracy"] = frame_accuracy(pred, truth);
  } else {
    result["seg_score"] = nullptr;
    result["frame_accuracy"] = nullptr;
  }
  result["silhouette"] = nullptr;
  if (!data_path.empty()) {
    std::optional<ModelParams> model;
    ObservationLayout layout;
    if (!model_path.empty()) {
      model = load_model(model_path);
      layout = model->layout();
    } else if (!layout_path.empty()) {
      layout = layout_from_json(Json::parse(read_text_file(layout_path)));
    } else {
      throw UsageError("score --data needs --model or --layout to interpret the observation columns");
    }
    ObservationSequence seq = load_single(data_path, layout, format);
    const Standardization st = model && model->standardization() ? *model->standardization()
                                                                  : Standardization::fit({seq});
    seq = st.apply(seq);
    if (seq.steps() != static_cast<Eigen::Index>(pred.size())) {
      throw DataError("score: the path has " + std::to_string(pred.size()) + " steps but the data has " +
                      std::to_string(seq.steps()));
    }
    std::vector<int> labels(pred);
    std::sort(labels.begin(), labels.end());
    if (std::unique(labels.begin(), labels.end()) - labels.begin() > 1) {
      result["silhouette"] = silhouette(seq.values.bottomRows(seq.steps()), pred);
    }
  }
  const std::string text = to_json_text(result);
  if (!out.empty()) write_text_file(out, text);
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-linear auto-regressive HMM segmentation toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset with ground-truth modes");
  std::string preset;
  std::string sim_out;
  SimConfig sim_cfg;
  sim->add_option("--preset", preset, "validation, sweep-d1, sweep-d2, sweep-d3, quat or pose")
      ->required()
      ->check(CLI::IsMember({"validation", "sweep-d1", "sweep-d2", "sweep-d3", "quat", "pose"}));
  sim->add_option("--seed", sim_cfg.seed, "Random seed")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--n-sequences", sim_cfg.n_sequences, "Number of sequences");
  sim->add_option("--length", sim_cfg.length, "Emissions per sequence (T)");
  sim->add_option("--dt", sim_cfg.dt, "Integration step");
  sim->add_option("--noise-std", sim_cfg.noise_std, "Observation noise standard deviation");

  auto* train = app.add_subcommand("train", "Fit a model with EM");
  std::string config_path, train_data, train_out, trace_path;
  train->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", train_data, "Dataset directory or single file")->required();
  train->add_option("--out", train_out, "Model JSON output")->required();
  train->add_option("--trace", trace_path, "Per-iteration log-likelihood CSV");

  auto* segment = app.add_subcommand("segment", "Viterbi segmentation of one sequence");
  std::string seg_model, seg_data, seg_out, seg_format = "csv";
  segment->add_option("--model", seg_model, "Model JSON")->required()->check(CLI::ExistingFile);
  segment->add_option("--data", seg_data, "Observation file")->required();
  segment->add_option("--out", seg_out, "Path CSV output")->required();
  segment->add_option("--format", seg_format, "csv or jigsaw")->check(CLI::IsMember({"csv", "jigsaw"}));

  auto* score = app.add_subcommand("score", "Compare segmentations and compute the silhouette index");
  std::string pred_path, truth_path, score_data, score_model, score_layout, score_out, score_format = "csv";
  score->add_option("--pred", pred_path, "Predicted path CSV")->required();
  score->add_option("--truth", truth_path, "Ground-truth path CSV");
  score->add_option("--data", score_data, "Observations for the silhouette index");
  score->add_option("--model", score_model, "Model whose layout and standardization apply to --data");
  score->add_option("--layout", score_layout, "Layout JSON for --data when no model is given");
  score->add_option("--format", score_format, "csv or jigsaw")->check(CLI::IsMember({"csv", "jigsaw"}));
  score->add_option("--out", score_out, "Also write the scores to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return run_simulate(preset, sim_cfg, sim_out);
    if (train->parsed()) return run_train(config_path, train_data, train_out, trace_path);
    if (segment->parsed()) return run_segment(seg_model, seg_data, seg_out, seg_format);
    if (score->parsed()) {
      return run_score(pred_path, truth_path, score_data, score_model, score_layout, score_format, score_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
