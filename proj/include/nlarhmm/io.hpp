#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlarhmm/layout.hpp"
#include "nlarhmm/quaternion.hpp"
#include "nlarhmm/serialization.hpp"

namespace nlarhmm {

inline constexpr double kQuaternionNormWarning = 1e-3;
// Deviations below this are rounding noise and are left untouched, so that
// written sequences read back bit-identically.
inline constexpr double kQuaternionNormExact = 1e-14;
inline constexpr double kOrthonormalityTol = 1e-2;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Rows and columns in messages are 1-based; the header is row 1 of a CSV.
inline std::string location(const std::string& path, std::size_t row, std::size_t col) {
  return path + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

inline double parse_double(std::string_view cell, const std::string& path, std::size_t row, std::size_t col) {
  double x = 0.0;
  const char* end = cell.data() + cell.size();
  const auto res = std::from_chars(cell.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError(location(path, row, col) + ": malformed number '" + std::string(cell) + "'");
  }
  if (!std::isfinite(x)) throw DataError(location(path, row, col) + ": non-finite value '" + std::string(cell) + "'");
  return x;
}

// Shortest text that reads back to the same double.
inline void append_number(std::string& out, double x) {
  if (!std::isfinite(x)) throw DataError("csv: cannot write a non-finite value");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// Renormalizes every quaternion block row and makes each block
// sign-continuous. Returns the largest norm deviation seen.
inline double condition_quaternions(const ObservationLayout& layout, Matrix& values) {
  double worst = 0.0;
  for (const auto& b : layout.blocks()) {
    if (b.kind != BlockKind::Quaternion) continue;
    auto q = values.middleCols(b.offset, 4);
    for (Eigen::Index t = 0; t < q.rows(); ++t) {
      const double n = q.row(t).norm();
      if (!(n > 0.0)) throw DataError("quaternion block '" + b.name + "' has a zero row at index " + std::to_string(t));
      worst = std::max(worst, std::abs(n - 1.0));
      if (std::abs(n - 1.0) > kQuaternionNormExact) q.row(t) /= n;
    }
    sign_continuize(q);
  }
  return worst;
}

// ---- observation CSV -------------------------------------------------------

inline std::string sequence_to_csv(const ObservationSequence& seq) {
  std::string out;
  const auto names = seq.layout.channel_names();
  for (std::size_t i = 0; i < names.size(); ++i) out += (i > 0 ? "," : "") + names[i];
  out += "\n";
  for (Eigen::Index t = 0; t < seq.values.rows(); ++t) {
    for (Eigen::Index c = 0; c < seq.values.cols(); ++c) {
      if (c > 0) out += ",";
      detail::append_number(out, seq.values(t, c));
    }
    out += "\n";
  }
  return out;
}

inline void write_sequence_csv(const ObservationSequence& seq, const std::string& path) {
  write_text_file(path, sequence_to_csv(seq));
}

// Reads one sequence whose header must list the layout's channel names.
// Quaternion blocks are renormalized (with a warning when a norm deviates by
// more than 1e-3) and sign-continuized.
inline ObservationSequence ingest_csv(const std::string& path, const ObservationLayout& layout,
                                      std::vector<std::string>* warnings = nullptr) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty file");
  const auto header = detail::split(lines[0], ',');
  const auto expected = layout.channel_names();
  bool match = header.size() == expected.size();
  for (std::size_t i = 0; match && i < header.size(); ++i) match = header[i] == expected[i];
  if (!match) {
    std::string want;
    for (const auto& n : expected) want += (want.empty() ? "" : ",") + n;
    throw DimensionError(path + ": header does not match the layout (expected '" + want + "')");
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (detail::trim(lines[r]).empty()) continue;
    const auto cells = detail::split(lines[r], ',');
    if (cells.size() != expected.size()) {
      throw DataError(path + ": row " + std::to_string(r + 1) + ": expected " + std::to_string(expected.size()) +
                      " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) row.push_back(detail::parse_double(cells[c], path, r + 1, c + 1));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw DataError(path + ": need at least two observation rows");
  Matrix values(static_cast<Eigen::Index>(rows.size()), layout.width());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  const double worst = condition_quaternions(layout, values);
  if (worst > kQuaternionNormWarning && warnings != nullptr) {
    warnings->push_back(path + ": quaternion norms deviate from 1 by up to " + std::to_string(worst) +
                        "; renormalized");
  }
  return {layout, std::move(values)};
}

inline std::vector<ObservationSequence> ingest_csv(const std::vector<std::string>& paths, const ObservationLayout& layout,
                                                   std::vector<std::string>* warnings = nullptr) {
  std::vector<ObservationSequence> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(ingest_csv(p, layout, warnings));
  return out;
}

// ---- JIGSAWS kinematics ------------------------------------------------------

inline constexpr int kJigsawColumnsPerArm = 19;

// Whitespace-separated kinematics table. Per arm: position (3), rotation
// matrix (9, row-major), linear velocity (3), angular velocity (3), gripper
// angle (1). Files with the full 76 columns hold the two master arms first;
// the patient-side arms start at column 38.
inline ObservationSequence ingest_jigsaw(const std::string& path, int arms = 2) {
  if (arms < 1) throw std::invalid_argument("ingest_jigsaw: need at least one arm");
  const auto layout = ObservationLayout::pose_gripper(arms);
  const auto lines = detail::read_lines(path);
  std::vector<Vector> rows;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto cells = detail::split_whitespace(lines[r]);
    if (cells.empty()) continue;
    const std::size_t need = static_cast<std::size_t>(kJigsawColumnsPerArm * arms);
    if (cells.size() < need) {
      throw DataError(path + ": row " + std::to_string(r + 1) + ": expected at least " + std::to_string(need) +
                      " columns, found " + std::to_string(cells.size()));
    }
    const std::size_t offset = cells.size() >= 4 * kJigsawColumnsPerArm ? 2 * kJigsawColumnsPerArm : 0;
    auto cell = [&](std::size_t c) { return detail::parse_double(cells[offset + c], path, r + 1, offset + c + 1); };
    Vector y(layout.width());
    for (int h = 0; h < arms; ++h) {
      const std::size_t base = static_cast<std::size_t>(h * kJigsawColumnsPerArm);
      const int o = 8 * h;
      for (int i = 0; i < 3; ++i) y(o + i) = cell(base + static_cast<std::size_t>(i));
      Matrix3 R;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) R(i, j) = cell(base + 3 + static_cast<std::size_t>(3 * i + j));
      }
      const double err = (R.transpose() * R - Matrix3::Identity()).cwiseAbs().maxCoeff();
      if (err > kOrthonormalityTol) {
        throw DataError(path + ": row " + std::to_string(r + 1) + ": rotation matrix of arm " + std::to_string(h + 1) +
                        " is not orthonormal (|RᵀR - I|∞ = " + std::to_string(err) + ")");
      }
      y.segment(o + 3, 4) = from_rotation_matrix(R).vec();
      y(o + 7) = cell(base + 18);
    }
    rows.push_back(std::move(y));
  }
  if (rows.size() < 2) throw DataError(path + ": need at least two kinematics rows");
  Matrix values(static_cast<Eigen::Index>(rows.size()), layout.width());
  for (std::size_t r = 0; r < rows.size(); ++r) values.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  condition_quaternions(layout, values);
  return {layout, std::move(values)};
}

// ---- mode paths ----------------------------------------------------------------

// Header "t,mode"; t runs over 1..T (y_0 carries no mode).
inline std::string path_to_csv(const std::vector<int>& path) {
  std::string out = "t,mode\n";
  for (std::size_t t = 0; t < path.size(); ++t) out += std::to_string(t + 1) + "," + std::to_string(path[t]) + "\n";
  return out;
}

inline void write_path_csv(const std::vector<int>& path, const std::string& file) {
  write_text_file(file, path_to_csv(path));
}

inline std::vector<int> read_path_csv(const std::string& file) {
  const auto lines = detail::read_lines(file);
  if (lines.empty()) throw DataError(file + ": empty file");
  const auto header = detail::split(lines[0], ',');
  if (header.size() != 2 || header[0] != "t" || header[1] != "mode") {
    throw DataError(file + ": expected header 't,mode'");
  }
  std::vector<int> path;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (detail::trim(lines[r]).empty()) continue;
    const auto cells = detail::split(lines[r], ',');
    if (cells.size() != 2) throw DataError(file + ": row " + std::to_string(r + 1) + ": expected 2 columns");
    int mode = 0;
    const auto cell = cells[1];
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), mode);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || mode < 0) {
      throw DataError(detail::location(file, r + 1, 2) + ": invalid mode '" + std::string(cell) + "'");
    }
    path.push_back(mode);
  }
  if (path.empty()) throw DataError(file + ": no rows");
  return path;
}

// ---- datasets on disk -----------------------------------------------------------

// Observation CSVs of a dataset directory: the files listed in manifest.json
// when present, otherwise every *.csv not named truth_*.
inline std::vector<std::string> dataset_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory");
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::vector<std::string> files;
  if (fs::exists(manifest)) {
    Json j;
    try {
      j = Json::parse(read_text_file(manifest.string()));
    } catch (const Json::parse_error& e) {
      throw DataError(manifest.string() + ": " + e.what());
    }
    for (const auto& f : require_key(j, "sequences")) files.push_back((fs::path(dir) / f.get<std::string>()).string());
    return files;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() == ".csv" && name.rfind("truth_", 0) != 0) files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("'" + dir + "' contains no observation CSV files");
  return files;
}

// Writes seq_NNN.csv and truth_NNN.csv per sequence plus manifest.json,
// which records `info` alongside the file lists and the layout.
template <typename DatasetT>
void write_dataset(const DatasetT& data, const std::string& dir, Json info) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  Json seqs = Json::array();
  Json truths = Json::array();
  for (std::size_t n = 0; n < data.sequences.size(); ++n) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%03zu.csv", n);
    const std::string seq_name = std::string("seq_") + stem;
    const std::string truth_name = std::string("truth_") + stem;
    write_sequence_csv(data.sequences[n], (fs::path(dir) / seq_name).string());
    write_path_csv(data.paths[n], (fs::path(dir) / truth_name).string());
    seqs.push_back(seq_name);
    truths.push_back(truth_name);
  }
  info["sequences"] = seqs;
  info["truth"] = truths;
  info["layout"] = to_json(data.layout);
  write_text_file((fs::path(dir) / "manifest.json").string(), to_json_text(info));
}

}  // namespace nlarhmm
