#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gcnkit/error.hpp"

namespace gcnkit {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

/**
 * @brief Outcome of one training session.
 *
 * Wall-clock times are kept in memory but serialized to a separate timing
 * file, so the report file itself is a pure function of (seed, config, data).
 */
struct RunReport {
  std::string preset;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<EpochRecord> epochs;

  double mean_epoch_seconds() const {
    if (epochs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : epochs) s += e.seconds;
    return s / static_cast<double>(epochs.size());
  }
};

inline std::string report_text(const RunReport& r) {
  std::string s = "# gcnkit run report v1\n";
  s += fmt::format("preset = {}\ndataset = {}\nseed = {}\nconfig_fingerprint = {}\n", r.preset,
                   r.dataset, r.seed, r.config_fingerprint);
  s += fmt::format("epochs_run = {}\nbest_epoch = {}\nbest_val_loss = {}\nbest_val_accuracy = {}\n",
                   r.epochs_run, r.best_epoch, r.best_val_loss, r.best_val_accuracy);
  s += fmt::format("test_accuracy = {}\n", r.test_accuracy);
  s += "# epoch train_loss val_loss val_accuracy\n";
  for (const auto& e : r.epochs) {
    s += fmt::format("epoch {} {} {} {}\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
  }
  return s;
}

inline std::string timing_text(const RunReport& r) {
  std::string s = "# gcnkit run timing v1\n";
  s += fmt::format("mean_epoch_seconds = {}\n", r.mean_epoch_seconds());
  for (const auto& e : r.epochs) s += fmt::format("epoch {} {}\n", e.epoch, e.seconds);
  return s;
}

namespace report_detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

}  // namespace report_detail

/// Parses report_text() output (epoch seconds are left at zero).
inline RunReport parse_report(std::string_view text, const std::string& source = "<report>") {
  RunReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "epoch") {
      EpochRecord e;
      if (!(ls >> e.epoch >> e.train_loss >> e.val_loss >> e.val_accuracy)) {
        throw FormatError(source, lineno, "bad epoch record");
      }
      r.epochs.push_back(e);
      continue;
    }
    std::string eq;
    if (!(ls >> eq) || eq != "=") throw FormatError(source, lineno, "expected key = value");
    std::string value;
    std::getline(ls >> std::ws, value);
    try {
      if (key == "preset") r.preset = value;
      else if (key == "dataset") r.dataset = value;
      else if (key == "seed") r.seed = std::stoull(value);
      else if (key == "config_fingerprint") r.config_fingerprint = value;
      else if (key == "epochs_run") r.epochs_run = std::stoi(value);
      else if (key == "best_epoch") r.best_epoch = std::stoi(value);
      else if (key == "best_val_loss") r.best_val_loss = std::stod(value);
      else if (key == "best_val_accuracy") r.best_val_accuracy = std::stod(value);
      else if (key == "test_accuracy") r.test_accuracy = std::stod(value);
      else throw FormatError(source, lineno, "unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw FormatError(source, lineno, "bad value '" + value + "'");
    }
  }
  return r;
}

/// Fills epoch seconds of `r` from timing_text() output.
inline void apply_timing(RunReport& r, std::string_view text, const std::string& source = "<timing>") {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.starts_with("epoch ")) continue;
    std::istringstream ls(line.substr(6));
    int epoch = 0;
    double secs = 0.0;
    if (!(ls >> epoch >> secs)) throw FormatError(source, lineno, "bad timing record");
    for (auto& e : r.epochs)
      if (e.epoch == epoch) e.seconds = secs;
  }
}

inline std::filesystem::path timing_path(const std::filesystem::path& report_path) {
  auto p = report_path;
  p += ".timing";
  return p;
}

/// Writes the report and its `.timing` sidecar.
inline void write_report(const RunReport& r, const std::filesystem::path& path) {
  report_detail::write_file(path, report_text(r));
  report_detail::write_file(timing_path(path), timing_text(r));
}

/// Reads a report and, when present, its timing sidecar.
inline RunReport read_report(const std::filesystem::path& path) {
  RunReport r = parse_report(report_detail::read_file(path), path.string());
  const auto tp = timing_path(path);
  if (std::filesystem::exists(tp)) apply_timing(r, report_detail::read_file(tp), tp.string());
  return r;
}

}  // namespace gcnkit
