#pragma once

// Per-epoch metrics and their JSONL / CSV encodings. Field names are frozen:
//   epoch, train_loss, lr, probe_top1, wall_seconds, config_hash
// probe_top1 is null (JSONL) or empty (CSV) on epochs without a probe.

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "diet/error.hpp"
#include "json.hpp"

namespace diet {

struct MetricsRecord {
  std::size_t epoch = 0;      // 1-based
  double train_loss = 0.0;    // sample-weighted mean over the epoch
  double lr = 0.0;            // rate used by the epoch's last step
  std::optional<double> probe_top1;
  double wall_seconds = 0.0;  // cumulative since the run (or resume) began
  std::string config_hash;
};

enum class MetricsFormat { jsonl, csv };

inline MetricsFormat parse_metrics_format(const std::string& s) {
  if (s == "jsonl") return MetricsFormat::jsonl;
  if (s == "csv") return MetricsFormat::csv;
  throw ConfigError("format must be csv or jsonl");
}

inline nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["lr"] = r.lr;
  j["probe_top1"] = r.probe_top1 ? nlohmann::json(*r.probe_top1) : nlohmann::json(nullptr);
  j["wall_seconds"] = r.wall_seconds;
  j["config_hash"] = r.config_hash;
  return j;
}

inline MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.lr = j.at("lr").get<double>();
  if (!j.at("probe_top1").is_null()) r.probe_top1 = j.at("probe_top1").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.config_hash = j.at("config_hash").get<std::string>();
  return r;
}

inline constexpr const char* kCsvHeader =
    "epoch,train_loss,lr,probe_top1,wall_seconds,config_hash";

inline std::string to_csv_row(const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", r.epoch, r.train_loss, r.lr);
  std::string row = buf;
  if (r.probe_top1) {
    std::snprintf(buf, sizeof buf, "%.17g", *r.probe_top1);
    row += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.6f,", r.wall_seconds);
  row += buf;
  row += r.config_hash;
  return row;
}

inline void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records,
                          MetricsFormat fmt) {
  if (fmt == MetricsFormat::csv) out << kCsvHeader << "\n";
  for (const auto& r : records) {
    if (fmt == MetricsFormat::jsonl) {
      out << to_json(r).dump() << "\n";
    } else {
      out << to_csv_row(r) << "\n";
    }
  }
}

inline void write_metrics_file(const std::string& path,
                               const std::vector<MetricsRecord>& records,
                               MetricsFormat fmt) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_metrics(out, records, fmt);
}

}  // namespace diet
