#pragma once

// Training-loss vs probe-accuracy analysis. Runs are grouped by label
// smoothing and each group gets a Spearman rank correlation between final
// epoch-mean training loss and final probe accuracy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "diet/error.hpp"
#include "diet/train.hpp"
#include "json.hpp"

namespace diet {

// Average (fractional) ranks, 1-based; ties share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

// Pearson correlation of the average ranks. Undefined (nullopt) with fewer
// than two points or when either side is constant.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct ReportPoint {
  double final_loss = 0.0;
  double accuracy = 0.0;
  double alpha = 0.0;
  std::string label;
};

struct GroupReport {
  double alpha = 0.0;
  std::size_t runs = 0;
  std::optional<double> rho;  // nullopt: undefined (constant losses or accuracies)
};

struct CorrelationReport {
  std::vector<GroupReport> groups;  // ascending alpha
  std::vector<ReportPoint> points;  // input order
};

inline constexpr std::size_t kMinRunsPerGroup = 3;

inline CorrelationReport correlation_report(std::vector<ReportPoint> points) {
  if (points.empty()) throw ReportError("no runs to report on");
  std::map<double, std::vector<std::size_t>> by_alpha;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].final_loss) || !std::isfinite(points[i].accuracy)) {
      throw ReportError("run '" + points[i].label + "' has non-finite metrics");
    }
    by_alpha[points[i].alpha].push_back(i);
  }
  CorrelationReport rep;
  for (const auto& [alpha, members] : by_alpha) {
    if (members.size() < kMinRunsPerGroup) {
      throw ReportError("label smoothing group " + detail::fmt_double(alpha) + " has " +
                        std::to_string(members.size()) + " run(s), need at least " +
                        std::to_string(kMinRunsPerGroup));
    }
    std::vector<double> loss, acc;
    for (auto i : members) {
      loss.push_back(points[i].final_loss);
      acc.push_back(points[i].accuracy);
    }
    rep.groups.push_back({alpha, members.size(), spearman(loss, acc)});
  }
  rep.points = std::move(points);
  return rep;
}

inline CorrelationReport correlation_report(const std::vector<RunArtifact>& runs) {
  std::vector<ReportPoint> points;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    if (r.metrics.empty() || !r.final_probe()) {
      throw ReportError("run " + std::to_string(i) + " has no final probe accuracy");
    }
    points.push_back({r.final_train_loss(), *r.final_probe(), r.config.label_smoothing,
                      config_hash(r.config)});
  }
  return correlation_report(std::move(points));
}

inline nlohmann::json to_json(const CorrelationReport& rep) {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : rep.groups) {
    j["groups"].push_back({{"label_smoothing", g.alpha},
                           {"runs", g.runs},
                           {"spearman_rho", g.rho ? nlohmann::json(*g.rho)
                                                  : nlohmann::json(nullptr)}});
  }
  j["points"] = nlohmann::json::array();
  for (const auto& p : rep.points) {
    j["points"].push_back({{"final_train_loss", p.final_loss},
                           {"probe_top1", p.accuracy},
                           {"label_smoothing", p.alpha},
                           {"run", p.label}});
  }
  return j;
}

inline std::string to_text(const CorrelationReport& rep) {
  std::ostringstream o;
  o << "label_smoothing  runs  spearman(loss, top1)\n";
  for (const auto& g : rep.groups) {
    char buf[96];
    if (g.rho) {
      std::snprintf(buf, sizeof buf, "%15.4g  %4zu  %+.4f\n", g.alpha, g.runs, *g.rho);
    } else {
      std::snprintf(buf, sizeof buf, "%15.4g  %4zu  undefined\n", g.alpha, g.runs);
    }
    o << buf;
  }
  return o.str();
}

}  // namespace diet
