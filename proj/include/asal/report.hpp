#pragma once

// Run reports: per-session and per-variant metrics, pooled metrics, training
// counters, memory accounting and flatness tables. Serialized as JSON with a
// fixed key order so seeded runs produce byte-identical files.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asal/metrics.hpp"

namespace asal {

struct MetricEntry {
  std::string name;
  Metric plcc;
  Metric srcc;
  double rl2e = 0.0;
  Index count = 0;

  friend bool operator==(const MetricEntry&, const MetricEntry&) = default;
};

struct EpochTrace {
  std::string session;
  int epoch = 0;
  double mean_loss = 0.0;  // over the epoch's completed steps
  Index steps = 0;
  Index skipped = 0;

  friend bool operator==(const EpochTrace&, const EpochTrace&) = default;
};

struct FlatnessTable {
  std::vector<double> radii;
  std::vector<std::string> sessions;
  Index draws = 0;
  std::vector<double> base_loss;                // per session, unperturbed
  std::vector<std::vector<double>> mean_delta;  // [radius][session]

  friend bool operator==(const FlatnessTable&, const FlatnessTable&) = default;
};

struct BankSummary {
  Index sessions = 0;
  Index exemplars = 0;
  Index floats = 0;
  std::uint64_t bytes = 0;

  friend bool operator==(const BankSummary&, const BankSummary&) = default;
};

struct MetricReport {
  std::string command;
  std::string mode;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  bool base_pretrained = false;

  std::vector<MetricEntry> sessions;
  std::vector<MetricEntry> variants;
  std::optional<MetricEntry> overall;  // pooled over every evaluated sample

  Index steps = 0;
  Index degenerate_batches = 0;
  Index replay_skips = 0;
  std::vector<EpochTrace> epochs;

  std::optional<BankSummary> bank;
  std::optional<FlatnessTable> flatness;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

std::string emit_report(const MetricReport& report);
MetricReport parse_report(std::string_view text);
void write_report(const MetricReport& report, const std::string& path);
MetricReport read_report(const std::string& path);

// Plain-text table for terminals.
std::string format_report_summary(const MetricReport& report);

}  // namespace asal
