#include "asal/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "asal/error.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kUndefined = "undefined";

json metric_json(const Metric& m) { return m ? json(*m) : json(kUndefined); }

Metric metric_from(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != kUndefined) throw DataError("report: unexpected metric marker '" + j.get<std::string>() + "'");
    return std::nullopt;
  }
  return j.get<double>();
}

json number_or_marker(double v) { return std::isfinite(v) ? json(v) : json(kUndefined); }

double number_from(const json& j) { return j.is_string() ? std::nan("") : j.get<double>(); }

json entry_json(const MetricEntry& e) {
  return {{"name", e.name}, {"plcc", metric_json(e.plcc)}, {"srcc", metric_json(e.srcc)}, {"rl2e", e.rl2e}, {"count", e.count}};
}

MetricEntry entry_from(const json& j) {
  return {j.at("name").get<std::string>(), metric_from(j.at("plcc")), metric_from(j.at("srcc")), j.at("rl2e").get<double>(),
          j.at("count").get<Index>()};
}

}  // namespace

std::string emit_report(const MetricReport& r) {
  json j;
  j["command"] = r.command;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config;
  j["base_pretrained"] = r.base_pretrained;

  json metrics;
  metrics["sessions"] = json::array();
  for (const auto& e : r.sessions) metrics["sessions"].push_back(entry_json(e));
  metrics["variants"] = json::array();
  for (const auto& e : r.variants) metrics["variants"].push_back(entry_json(e));
  if (r.overall) {
    metrics["overall"] = {{"plcc_ove", metric_json(r.overall->plcc)},
                          {"srcc_ove", metric_json(r.overall->srcc)},
                          {"rl2e_ove", r.overall->rl2e},
                          {"count", r.overall->count}};
  }
  j["metrics"] = std::move(metrics);

  json training;
  training["steps"] = r.steps;
  training["degenerate_batches"] = r.degenerate_batches;
  training["replay_skips"] = r.replay_skips;
  training["epochs"] = json::array();
  for (const auto& e : r.epochs) {
    training["epochs"].push_back({{"session", e.session},
                                  {"epoch", e.epoch},
                                  {"mean_loss", number_or_marker(e.mean_loss)},
                                  {"steps", e.steps},
                                  {"skipped", e.skipped}});
  }
  j["training"] = std::move(training);

  if (r.bank) {
    j["memory"] = {{"sessions", r.bank->sessions},
                   {"exemplars", r.bank->exemplars},
                   {"floats", r.bank->floats},
                   {"bytes", r.bank->bytes}};
  }
  if (r.flatness) {
    const auto& f = *r.flatness;
    json table = json::array();
    for (std::size_t i = 0; i < f.radii.size(); ++i) {
      json row = json::array();
      for (double v : f.mean_delta[i]) row.push_back(number_or_marker(v));
      table.push_back({{"radius", f.radii[i]}, {"mean_delta", std::move(row)}});
    }
    json base = json::array();
    for (double v : f.base_loss) base.push_back(number_or_marker(v));
    j["flatness"] = {{"draws", f.draws}, {"sessions", f.sessions}, {"base_loss", std::move(base)}, {"radii", std::move(table)}};
  }
  return j.dump(2) + "\n";
}

MetricReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  try {
    MetricReport r;
    r.command = j.at("command").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.base_pretrained = j.at("base_pretrained").get<bool>();

    const auto& metrics = j.at("metrics");
    for (const auto& e : metrics.at("sessions")) r.sessions.push_back(entry_from(e));
    for (const auto& e : metrics.at("variants")) r.variants.push_back(entry_from(e));
    if (metrics.contains("overall")) {
      const auto& o = metrics.at("overall");
      r.overall = MetricEntry{"overall", metric_from(o.at("plcc_ove")), metric_from(o.at("srcc_ove")),
                              o.at("rl2e_ove").get<double>(), o.at("count").get<Index>()};
    }

    const auto& training = j.at("training");
    r.steps = training.at("steps").get<Index>();
    r.degenerate_batches = training.at("degenerate_batches").get<Index>();
    r.replay_skips = training.at("replay_skips").get<Index>();
    for (const auto& e : training.at("epochs")) {
      r.epochs.push_back({e.at("session").get<std::string>(), e.at("epoch").get<int>(), number_from(e.at("mean_loss")),
                          e.at("steps").get<Index>(), e.at("skipped").get<Index>()});
    }

    if (j.contains("memory")) {
      const auto& m = j.at("memory");
      r.bank = BankSummary{m.at("sessions").get<Index>(), m.at("exemplars").get<Index>(), m.at("floats").get<Index>(),
                           m.at("bytes").get<std::uint64_t>()};
    }
    if (j.contains("flatness")) {
      const auto& f = j.at("flatness");
      FlatnessTable t;
      t.draws = f.at("draws").get<Index>();
      t.sessions = f.at("sessions").get<std::vector<std::string>>();
      for (const auto& v : f.at("base_loss")) t.base_loss.push_back(number_from(v));
      for (const auto& row : f.at("radii")) {
        t.radii.push_back(row.at("radius").get<double>());
        std::vector<double> deltas;
        for (const auto& v : row.at("mean_delta")) deltas.push_back(number_from(v));
        t.mean_delta.push_back(std::move(deltas));
      }
      r.flatness = std::move(t);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

void write_report(const MetricReport& report, const std::string& path) { io::write_file(path, emit_report(report)); }

MetricReport read_report(const std::string& path) { return parse_report(io::read_file(path)); }

std::string format_report_summary(const MetricReport& r) {
  std::ostringstream os;
  auto metric = [](const Metric& m) {
    std::ostringstream s;
    if (m) {
      s << std::fixed << std::setprecision(4) << *m;
    } else {
      s << kUndefined;
    }
    return s.str();
  };
  auto row = [&](const MetricEntry& e) {
    os << std::left << std::setw(16) << e.name << std::right << std::setw(10) << metric(e.plcc) << std::setw(10)
       << metric(e.srcc) << std::setw(10) << std::fixed << std::setprecision(4) << e.rl2e << std::setw(8) << e.count
       << '\n';
  };
  os << r.command << " (" << r.mode << "), seed " << r.seed << ", config " << r.config_hash << '\n';
  if (!r.sessions.empty() || !r.variants.empty() || r.overall) {
    os << std::left << std::setw(16) << "group" << std::right << std::setw(10) << "PLCC" << std::setw(10) << "SRCC"
       << std::setw(10) << "RL2E" << std::setw(8) << "N" << '\n';
    for (const auto& e : r.sessions) row(e);
    for (const auto& e : r.variants) row(e);
    if (r.overall) row(*r.overall);
  }
  if (r.steps > 0) {
    os << "steps " << r.steps << ", degenerate batches skipped " << r.degenerate_batches << ", replay skips "
       << r.replay_skips << '\n';
  }
  if (r.bank) {
    os << "memory bank: " << r.bank->exemplars << " exemplars in " << r.bank->sessions << " session(s), "
       << r.bank->floats << " floats, " << r.bank->bytes << " bytes\n";
  }
  if (r.flatness) {
    const auto& f = *r.flatness;
    os << "flatness (mean delta loss over " << f.draws << " directions)\n" << std::setw(10) << "radius";
    for (const auto& s : f.sessions) os << std::setw(14) << s;
    os << '\n';
    for (std::size_t i = 0; i < f.radii.size(); ++i) {
      os << std::setw(10) << std::setprecision(4) << f.radii[i];
      for (double v : f.mean_delta[i]) os << std::setw(14) << std::setprecision(6) << v;
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace asal
