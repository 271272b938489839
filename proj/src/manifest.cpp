#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>
#include <unordered_map>

#include "asal/data.hpp"
#include "asal/error.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.below(i))]);
}

constexpr std::string_view kHeader = "id,feature_path,score,session,variant,split";

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::Unassigned:
      return "";
  }
  return "";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s.empty() || s == "unassigned") return Split::Unassigned;
  throw DataError("unknown split tag '" + std::string(s) + "'");
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> records;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != kHeader) throw DataError("manifest line " + std::to_string(line_no) + ": expected header '" + std::string(kHeader) + "'");
      seen_header = true;
      continue;
    }
    const auto fields = split_fields(line);
    const auto where = "manifest line " + std::to_string(line_no) + " (record " + std::to_string(records.size()) + ")";
    if (fields.size() != 6) {
      throw DataError(where + ": expected 6 fields, found " + std::to_string(fields.size()));
    }
    ManifestRecord r;
    r.id = fields[0];
    r.feature_path = fields[1];
    const auto sv = fields[2];
    const auto [end, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), r.score);
    if (ec != std::errc() || end != sv.data() + sv.size()) throw DataError(where + ": bad score '" + std::string(sv) + "'");
    r.session = fields[3];
    r.variant = fields[4];
    try {
      r.split = split_from_string(fields[5]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (r.id.empty() || r.feature_path.empty() || r.session.empty()) {
      throw DataError(where + ": id, feature_path and session are required");
    }
    records.push_back(std::move(r));
  }
  if (!seen_header) throw DataError("manifest is empty");
  return records;
}

std::string format_manifest(const std::vector<ManifestRecord>& records) {
  std::ostringstream os;
  os << kHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), r.score);
    os << r.id << ',' << r.feature_path << ',' << std::string_view(buf, end - buf) << ',' << r.session << ','
       << r.variant << ',' << to_string(r.split) << '\n';
  }
  return os.str();
}

SplitPlan plan_splits(const std::vector<ManifestRecord>& records, const ProtocolConfig& config) {
  if (!(config.test_ratio >= 0.0 && config.test_ratio <= 1.0)) throw ConfigError("test ratio must lie in [0, 1]");
  if (config.train_cap < 1) throw ConfigError("train cap must be at least 1");

  std::unordered_map<std::string, std::size_t> first_seen;
  std::vector<std::string> bad_scores;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto [it, inserted] = first_seen.emplace(r.id, i);
    if (!inserted) {
      throw DataError("duplicate id '" + r.id + "' in records " + std::to_string(it->second) + " and " + std::to_string(i));
    }
    if (!(r.score >= config.range.lo && r.score <= config.range.hi)) bad_scores.push_back(std::to_string(i));
  }
  if (!bad_scores.empty()) {
    std::string list;
    for (const auto& s : bad_scores) list += (list.empty() ? "" : ", ") + s;
    throw DataError("scores outside [" + std::to_string(config.range.lo) + ", " + std::to_string(config.range.hi) +
                    "] in records " + list);
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& m = members[records[i].session];
    if (m.empty()) order.push_back(records[i].session);
    m.push_back(i);
  }

  SplitPlan plan;
  for (const auto& name : order) {
    Rng rng(config.seed ^ fnv1a(name));
    SessionIndices s{name, {}, {}};
    std::vector<std::size_t> unassigned;
    for (std::size_t i : members[name]) {
      switch (records[i].split) {
        case Split::Train:
          s.train.push_back(i);
          break;
        case Split::Test:
          s.test.push_back(i);
          break;
        case Split::Unassigned:
          unassigned.push_back(i);
          break;
      }
    }
    shuffle(unassigned, rng);
    const auto n_test = static_cast<std::size_t>(std::llround(config.test_ratio * static_cast<double>(unassigned.size())));
    s.test.insert(s.test.end(), unassigned.begin(), unassigned.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), unassigned.begin() + static_cast<std::ptrdiff_t>(n_test), unassigned.end());

    const bool is_base = name == config.base_session;
    if (!is_base && s.train.size() > static_cast<std::size_t>(config.train_cap)) {
      std::sort(s.train.begin(), s.train.end());
      shuffle(s.train, rng);
      s.train.resize(static_cast<std::size_t>(config.train_cap));
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    if (is_base) {
      plan.base = std::move(s);
    } else {
      plan.sessions.push_back(std::move(s));
    }
  }
  return plan;
}

Dataset load_manifest(const std::string& path, const ProtocolConfig& config) {
  const auto records = parse_manifest(io::read_file(path));
  plan_splits(records, config);  // validate ids and scores before touching files
  const auto root = std::filesystem::path(path).parent_path();

  auto resolve = [&](const ManifestRecord& r) {
    const std::filesystem::path p(r.feature_path);
    return (p.is_absolute() ? p : root / p).string();
  };

  std::vector<std::string> missing;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!std::filesystem::exists(resolve(records[i]))) missing.push_back(std::to_string(i));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& s : missing) list += (list.empty() ? "" : ", ") + s;
    throw DataError("missing feature files for records " + list);
  }

  std::vector<Matrix> features;
  features.reserve(records.size());
  for (const auto& r : records) features.push_back(read_feature_file(resolve(r)).frames);
  return assemble_dataset(records, features, config);
}

Dataset assemble_dataset(const std::vector<ManifestRecord>& records, const std::vector<Matrix>& features,
                         const ProtocolConfig& config) {
  if (features.size() != records.size()) {
    throw std::invalid_argument("assemble_dataset: " + std::to_string(features.size()) + " feature matrices for " +
                                std::to_string(records.size()) + " records");
  }
  const auto plan = plan_splits(records, config);
  Dataset data;
  auto load = [&](std::size_t i) {
    const auto& r = records[i];
    ScoredSample s{{r.id, resample_frames(features[i], config.frames)}, r.score, r.session, r.variant};
    if (data.dim == 0) data.dim = s.features.dim();
    if (s.features.dim() != data.dim) {
      throw DataError("record " + std::to_string(i) + " has feature dimension " + std::to_string(s.features.dim()) +
                      ", expected " + std::to_string(data.dim));
    }
    return s;
  };
  auto materialize = [&](const SessionIndices& idx) {
    SessionData s{idx.name, {}, {}};
    for (std::size_t i : idx.train) s.train.push_back(load(i));
    for (std::size_t i : idx.test) s.test.push_back(load(i));
    return s;
  };
  if (plan.base) data.base = materialize(*plan.base);
  for (const auto& idx : plan.sessions) data.sessions.push_back(materialize(idx));
  return data;
}

}  // namespace asal
