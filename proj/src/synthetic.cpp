#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include <json.hpp>

#include "asal/data.hpp"
#include "asal/error.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

Vector unit_direction(Rng& rng, Index dim) {
  Vector v = gaussian_sample(rng, dim);
  return v / v.norm();
}

void validate(const SynthSpec& s) {
  if (s.sessions < 1 || s.samples_per_session < 1 || s.frames < 1 || s.dim < 1 || s.base_samples < 0) {
    throw ConfigError("synthetic spec: counts and sizes must be positive");
  }
  if (s.drift < 0 || s.content_shift < 0 || s.noise < 0 || s.weight_norm <= 0 || s.feature_std <= 0 || s.motion < 0 || s.frame_noise < 0) {
    throw ConfigError("synthetic spec: magnitudes must be non-negative (weight norm and spread positive)");
  }
  if (s.drift > 2.0 * s.weight_norm) throw ConfigError("synthetic spec: drift cannot exceed twice the weight norm");
  if (s.latent_dim < 0 || s.latent_dim > s.dim) throw ConfigError("synthetic spec: latent dimension must lie in [0, dim]");
  if (!(s.range.lo < s.range.hi)) throw ConfigError("synthetic spec: empty score range");
}

// Turns w towards `toward` (projected orthogonal to w) so that ||w' - w|| = chord
// and ||w'|| = ||w||.
Vector rotate(const Vector& w, const Vector& toward, double chord) {
  const double r = w.norm();
  Vector u = toward - (toward.dot(w) / (r * r)) * w;
  if (u.norm() < 1e-12 || chord == 0.0) return w;
  u *= r / u.norm();
  const double theta = 2.0 * std::asin(chord / (2.0 * r));
  return std::cos(theta) * w + std::sin(theta) * u;
}

std::string sample_id(const std::string& session, Index i) {
  std::ostringstream os;
  os << session << '-' << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

SyntheticDataset generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  SyntheticDataset out;
  out.spec = spec;
  const double center = 0.5 * (spec.range.lo + spec.range.hi);

  // Planted scorers: weights rotate inside the latent subspace at fixed norm
  // with chord length `drift`; the content mean takes steps of
  // content_shift * drift. The base session sits at the origin.
  const Index latent = spec.latent_dim == 0 ? spec.dim : spec.latent_dim;
  Matrix gauss(spec.dim, latent);
  for (Index j = 0; j < latent; ++j) gauss.col(j) = gaussian_sample(rng, spec.dim);
  const Matrix basis = Eigen::HouseholderQR<Matrix>(gauss).householderQ() * Matrix::Identity(spec.dim, latent);

  std::vector<PlantedScorer> scorers;
  Vector weights = basis * unit_direction(rng, latent) * spec.weight_norm;
  Vector mean = Vector::Zero(spec.dim);
  auto add = [&](std::string name) { scorers.push_back({std::move(name), mean, weights, center - weights.dot(mean)}); };
  if (spec.base_samples > 0) add("Others");
  for (Index s = 0; s < spec.sessions; ++s) {
    if (s > 0 || spec.base_samples > 0) {
      weights = rotate(weights, basis * unit_direction(rng, latent), spec.drift);
      mean += spec.content_shift * spec.drift * unit_direction(rng, spec.dim);
    }
    add("session-" + std::to_string(s + 1));
  }

  for (const auto& scorer : scorers) {
    const Index n = scorer.session == "Others" ? spec.base_samples : spec.samples_per_session;
    for (Index i = 0; i < n; ++i) {
      const Vector content = scorer.mean + spec.feature_std * (basis * gaussian_sample(rng, latent));
      const Vector motion_dir = unit_direction(rng, spec.dim);
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      Matrix frames(spec.frames, spec.dim);
      for (Index t = 0; t < spec.frames; ++t) {
        const double wave = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(spec.frames) + phase);
        frames.row(t) = (content + spec.motion * wave * motion_dir + spec.frame_noise * gaussian_sample(rng, spec.dim)).transpose();
      }
      frames = frames.cast<float>().cast<double>();

      const double raw = scorer.bias + scorer.weights.dot(frames.colwise().mean().transpose()) + spec.noise * rng.normal();
      ManifestRecord r;
      r.id = sample_id(scorer.session, i);
      r.feature_path = "features/" + r.id + ".feat";
      r.score = std::clamp(raw, spec.range.lo, spec.range.hi);
      r.session = scorer.session;
      out.records.push_back(std::move(r));
      out.features.push_back(std::move(frames));
    }
  }
  out.scorers = std::move(scorers);
  out.basis = basis;
  return out;
}

std::string ground_truth_json(const SyntheticDataset& data) {
  nlohmann::ordered_json j;
  const auto& s = data.spec;
  j["spec"] = {{"sessions", s.sessions},       {"samples_per_session", s.samples_per_session},
               {"base_samples", s.base_samples}, {"frames", s.frames},
               {"dim", s.dim},                 {"latent_dim", s.latent_dim},
               {"drift", s.drift},
               {"content_shift", s.content_shift},       {"noise", s.noise},             {"weight_norm", s.weight_norm},
               {"feature_std", s.feature_std}, {"motion", s.motion},
               {"frame_noise", s.frame_noise}, {"score_range", {s.range.lo, s.range.hi}},
               {"seed", s.seed}};
  j["scorers"] = nlohmann::ordered_json::array();
  for (const auto& p : data.scorers) {
    j["scorers"].push_back({{"session", p.session},
                            {"bias", p.bias},
                            {"weights", std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size())},
                            {"mean", std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size())}});
  }
  return j.dump(2) + "\n";
}

void write_synthetic(const SyntheticDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    write_feature_file((fs::path(dir) / data.records[i].feature_path).string(), data.features[i]);
  }
  io::write_file((fs::path(dir) / "manifest.csv").string(), format_manifest(data.records));
  io::write_file((fs::path(dir) / "ground_truth.json").string(), ground_truth_json(data));
}

}  // namespace asal
