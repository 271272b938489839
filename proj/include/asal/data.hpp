#pragma once

// Feature file codec, manifest loading with the session split protocol, and
// the synthetic drift generator.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asal/numkit.hpp"
#include "asal/types.hpp"

namespace asal {

// ---- Feature files ------------------------------------------------------
//
// "ASALFEAT", u32 version, u32 T, u32 D, then T*D little-endian f32, row-major.

inline constexpr std::size_t kFeatureHeaderBytes = 20;

std::string encode_features(const Matrix& frames);
Matrix decode_features(std::string_view bytes);

void write_feature_file(const std::string& path, const Matrix& frames);
// canonical_frames = 0 keeps the stored frame count.
FeatureSequence read_feature_file(const std::string& path, Index canonical_frames = 0, std::string id = {});

// Nearest-index temporal resampling: output row i is input row
// floor(i (T_in - 1) / (T_out - 1)).
Matrix resample_frames(const Matrix& frames, Index target_frames);

// ---- Manifest -------------------------------------------------------------

enum class Split { Train, Test, Unassigned };

std::string to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestRecord {
  std::string id;
  std::string feature_path;  // relative paths resolve against the manifest's directory
  double score = 0.0;
  std::string session;
  std::string variant;
  Split split = Split::Unassigned;
};

// CSV with header: id,feature_path,score,session,variant,split
std::vector<ManifestRecord> parse_manifest(std::string_view text);
std::string format_manifest(const std::vector<ManifestRecord>& records);

struct ProtocolConfig {
  Index frames = 16;  // canonical T
  ScoreRange range;
  double test_ratio = 0.2;
  Index train_cap = 50;
  std::string base_session = "Others";
  std::uint64_t seed = 0;
};

struct SessionIndices {
  std::string name;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  std::optional<SessionIndices> base;
  std::vector<SessionIndices> sessions;  // manifest order of first appearance
};

// Applies the protocol to record indices: explicit split tags are kept,
// unassigned records get a seeded test_ratio split, and the train side of each
// continual session is capped by seeded subsampling. Validates ids and scores.
SplitPlan plan_splits(const std::vector<ManifestRecord>& records, const ProtocolConfig& config);

struct SessionData {
  std::string name;
  std::vector<ScoredSample> train;
  std::vector<ScoredSample> test;
};

struct Dataset {
  std::optional<SessionData> base;
  std::vector<SessionData> sessions;
  Index dim = 0;
};

Dataset load_manifest(const std::string& path, const ProtocolConfig& config);

// Builds a dataset from records whose features are already in memory
// (features[i] belongs to records[i]); applies the same protocol and
// resampling as load_manifest.
Dataset assemble_dataset(const std::vector<ManifestRecord>& records, const std::vector<Matrix>& features,
                         const ProtocolConfig& config);

// ---- Synthetic drift benchmark ------------------------------------------

struct SynthSpec {
  Index sessions = 5;
  Index samples_per_session = 62;
  Index base_samples = 0;  // > 0 adds an "Others" base session
  Index frames = 16;
  Index dim = 32;
  double drift = 1.0;          // ||w_{s+1} - w_s||; at most 2 * weight_norm
  double content_shift = 3.0;  // ||m_{s+1} - m_s|| as a multiple of drift
  double noise = 0.05;      // score noise std
  double weight_norm = 0.8;  // ||w_s|| for every session
  Index latent_dim = 4;      // content varies in a fixed latent subspace; 0 uses all of R^D
  double feature_std = 1.0;  // per-direction spread of a video's content vector
  double motion = 0.5;       // amplitude of the per-video temporal oscillation
  double frame_noise = 0.1;
  ScoreRange range;
  std::uint64_t seed = 7;
};

struct PlantedScorer {
  std::string session;
  Vector mean;     // content mean of the session
  Vector weights;  // score = bias + weights . pooled + noise, clipped; lies in the latent subspace
  double bias = 0.0;  // centers the session's scores in the range
};

struct SyntheticDataset {
  SynthSpec spec;
  std::vector<ManifestRecord> records;
  std::vector<Matrix> features;  // parallel to records, f32-representable
  std::vector<PlantedScorer> scorers;
  Matrix basis;  // D x latent orthonormal basis of the content subspace
};

SyntheticDataset generate_synthetic(const SynthSpec& spec);

// Writes features/<id>.feat, manifest.csv and ground_truth.json under dir.
void write_synthetic(const SyntheticDataset& data, const std::string& dir);

std::string ground_truth_json(const SyntheticDataset& data);

}  // namespace asal
