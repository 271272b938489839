#pragma once

// Training and evaluation orchestration: joint training, base pretraining,
// the continual session loop with replay, evaluation, the flat-minima probe
// and session-boundary checkpoints.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asal/adapter.hpp"
#include "asal/data.hpp"
#include "asal/head.hpp"
#include "asal/keyframe.hpp"
#include "asal/losses.hpp"
#include "asal/memory.hpp"
#include "asal/report.hpp"

namespace asal {

enum class Mode { Joint, Continual };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct RunConfig {
  Mode mode = Mode::Continual;
  int epochs = 15;
  Index batch_size = 3;         // b1
  Index replay_batch_size = 2;  // b2
  LossWeights weights;          // lambda 0.05, alpha 1, beta 1
  Index memory_per_session = 16;
  KeyFrameConfig key_frames;  // K 3, diversity 0.5
  AdamConfig optimizer;       // lr 1e-4, weight decay 5e-4
  Index frames = 16;          // canonical T
  ScoreRange range;
  std::vector<Index> head_hidden{64, 32};
  Index adapter_hidden = 32;
  double adapter_init_sharpness = 4.0;
  bool reparameterize = true;
  bool base_pretrain = true;
  double max_degenerate_fraction = 0.05;
  double test_ratio = 0.2;
  Index train_cap = 50;
  std::string base_session = "Others";
  std::uint64_t seed = 0;

  ProtocolConfig protocol() const;
  HeadConfig head_config() const;
  AdapterConfig adapter_config(Index dim) const;
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& c);

// Head and adapter parameters plus the shared optimizer state.
struct ModelState {
  Head head;
  Adapter adapter;
  AdamState<double> optimizer;

  Index parameter_count() const { return head.net.parameter_count() + adapter.parameter_count(); }
  Vector packed() const;
  void unpack(const Vector& params);
  std::vector<ParamBlockInfo> blocks() const;

  friend bool operator==(const ModelState& a, const ModelState& b);
};

// Initializes the head, then the adapter, from Rng(config.seed).
ModelState init_model(const RunConfig& config, Index dim);

// Stream used for shuffling, noise draws and replay sampling.
Rng make_training_rng(std::uint64_t seed);

struct StepTrace {
  std::string session;
  int epoch = 0;
  double current_loss = 0.0;  // L_com on the current batch
  double replay_loss = 0.0;   // L_com on the replay batch, 0 when absent
  double reg_loss = 0.0;      // L_reg on the current batch
  double total = 0.0;         // current + alpha replay + beta reg
  bool replayed = false;
};

struct TrainingLog {
  std::vector<StepTrace> steps;  // steps taken in this process only
  std::vector<EpochTrace> epochs;
  Index attempted_steps = 0;
  Index degenerate_batches = 0;
  Index replay_skips = 0;
};

struct SessionState {
  Index next_session = 0;  // index into Dataset::sessions
  bool base_done = false;
  bool base_pretrained = false;
  ModelState model;
  MemoryBank bank;
  Rng rng;
  TrainingLog log;
};

// Contiguous batches over a shuffled permutation. A trailing batch of one
// sample is folded into the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, Index batch_size, Rng& rng);

// Runs config.epochs epochs over `samples`. With a non-null bank the replay
// term is added; with use_reg the adapter regularization term is added.
void train_epochs(const RunConfig& config, ModelState& model, std::span<const ScoredSample> samples,
                  const std::string& session, const MemoryBank* bank, bool use_reg, Rng& rng, TrainingLog& log);

struct Evaluation {
  std::vector<MetricEntry> sessions;  // first-appearance order
  std::vector<MetricEntry> variants;  // sorted, with "<prefix>A&B" unions
  MetricEntry overall;
  std::vector<Predictions> per_session;
};

Evaluation evaluate(const Head& head, std::span<const ScoredSample> test, ScoreRange range);

struct TrainResult {
  ModelState model;
  MemoryBank bank;
  TrainingLog log;
  MetricReport report;
};

TrainResult train_joint(const RunConfig& config, const Dataset& data);

// Trains a fresh model on the base split with the same loop as train_joint.
// Matches the first phase of train_continual.
ModelState base_pretrain(const RunConfig& config, const SessionData& base, Index dim, TrainingLog& log);

struct ContinualHooks {
  std::optional<SessionState> resume;
  // Called after base pretraining and after each session's bank write.
  std::function<void(const SessionState&)> on_session_end;
};

TrainResult train_continual(const RunConfig& config, const Dataset& data, ContinualHooks hooks = {});

// Training-set loss (eval-mode predictions) of each session under random
// unit-norm perturbations of the head parameters. For each radius, `draws`
// directions are drawn and shared by all sessions.
FlatnessTable flat_minima_probe(const Head& head, std::span<const SessionData> sessions, std::span<const double> radii,
                                Index draws, double lambda, Rng& rng);

// Report skeleton carrying the config echo.
MetricReport make_report(const RunConfig& config, const std::string& command);
void fill_metrics(MetricReport& report, const Evaluation& eval);
BankSummary summarize(const MemoryBank& bank);

// ---- Checkpoints ------------------------------------------------------------
//
// "ASALCKPT", u32 version, JSON metadata (config, progress, rng state, epoch
// traces), f64 parameters and optimizer moments, then an embedded bank file.

std::string encode_checkpoint(const RunConfig& config, Index dim, const SessionState& state);
struct LoadedCheckpoint {
  RunConfig config;
  Index dim = 0;
  SessionState state;
};
LoadedCheckpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const RunConfig& config, Index dim, const SessionState& state);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace asal
