#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "asal/error.hpp"
#include "asal/runner.hpp"

namespace fs = std::filesystem;
using namespace asal;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

void add_run_options(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--epochs", c.epochs, "Epochs per session")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Current-data batch size b1")->capture_default_str();
  cmd->add_option("--replay-batch-size", c.replay_batch_size, "Replay batch size b2")->capture_default_str();
  cmd->add_option("--lambda", c.weights.lambda, "Weight of the precision (MSE) term")->capture_default_str();
  cmd->add_option("--alpha", c.weights.alpha, "Weight of the replay term")->capture_default_str();
  cmd->add_option("--beta", c.weights.beta, "Weight of the adapter regularization")->capture_default_str();
  cmd->add_option("--memory", c.memory_per_session, "Exemplars stored per session (m)")->capture_default_str();
  cmd->add_option("--key-frames", c.key_frames.count, "Key frames per exemplar (K)")->capture_default_str();
  cmd->add_option("--diversity", c.key_frames.diversity, "Key-frame redundancy weight")->capture_default_str();
  cmd->add_option("--lr", c.optimizer.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", c.optimizer.weight_decay, "Decoupled weight decay")->capture_default_str();
  cmd->add_option("--frames", c.frames, "Canonical frame count T")->capture_default_str();
  cmd->add_option("--score-min", c.range.lo, "Lowest score")->capture_default_str();
  cmd->add_option("--score-max", c.range.hi, "Highest score")->capture_default_str();
  cmd->add_option("--head-hidden", c.head_hidden, "Hidden layer sizes of the head")->capture_default_str()->delimiter(',');
  cmd->add_option("--adapter-hidden", c.adapter_hidden, "Hidden size of the adapter refinement")->capture_default_str();
  cmd->add_option("--adapter-sharpness", c.adapter_init_sharpness, "Initial logit on the nearest key slot")
      ->capture_default_str();
  cmd->add_option("--max-degenerate", c.max_degenerate_fraction, "Allowed fraction of skipped batches")
      ->capture_default_str();
  cmd->add_option("--test-ratio", c.test_ratio, "Test fraction of unassigned records")->capture_default_str();
  cmd->add_option("--train-cap", c.train_cap, "Training samples kept per continual session")->capture_default_str();
  cmd->add_option("--base-session", c.base_session, "Session used for base pretraining")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for splits, initialization and sampling")->capture_default_str();
  cmd->add_flag("--no-reparam{false}", c.reparameterize, "Train on mu instead of sampled scores");
  cmd->add_flag("--no-base-pretrain{false}", c.base_pretrain, "Start the continual loop cold");
}

void print_summary(const MetricReport& r) { std::cout << format_report_summary(r); }

std::string checkpoint_name(const SessionState& s) {
  return s.next_session == 0 ? "base.ckpt" : "session-" + std::to_string(s.next_session) + ".ckpt";
}

int run_synth(const SynthSpec& spec, const std::string& out) {
  const auto data = generate_synthetic(spec);
  write_synthetic(data, out);
  std::cout << "wrote " << data.records.size() << " samples in " << data.scorers.size() << " sessions to " << out << "\n";
  return kOk;
}

int run_train(RunConfig config, const std::string& mode, const std::string& manifest, const std::string& out,
              const std::optional<std::string>& resume) {
  config.mode = mode_from_string(mode);
  std::optional<SessionState> state;
  if (resume) {
    auto loaded = load_checkpoint(*resume);
    if (loaded.config.mode != Mode::Continual) throw ConfigError("only continual runs can be resumed");
    std::cerr << "resuming from " << *resume << "; hyperparameters come from the checkpoint\n";
    config = loaded.config;
    state = std::move(loaded.state);
  }
  config.validate();
  const Dataset data = load_manifest(manifest, config.protocol());
  fs::create_directories(fs::path(out) / "checkpoints");

  TrainResult result;
  if (config.mode == Mode::Joint) {
    result = train_joint(config, data);
  } else {
    auto save = [&](const SessionState& s) {
      save_checkpoint((fs::path(out) / "checkpoints" / checkpoint_name(s)).string(), config, data.dim, s);
    };
    result = train_continual(config, data, {std::move(state), save});
  }

  SessionState final_state;
  final_state.model = result.model;
  final_state.bank = result.bank;
  final_state.base_done = true;
  final_state.next_session = static_cast<Index>(data.sessions.size());
  final_state.base_pretrained = result.report.base_pretrained;
  save_checkpoint((fs::path(out) / "model.ckpt").string(), config, data.dim, final_state);
  write_report(result.report, (fs::path(out) / "report.json").string());
  print_summary(result.report);
  return kOk;
}

std::vector<ScoredSample> test_samples(const Dataset& data, bool include_base) {
  std::vector<ScoredSample> out;
  if (include_base && data.base) out.insert(out.end(), data.base->test.begin(), data.base->test.end());
  for (const auto& s : data.sessions) out.insert(out.end(), s.test.begin(), s.test.end());
  return out;
}

int run_eval(const std::string& checkpoint, const std::string& manifest, const std::string& report_path) {
  const auto loaded = load_checkpoint(checkpoint);
  const Dataset data = load_manifest(manifest, loaded.config.protocol());
  if (data.dim != loaded.dim) {
    throw DataError("manifest features have dimension " + std::to_string(data.dim) + " but the model expects " +
                    std::to_string(loaded.dim));
  }
  const auto test = test_samples(data, loaded.config.mode == Mode::Joint);
  if (test.empty()) throw DataError("no test samples in " + manifest);
  MetricReport report = make_report(loaded.config, "eval");
  report.base_pretrained = loaded.state.base_pretrained;
  fill_metrics(report, evaluate(loaded.state.model.head, test, loaded.config.range));
  report.bank = summarize(loaded.state.bank);
  if (!report_path.empty()) write_report(report, report_path);
  print_summary(report);
  return kOk;
}

int run_probe(const std::string& checkpoint, const std::string& manifest, const std::vector<double>& radii, Index draws,
              std::optional<std::uint64_t> seed, const std::string& report_path) {
  const auto loaded = load_checkpoint(checkpoint);
  const Dataset data = load_manifest(manifest, loaded.config.protocol());
  if (data.dim != loaded.dim) {
    throw DataError("manifest features have dimension " + std::to_string(data.dim) + " but the model expects " +
                    std::to_string(loaded.dim));
  }
  Rng rng(seed.value_or(loaded.config.seed));
  MetricReport report = make_report(loaded.config, "probe-flatness");
  report.flatness =
      flat_minima_probe(loaded.state.model.head, data.sessions, radii, draws, loaded.config.weights.lambda, rng);
  if (!report_path.empty()) write_report(report, report_path);
  print_summary(report);
  return kOk;
}

int run_report(const std::string& path, bool json) {
  const auto report = read_report(path);
  if (json) {
    std::cout << emit_report(report);
  } else {
    print_summary(report);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual perceptual-score regression with score-aligned replay"};
  app.require_subcommand(1);

  SynthSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic drifting-session dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--sessions", spec.sessions, "Continual sessions")->capture_default_str();
  synth->add_option("--samples", spec.samples_per_session, "Samples per session")->capture_default_str();
  synth->add_option("--base-samples", spec.base_samples, "Samples in the base session (0 for none)")->capture_default_str();
  synth->add_option("--frames", spec.frames, "Frames per sample")->capture_default_str();
  synth->add_option("--dim", spec.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--latent-dim", spec.latent_dim, "Dimension of the content subspace (0 = dim)")->capture_default_str();
  synth->add_option("--drift", spec.drift, "Distance between consecutive planted weight vectors")->capture_default_str();
  synth->add_option("--content-shift", spec.content_shift, "Content mean step as a multiple of drift")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Score noise std")->capture_default_str();
  synth->add_option("--weight-norm", spec.weight_norm, "Norm of every planted weight vector")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();

  RunConfig train_config;
  std::string mode = "continual", train_manifest, train_out;
  std::optional<std::string> resume;
  auto* train = app.add_subcommand("train", "Train jointly or over sessions");
  train->add_option("--mode", mode, "joint or continual")->capture_default_str()->check(CLI::IsMember({"joint", "continual"}));
  train->add_option("--manifest", train_manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory for report and checkpoints")->required();
  train->add_option("--resume", resume, "Continue from a session checkpoint")->check(CLI::ExistingFile);
  add_run_options(train, train_config);

  std::string eval_ckpt, eval_manifest, eval_report;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the manifest's test splits");
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", eval_report, "Write the report to this path");

  std::string probe_ckpt, probe_manifest, probe_report;
  std::vector<double> radii{0.5, 1.0, 2.0, 4.0};
  Index draws = 10;
  std::optional<std::uint64_t> probe_seed;
  auto* probe = app.add_subcommand("probe-flatness", "Loss change under random weight perturbations");
  probe->add_option("--checkpoint", probe_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  probe->add_option("--manifest", probe_manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  probe->add_option("--radii", radii, "Perturbation radii")->delimiter(',')->capture_default_str();
  probe->add_option("--draws", draws, "Random directions per radius")->capture_default_str();
  probe->add_option("--seed", probe_seed, "Direction seed (defaults to the run seed)");
  probe->add_option("--report", probe_report, "Write the report to this path");

  std::string report_path;
  bool report_json = false;
  auto* report = app.add_subcommand("report", "Print a saved report");
  report->add_option("path", report_path, "Report JSON")->required()->check(CLI::ExistingFile);
  report->add_flag("--json", report_json, "Print the canonical JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return run_synth(spec, synth_out);
    if (*train) return run_train(train_config, mode, train_manifest, train_out, resume);
    if (*eval) return run_eval(eval_ckpt, eval_manifest, eval_report);
    if (*probe) return run_probe(probe_ckpt, probe_manifest, radii, draws, probe_seed, probe_report);
    if (*report) return run_report(report_path, report_json);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
