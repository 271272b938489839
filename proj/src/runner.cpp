#include "asal/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "asal/error.hpp"

namespace asal {

using json = nlohmann::ordered_json;

std::string to_string(Mode m) { return m == Mode::Joint ? "joint" : "continual"; }

Mode mode_from_string(const std::string& s) {
  if (s == "joint") return Mode::Joint;
  if (s == "continual") return Mode::Continual;
  throw ConfigError("unknown mode '" + s + "' (expected joint or continual)");
}

ProtocolConfig RunConfig::protocol() const { return {frames, range, test_ratio, train_cap, base_session, seed}; }

HeadConfig RunConfig::head_config() const { return {Pooling::TemporalMean, head_hidden, range}; }

AdapterConfig RunConfig::adapter_config(Index dim) const {
  return {frames, key_frames.count, dim, adapter_hidden, adapter_init_sharpness};
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(epochs >= 1, "epochs must be at least 1");
  require(batch_size >= 2, "batch size must be at least 2");
  require(replay_batch_size >= 1, "replay batch size must be at least 1");
  require(weights.lambda >= 0 && weights.alpha >= 0 && weights.beta >= 0, "loss weights must be non-negative");
  require(memory_per_session >= 0, "memory per session must be non-negative");
  require(frames >= 1, "canonical frame count must be at least 1");
  require(key_frames.count >= 1 && key_frames.count <= frames, "key frames must lie in [1, frames]");
  require(key_frames.diversity >= 0, "diversity weight must be non-negative");
  require(optimizer.learning_rate > 0, "learning rate must be positive");
  require(optimizer.weight_decay >= 0, "weight decay must be non-negative");
  require(optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 && optimizer.beta2 < 1,
          "Adam decay rates must lie in [0, 1)");
  require(optimizer.epsilon > 0, "Adam epsilon must be positive");
  require(range.lo < range.hi, "score range must satisfy lo < hi");
  require(std::all_of(head_hidden.begin(), head_hidden.end(), [](Index h) { return h > 0; }), "hidden sizes must be positive");
  require(adapter_hidden >= 1, "adapter hidden size must be positive");
  require(max_degenerate_fraction >= 0, "degenerate fraction must be non-negative");
  require(test_ratio >= 0 && test_ratio <= 1, "test ratio must lie in [0, 1]");
  require(train_cap >= 1, "train cap must be at least 1");
}

json to_json(const RunConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"replay_batch_size", c.replay_batch_size},
          {"lambda", c.weights.lambda},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"memory_per_session", c.memory_per_session},
          {"key_frames", c.key_frames.count},
          {"diversity", c.key_frames.diversity},
          {"learning_rate", c.optimizer.learning_rate},
          {"weight_decay", c.optimizer.weight_decay},
          {"adam_beta1", c.optimizer.beta1},
          {"adam_beta2", c.optimizer.beta2},
          {"adam_epsilon", c.optimizer.epsilon},
          {"frames", c.frames},
          {"score_range", {c.range.lo, c.range.hi}},
          {"pooling", to_string(Pooling::TemporalMean)},
          {"head_hidden", c.head_hidden},
          {"adapter_hidden", c.adapter_hidden},
          {"adapter_init_sharpness", c.adapter_init_sharpness},
          {"reparameterize", c.reparameterize},
          {"base_pretrain", c.base_pretrain},
          {"max_degenerate_fraction", c.max_degenerate_fraction},
          {"test_ratio", c.test_ratio},
          {"train_cap", c.train_cap},
          {"base_session", c.base_session},
          {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& j) {
  try {
    RunConfig c;
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<Index>();
    c.replay_batch_size = j.at("replay_batch_size").get<Index>();
    c.weights = {j.at("lambda").get<double>(), j.at("alpha").get<double>(), j.at("beta").get<double>()};
    c.memory_per_session = j.at("memory_per_session").get<Index>();
    c.key_frames = {j.at("key_frames").get<Index>(), j.at("diversity").get<double>()};
    c.optimizer = {j.at("learning_rate").get<double>(), j.at("adam_beta1").get<double>(), j.at("adam_beta2").get<double>(),
                   j.at("adam_epsilon").get<double>(), j.at("weight_decay").get<double>()};
    c.frames = j.at("frames").get<Index>();
    c.range = {j.at("score_range").at(0).get<double>(), j.at("score_range").at(1).get<double>()};
    pooling_from_string(j.at("pooling").get<std::string>());
    c.head_hidden = j.at("head_hidden").get<std::vector<Index>>();
    c.adapter_hidden = j.at("adapter_hidden").get<Index>();
    c.adapter_init_sharpness = j.at("adapter_init_sharpness").get<double>();
    c.reparameterize = j.at("reparameterize").get<bool>();
    c.base_pretrain = j.at("base_pretrain").get<bool>();
    c.max_degenerate_fraction = j.at("max_degenerate_fraction").get<double>();
    c.test_ratio = j.at("test_ratio").get<double>();
    c.train_cap = j.at("train_cap").get<Index>();
    c.base_session = j.at("base_session").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vector ModelState::packed() const {
  Vector out(parameter_count());
  head.net.pack(out.head(head.net.parameter_count()));
  adapter.pack(out.tail(adapter.parameter_count()));
  return out;
}

void ModelState::unpack(const Vector& params) {
  if (params.size() != parameter_count()) {
    throw DimensionError("ModelState::unpack: " + std::to_string(params.size()) + " values for " +
                         std::to_string(parameter_count()) + " parameters");
  }
  head.net.unpack(params.head(head.net.parameter_count()));
  adapter.unpack(params.tail(adapter.parameter_count()));
}

std::vector<ParamBlockInfo> ModelState::blocks() const {
  auto out = head.net.blocks("head");
  auto rest = adapter.blocks(head.net.parameter_count());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

bool operator==(const ModelState& a, const ModelState& b) {
  return a.head.net == b.head.net && a.adapter.logits == b.adapter.logits && a.adapter.refine == b.adapter.refine &&
         a.optimizer.step == b.optimizer.step && a.optimizer.first_moment == b.optimizer.first_moment &&
         a.optimizer.second_moment == b.optimizer.second_moment;
}

ModelState init_model(const RunConfig& config, Index dim) {
  Rng rng(config.seed);
  ModelState m;
  m.head = make_head(config.head_config(), dim, rng);
  m.adapter = make_adapter(config.adapter_config(dim), rng);
  m.optimizer = AdamState<double>::init(m.parameter_count(), config.optimizer);
  return m;
}

Rng make_training_rng(std::uint64_t seed) { return Rng(seed ^ 0x9E3779B97F4A7C15ULL); }

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, Index batch_size, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.below(i))]);
  std::vector<std::vector<std::size_t>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += b) {
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + b)));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

void train_epochs(const RunConfig& config, ModelState& model, std::span<const ScoredSample> samples,
                  const std::string& session, const MemoryBank* bank, bool use_reg, Rng& rng, TrainingLog& log) {
  const auto& w = config.weights;
  const auto layout = model.blocks();
  const Index head_params = model.head.net.parameter_count();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochTrace trace{session, epoch, 0.0, 0, 0};
    double loss_sum = 0.0;
    for (const auto& batch : make_batches(samples.size(), config.batch_size, rng)) {
      ++log.attempted_steps;
      const auto b = static_cast<Index>(batch.size());

      // current data
      std::vector<const Matrix*> frames;
      Vector truth(b);
      for (Index i = 0; i < b; ++i) {
        const auto& s = samples[batch[static_cast<std::size_t>(i)]];
        frames.push_back(&s.features.frames);
        truth(i) = s.score;
      }
      const Vector eps = config.reparameterize ? gaussian_sample(rng, b) : Vector::Zero(b);
      const auto pass = head_forward(model.head, pool_batch(frames), eps, config.reparameterize);
      LossValue current;
      try {
        current = combined_loss(pass.scores, truth, w.lambda);
      } catch (const DegenerateBatch&) {
        ++log.degenerate_batches;
        ++trace.skipped;
        continue;
      }
      StepTrace step{session, epoch, current.value, 0.0, 0.0, 0.0, false};
      Mlp<double> head_grad = head_backward(model.head, pass, current.grad).net;
      Adapter adapter_grad = model.adapter.zeros_like();

      // replay through the adapter
      if (bank != nullptr && w.alpha > 0.0) {
        if (auto replay = sample_replay_batch(*bank, config.replay_batch_size, rng)) {
          const auto r = static_cast<Index>(replay->size());
          std::vector<AdapterPass> recon;
          std::vector<const Matrix*> recon_frames;
          Vector replay_truth(r);
          for (Index i = 0; i < r; ++i) {
            const Exemplar* e = (*replay)[static_cast<std::size_t>(i)];
            recon.push_back(adapter_forward(model.adapter, e->features));
            replay_truth(i) = e->score;
          }
          for (const auto& p : recon) recon_frames.push_back(&p.output);
          const Vector replay_eps = config.reparameterize ? gaussian_sample(rng, r) : Vector::Zero(r);
          const auto replay_pass = head_forward(model.head, pool_batch(recon_frames), replay_eps, config.reparameterize);
          try {
            const auto old = combined_loss(replay_pass.scores, replay_truth, w.lambda);
            const auto g = head_backward(model.head, replay_pass, w.alpha * old.grad);
            head_grad += g.net;
            for (Index i = 0; i < r; ++i) {
              adapter_grad += adapter_backward(model.adapter, recon[static_cast<std::size_t>(i)],
                                               pool_backward(g.pooled.row(i), config.frames));
            }
            step.replay_loss = old.value;
            step.replayed = true;
          } catch (const DegenerateBatch&) {
            ++log.replay_skips;
          }
        }
      }

      // adapter regularization on the current batch
      if (use_reg && w.beta > 0.0) {
        auto reg = reg_loss_gradients(model.adapter, frames, config.key_frames.diversity);
        reg.grads *= w.beta;
        adapter_grad += reg.grads;
        step.reg_loss = reg.value;
      }

      step.total = step.current_loss + w.alpha * step.replay_loss + w.beta * step.reg_loss;

      Vector grads(model.parameter_count());
      head_grad.pack(grads.head(head_params));
      adapter_grad.pack(grads.tail(model.adapter.parameter_count()));
      Vector params = model.packed();
      adam_step(model.optimizer, params, grads, layout);
      model.unpack(params);

      loss_sum += step.total;
      ++trace.steps;
      log.steps.push_back(std::move(step));
    }
    trace.mean_loss = trace.steps > 0 ? loss_sum / static_cast<double>(trace.steps) : std::nan("");
    log.epochs.push_back(std::move(trace));
  }
}

namespace {

MetricEntry entry_for(const std::string& name, const Predictions& p, ScoreRange range) {
  return {name, plcc(p.pred, p.truth), srcc(p.pred, p.truth), rl2e(p.pred, p.truth, range.hi, range.lo), p.pred.size()};
}

Predictions gather(const std::vector<std::pair<double, double>>& pairs) {
  Predictions p{Vector(static_cast<Index>(pairs.size())), Vector(static_cast<Index>(pairs.size()))};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    p.pred(static_cast<Index>(i)) = pairs[i].first;
    p.truth(static_cast<Index>(i)) = pairs[i].second;
  }
  return p;
}

void check_degenerate_budget(const RunConfig& config, const TrainingLog& log) {
  if (log.attempted_steps > 0 &&
      static_cast<double>(log.degenerate_batches) > config.max_degenerate_fraction * static_cast<double>(log.attempted_steps)) {
    throw std::runtime_error("too many degenerate batches: " + std::to_string(log.degenerate_batches) + " of " +
                             std::to_string(log.attempted_steps) + " steps skipped");
  }
}

std::vector<ScoredSample> all_test(const Dataset& data, bool include_base) {
  std::vector<ScoredSample> out;
  if (include_base && data.base) out.insert(out.end(), data.base->test.begin(), data.base->test.end());
  for (const auto& s : data.sessions) out.insert(out.end(), s.test.begin(), s.test.end());
  return out;
}

}  // namespace

Evaluation evaluate(const Head& head, std::span<const ScoredSample> test, ScoreRange range) {
  if (test.empty()) throw std::invalid_argument("evaluate: no test samples");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> by_session;
  std::map<std::string, std::vector<std::pair<double, double>>> by_variant;
  std::vector<std::pair<double, double>> everything;
  for (const auto& s : test) {
    const std::pair<double, double> pt{predict_eval(head, s.features.frames), s.score};
    auto& bucket = by_session[s.session];
    if (bucket.empty()) order.push_back(s.session);
    bucket.push_back(pt);
    if (!s.variant.empty()) by_variant[s.variant].push_back(pt);
    everything.push_back(pt);
  }

  Evaluation eval;
  for (const auto& name : order) {
    eval.per_session.push_back(gather(by_session[name]));
    eval.sessions.push_back(entry_for(name, eval.per_session.back(), range));
  }
  // "xA" and "xB" also report their union as "xA&B".
  std::map<std::string, std::vector<std::pair<double, double>>> variants = by_variant;
  for (const auto& [tag, pts] : by_variant) {
    if (tag.size() < 2 || tag.back() != 'A') continue;
    const auto prefix = tag.substr(0, tag.size() - 1);
    const auto other = by_variant.find(prefix + "B");
    if (other == by_variant.end()) continue;
    auto& joined = variants[prefix + "A&B"];
    joined = pts;
    joined.insert(joined.end(), other->second.begin(), other->second.end());
  }
  for (const auto& [tag, pts] : variants) eval.variants.push_back(entry_for(tag, gather(pts), range));
  eval.overall = entry_for("overall", gather(everything), range);
  return eval;
}

MetricReport make_report(const RunConfig& config, const std::string& command) {
  MetricReport r;
  r.command = command;
  r.mode = to_string(config.mode);
  r.seed = config.seed;
  r.config_hash = config_hash(config);
  r.config = to_json(config);
  return r;
}

void fill_metrics(MetricReport& report, const Evaluation& eval) {
  report.sessions = eval.sessions;
  report.variants = eval.variants;
  report.overall = eval.overall;
}

BankSummary summarize(const MemoryBank& bank) {
  return {static_cast<Index>(bank.sessions().size()), bank.size(), bank.float_count(),
          static_cast<std::uint64_t>(bank.byte_size())};
}

namespace {

void fill_training(MetricReport& report, const TrainingLog& log) {
  report.steps = log.attempted_steps;
  report.degenerate_batches = log.degenerate_batches;
  report.replay_skips = log.replay_skips;
  report.epochs = log.epochs;
}

}  // namespace

TrainResult train_joint(const RunConfig& config, const Dataset& data) {
  config.validate();
  std::vector<ScoredSample> train;
  if (data.base) train.insert(train.end(), data.base->train.begin(), data.base->train.end());
  for (const auto& s : data.sessions) train.insert(train.end(), s.train.begin(), s.train.end());
  if (train.empty()) throw DataError("train_joint: empty training split");
  const auto test = all_test(data, true);
  if (test.empty()) throw DataError("train_joint: empty test split");

  TrainResult result;
  result.model = init_model(config, data.dim);
  Rng rng = make_training_rng(config.seed);
  train_epochs(config, result.model, train, "joint", nullptr, false, rng, result.log);
  check_degenerate_budget(config, result.log);

  result.report = make_report(config, "train");
  fill_metrics(result.report, evaluate(result.model.head, test, config.range));
  fill_training(result.report, result.log);
  return result;
}

ModelState base_pretrain(const RunConfig& config, const SessionData& base, Index dim, TrainingLog& log) {
  config.validate();
  if (base.train.empty()) throw DataError("base_pretrain: empty base split");
  ModelState model = init_model(config, dim);
  Rng rng = make_training_rng(config.seed);
  train_epochs(config, model, base.train, base.name, nullptr, false, rng, log);
  return model;
}

TrainResult train_continual(const RunConfig& config, const Dataset& data, ContinualHooks hooks) {
  config.validate();
  if (data.sessions.empty()) throw DataError("train_continual: no sessions");
  for (const auto& s : data.sessions) {
    if (s.train.empty()) throw DataError("train_continual: session '" + s.name + "' has an empty training split");
  }

  SessionState state;
  if (hooks.resume) {
    state = std::move(*hooks.resume);
  } else {
    state.model = init_model(config, data.dim);
    state.rng = make_training_rng(config.seed);
  }
  auto notify = [&] {
    if (hooks.on_session_end) hooks.on_session_end(state);
  };

  if (!state.base_done) {
    if (config.base_pretrain && data.base && !data.base->train.empty()) {
      train_epochs(config, state.model, data.base->train, data.base->name, nullptr, false, state.rng, state.log);
      state.base_pretrained = true;
    } else if (config.base_pretrain) {
      std::cerr << "warning: no base split named '" << config.base_session << "'; continual training starts cold\n";
    }
    state.base_done = true;
    notify();
  }

  for (auto s = static_cast<std::size_t>(state.next_session); s < data.sessions.size(); ++s) {
    const auto& session = data.sessions[s];
    train_epochs(config, state.model, session.train, session.name, &state.bank, true, state.rng, state.log);
    if (config.memory_per_session > 0) {
      write_session(state.bank, session.name, session.train, config.memory_per_session, config.key_frames.count,
                    config.key_frames.diversity);
    }
    state.next_session = static_cast<Index>(s + 1);
    notify();
  }
  check_degenerate_budget(config, state.log);

  TrainResult result;
  result.report = make_report(config, "train");
  result.report.base_pretrained = state.base_pretrained;
  fill_metrics(result.report, evaluate(state.model.head, all_test(data, false), config.range));
  fill_training(result.report, state.log);
  result.report.bank = summarize(state.bank);
  result.model = std::move(state.model);
  result.bank = std::move(state.bank);
  result.log = std::move(state.log);
  return result;
}

namespace {

double session_loss(const Head& head, const SessionData& session, double lambda) {
  Vector pred(static_cast<Index>(session.train.size()));
  Vector truth(pred.size());
  for (std::size_t i = 0; i < session.train.size(); ++i) {
    pred(static_cast<Index>(i)) = predict_eval(head, session.train[i].features.frames);
    truth(static_cast<Index>(i)) = session.train[i].score;
  }
  try {
    return combined_loss(pred, truth, lambda).value;
  } catch (const DegenerateBatch&) {
    return std::nan("");
  }
}

}  // namespace

FlatnessTable flat_minima_probe(const Head& head, std::span<const SessionData> sessions, std::span<const double> radii,
                                Index draws, double lambda, Rng& rng) {
  if (draws < 1) throw std::invalid_argument("flat_minima_probe: need at least one direction");
  FlatnessTable table;
  table.draws = draws;
  table.radii.assign(radii.begin(), radii.end());
  for (const auto& s : sessions) {
    table.sessions.push_back(s.name);
    table.base_loss.push_back(session_loss(head, s, lambda));
  }

  const Index n = head.net.parameter_count();
  Vector theta(n);
  head.net.pack(theta);
  Head perturbed = head;
  for (double radius : radii) {
    std::vector<double> sum(sessions.size(), 0.0);
    for (Index d = 0; d < draws; ++d) {
      Vector dir = gaussian_sample(rng, n);
      dir /= dir.norm();
      perturbed.net.unpack(theta + radius * dir);
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        sum[s] += session_loss(perturbed, sessions[s], lambda) - table.base_loss[s];
      }
    }
    for (auto& v : sum) v /= static_cast<double>(draws);
    table.mean_delta.push_back(std::move(sum));
  }
  return table;
}

}  // namespace asal
