#include <cmath>

#include "asal/error.hpp"
#include "asal/runner.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kCheckpointMagic = "ASALCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

void put_vector(io::ByteWriter& w, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) w.f64(v(i));
}

Vector get_vector(io::ByteReader& r, Index n, const std::string& what) {
  r.need(static_cast<std::size_t>(n) * 8, what);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = r.f64(what);
  return v;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string encode_checkpoint(const RunConfig& config, Index dim, const SessionState& state) {
  json meta;
  meta["config"] = to_json(config);
  meta["dim"] = dim;
  meta["next_session"] = state.next_session;
  meta["base_done"] = state.base_done;
  meta["base_pretrained"] = state.base_pretrained;
  meta["rng"] = state.rng.state();
  meta["optimizer_step"] = state.model.optimizer.step;
  json log;
  log["attempted_steps"] = state.log.attempted_steps;
  log["degenerate_batches"] = state.log.degenerate_batches;
  log["replay_skips"] = state.log.replay_skips;
  log["epochs"] = json::array();
  for (const auto& e : state.log.epochs) {
    log["epochs"].push_back({e.session, e.epoch, number_or_null(e.mean_loss), e.steps, e.skipped});
  }
  meta["log"] = std::move(log);

  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(meta.dump());
  const Index n = state.model.parameter_count();
  w.u64(static_cast<std::uint64_t>(n));
  put_vector(w, state.model.packed());
  put_vector(w, state.model.optimizer.first_moment);
  put_vector(w, state.model.optimizer.second_moment);
  const auto bank = encode_bank(state.bank);
  w.u64(bank.size());
  w.bytes(bank);
  return w.take();
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  const auto version_at = r.offset();
  if (r.u32("checkpoint version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
  const auto meta_at = r.offset();
  const auto meta_text = r.str("checkpoint metadata");

  LoadedCheckpoint out;
  try {
    const auto meta = json::parse(meta_text);
    out.config = run_config_from_json(meta.at("config"));
    out.dim = meta.at("dim").get<Index>();
    out.state.next_session = meta.at("next_session").get<Index>();
    out.state.base_done = meta.at("base_done").get<bool>();
    out.state.base_pretrained = meta.at("base_pretrained").get<bool>();
    out.state.rng.set_state(meta.at("rng").get<std::string>());
    out.state.model = init_model(out.config, out.dim);
    out.state.model.optimizer.step = meta.at("optimizer_step").get<std::int64_t>();
    const auto& log = meta.at("log");
    out.state.log.attempted_steps = log.at("attempted_steps").get<Index>();
    out.state.log.degenerate_batches = log.at("degenerate_batches").get<Index>();
    out.state.log.replay_skips = log.at("replay_skips").get<Index>();
    for (const auto& e : log.at("epochs")) {
      out.state.log.epochs.push_back({e.at(0).get<std::string>(), e.at(1).get<int>(),
                                      e.at(2).is_null() ? std::nan("") : e.at(2).get<double>(), e.at(3).get<Index>(),
                                      e.at(4).get<Index>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what(), meta_at);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what(), meta_at);
  }

  auto& model = out.state.model;
  const auto count_at = r.offset();
  const auto n = static_cast<Index>(r.u64("parameter count"));
  if (n != model.parameter_count()) {
    throw FormatError("checkpoint holds " + std::to_string(n) + " parameters, config implies " +
                          std::to_string(model.parameter_count()),
                      count_at);
  }
  model.unpack(get_vector(r, n, "parameters"));
  model.optimizer.first_moment = get_vector(r, n, "first moments");
  model.optimizer.second_moment = get_vector(r, n, "second moments");
  const auto bank_size = r.u64("bank length");
  const auto bank_at = r.offset();
  const auto bank_bytes = r.bytes(static_cast<std::size_t>(bank_size), "embedded bank");
  try {
    out.state.bank = decode_bank(bank_bytes);
  } catch (const FormatError& e) {
    throw FormatError("embedded bank: " + std::string(e.what()), bank_at + e.offset());
  }
  r.expect_end("checkpoint");
  return out;
}

void save_checkpoint(const std::string& path, const RunConfig& config, Index dim, const SessionState& state) {
  io::write_file(path, encode_checkpoint(config, dim, state));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(io::read_file(path));
  } catch (const FormatError& e) {
    throw e.with_context(path);
  }
}

}  // namespace asal
