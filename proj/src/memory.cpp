#include "asal/memory.hpp"

#include <algorithm>
#include <numeric>

#include "asal/error.hpp"
#include "asal/keyframe.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

constexpr std::string_view kBankMagic = "ASALBANK";
constexpr std::uint32_t kBankVersion = 1;

}  // namespace

Index MemoryBank::size() const {
  Index n = 0;
  for (const auto& s : sessions_) n += static_cast<Index>(s.exemplars.size());
  return n;
}

bool MemoryBank::contains(std::string_view tag) const {
  return std::any_of(sessions_.begin(), sessions_.end(), [&](const auto& s) { return s.tag == tag; });
}

void MemoryBank::append(SessionExemplars session) {
  if (contains(session.tag)) throw std::invalid_argument("memory bank already holds session '" + session.tag + "'");
  for (const auto& e : session.exemplars) {
    if (e.features.rows() != session.key_frames || e.features.cols() != session.dim) {
      throw DimensionError("memory bank: exemplar '" + e.id + "' is " + shape_of(e.features) + ", session expects " +
                           shape_string(session.key_frames, session.dim));
    }
  }
  sessions_.push_back(std::move(session));
}

Index MemoryBank::float_count() const {
  Index n = 0;
  for (const auto& s : sessions_) n += static_cast<Index>(s.exemplars.size()) * s.key_frames * s.dim;
  return n;
}

std::size_t MemoryBank::byte_size() const {
  std::size_t n = kBankMagic.size() + 4 + 4;
  for (const auto& s : sessions_) {
    n += 4 + s.tag.size() + 4 + 4 + 4;
    for (const auto& e : s.exemplars) {
      n += 4 + e.id.size() + 8 + static_cast<std::size_t>(s.key_frames * s.dim) * 4;
    }
  }
  return n;
}

bool operator==(const MemoryBank& a, const MemoryBank& b) {
  if (a.sessions_.size() != b.sessions_.size()) return false;
  for (std::size_t i = 0; i < a.sessions_.size(); ++i) {
    const auto& x = a.sessions_[i];
    const auto& y = b.sessions_[i];
    if (x.tag != y.tag || x.key_frames != y.key_frames || x.dim != y.dim || x.exemplars.size() != y.exemplars.size()) {
      return false;
    }
    for (std::size_t j = 0; j < x.exemplars.size(); ++j) {
      const auto& e = x.exemplars[j];
      const auto& f = y.exemplars[j];
      if (e.id != f.id || e.score != f.score || e.session != f.session || e.features != f.features) return false;
    }
  }
  return true;
}

std::vector<std::size_t> select_exemplars(std::span<const ScoredSample> samples, Index m) {
  if (samples.empty()) throw std::invalid_argument("select_exemplars: empty session");
  if (m < 1) throw std::invalid_argument("select_exemplars: m must be at least 1");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (samples[i].score != samples[j].score) return samples[i].score < samples[j].score;
    return samples[i].features.id < samples[j].features.id;
  });
  const auto n = static_cast<Index>(samples.size());
  if (m >= n) return order;
  if (m == 1) return {order.front()};
  std::vector<std::size_t> chosen;
  chosen.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) chosen.push_back(order[static_cast<std::size_t>(i * (n - 1) / (m - 1))]);
  return chosen;
}

void write_session(MemoryBank& bank, const std::string& tag, std::span<const ScoredSample> samples, Index m,
                   Index key_frames, double diversity) {
  if (bank.contains(tag)) throw std::invalid_argument("write_session: session '" + tag + "' was already written");
  SessionExemplars session{tag, key_frames, samples.empty() ? 0 : samples.front().features.dim(), {}};
  for (std::size_t i : select_exemplars(samples, m)) {
    const auto& s = samples[i];
    session.exemplars.push_back({s.features.id, phi_select(s.features.frames, key_frames, diversity), s.score, tag});
  }
  bank.append(std::move(session));
}

std::optional<std::vector<const Exemplar*>> sample_replay_batch(const MemoryBank& bank, Index b, Rng& rng) {
  if (bank.empty()) return std::nullopt;
  std::vector<const Exemplar*> pool;
  for (const auto& s : bank.sessions()) {
    for (const auto& e : s.exemplars) pool.push_back(&e);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(b, 0)), pool.size());
  // partial Fisher–Yates
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

std::string encode_bank(const MemoryBank& bank) {
  io::ByteWriter w;
  w.bytes(kBankMagic);
  w.u32(kBankVersion);
  w.u32(static_cast<std::uint32_t>(bank.sessions().size()));
  for (const auto& s : bank.sessions()) {
    w.str(s.tag);
    w.u32(static_cast<std::uint32_t>(s.exemplars.size()));
    w.u32(static_cast<std::uint32_t>(s.key_frames));
    w.u32(static_cast<std::uint32_t>(s.dim));
    for (const auto& e : s.exemplars) {
      w.str(e.id);
      w.f64(e.score);
      for (Index k = 0; k < e.features.size(); ++k) w.f32(static_cast<float>(e.features.data()[k]));
    }
  }
  return w.take();
}

MemoryBank decode_bank(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kBankMagic, "memory bank");
  const auto version_at = r.offset();
  if (r.u32("bank version") != kBankVersion) throw FormatError("unsupported bank version", version_at);
  const auto n_sessions = r.u32("session count");
  MemoryBank bank;
  for (std::uint32_t s = 0; s < n_sessions; ++s) {
    SessionExemplars session;
    session.tag = r.str("session tag");
    const auto m = r.u32("exemplar count");
    session.key_frames = r.u32("key frame count");
    session.dim = r.u32("feature dimension");
    for (std::uint32_t i = 0; i < m; ++i) {
      Exemplar e;
      e.id = r.str("exemplar id");
      e.score = r.f64("exemplar score");
      e.session = session.tag;
      r.need(static_cast<std::size_t>(session.key_frames * session.dim) * 4, "exemplar features");
      e.features.resize(session.key_frames, session.dim);
      for (Index k = 0; k < e.features.size(); ++k) e.features.data()[k] = r.f32("feature");
      session.exemplars.push_back(std::move(e));
    }
    const auto at = r.offset();
    try {
      bank.append(std::move(session));
    } catch (const std::exception& ex) {
      throw FormatError(ex.what(), at);
    }
  }
  r.expect_end("memory bank");
  return bank;
}

void save_bank(const MemoryBank& bank, const std::string& path) { io::write_file(path, encode_bank(bank)); }

MemoryBank load_bank(const std::string& path) { return decode_bank(io::read_file(path)); }

}  // namespace asal
