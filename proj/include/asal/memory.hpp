#pragma once

// Replay memory: score-stratified exemplar selection, key-frame compressed
// storage and replay mini-batch sampling.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asal/numkit.hpp"
#include "asal/types.hpp"

namespace asal {

struct Exemplar {
  std::string id;
  Matrix features;  // K x D
  double score = 0.0;
  std::string session;
};

struct SessionExemplars {
  std::string tag;
  Index key_frames = 0;
  Index dim = 0;
  std::vector<Exemplar> exemplars;
};

class MemoryBank {
 public:
  bool empty() const { return size() == 0; }
  Index size() const;
  bool contains(std::string_view tag) const;

  const std::vector<SessionExemplars>& sessions() const { return sessions_; }

  // Appends a session. Rejects a tag that is already stored.
  void append(SessionExemplars session);

  // Number of stored feature values: sum over sessions of m * K * D.
  Index float_count() const;
  // Exact size of the serialized bank file.
  std::size_t byte_size() const;

  friend bool operator==(const MemoryBank&, const MemoryBank&);

 private:
  std::vector<SessionExemplars> sessions_;
};

// Sorts by score (ties by id) and takes positions floor(i (n-1) / (m-1)),
// i = 0..m-1. Returns indices into `samples`, ordered by score.
std::vector<std::size_t> select_exemplars(std::span<const ScoredSample> samples, Index m);

// Selects up to m exemplars, compresses each to K key frames and appends them
// under `tag`.
void write_session(MemoryBank& bank, const std::string& tag, std::span<const ScoredSample> samples, Index m,
                   Index key_frames, double diversity);

// b exemplars drawn uniformly without replacement from the union of all
// sessions (all of them if fewer than b). Empty when the bank is empty.
std::optional<std::vector<const Exemplar*>> sample_replay_batch(const MemoryBank& bank, Index b, Rng& rng);

// Bank file: "ASALBANK", u32 version, u32 session count, then per session
// {tag, u32 m, u32 K, u32 D, m x {id, f64 score, K*D f32}}. Strings are a u32
// length followed by bytes. Little-endian throughout.
std::string encode_bank(const MemoryBank& bank);
MemoryBank decode_bank(std::string_view bytes);
void save_bank(const MemoryBank& bank, const std::string& path);
MemoryBank load_bank(const std::string& path);

}  // namespace asal
