#include <doctest.h>

#include <filesystem>
#include <map>

#include "asal/keyframe.hpp"
#include "asal/memory.hpp"

using namespace asal;

namespace {

ScoredSample sample(Rng& rng, const std::string& id, double score, Index t = 6, Index d = 4) {
  Matrix f(t, d);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();
  return {{id, f}, score, "s", ""};
}

std::vector<ScoredSample> session(Rng& rng, Index n, Index t = 6, Index d = 4) {
  std::vector<ScoredSample> out;
  for (Index i = 0; i < n; ++i) out.push_back(sample(rng, "v" + std::to_string(i), 1.0 + 4.0 * rng.uniform(), t, d));
  return out;
}

}  // namespace

TEST_CASE("select_exemplars: evenly spaced sorted positions") {
  Rng rng(1);
  std::vector<ScoredSample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(sample(rng, "v" + std::to_string(i), 49.0 - i));
  // sorted ascending, position p holds sample 49 - p
  const auto picked = select_exemplars(samples, 5);
  CHECK(picked == std::vector<std::size_t>{49, 37, 25, 13, 0});
}

TEST_CASE("select_exemplars: ties ordered by id") {
  Rng rng(2);
  std::vector<ScoredSample> samples{sample(rng, "b", 1.0), sample(rng, "a", 1.0), sample(rng, "c", 2.0)};
  CHECK(select_exemplars(samples, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_exemplars(samples, 1) == std::vector<std::size_t>{1});
}

TEST_CASE("select_exemplars: quota, extremes and small sessions") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(60));
    const Index m = 1 + static_cast<Index>(rng.below(20));
    const auto samples = session(rng, n);
    const auto picked = select_exemplars(samples, m);
    CHECK(static_cast<Index>(picked.size()) == std::min(m, n));
    std::vector<std::size_t> uniq = picked;
    std::sort(uniq.begin(), uniq.end());
    CHECK(std::adjacent_find(uniq.begin(), uniq.end()) == uniq.end());
    double lo = 1e9, hi = -1e9;
    for (const auto& s : samples) {
      lo = std::min(lo, s.score);
      hi = std::max(hi, s.score);
    }
    CHECK(samples[picked.front()].score == lo);
    if (std::min(m, n) >= 2) CHECK(samples[picked.back()].score == hi);
    for (std::size_t i = 1; i < picked.size(); ++i) CHECK(samples[picked[i - 1]].score <= samples[picked[i]].score);
  }
  CHECK_THROWS(select_exemplars(std::vector<ScoredSample>{}, 3));
  const auto s = session(rng, 4);
  CHECK_THROWS(select_exemplars(s, 0));
}

TEST_CASE("write_session: storage arithmetic and pass-through scores") {
  Rng rng(4);
  const auto samples = session(rng, 50, 16, 256);
  MemoryBank bank;
  write_session(bank, "s1", samples, 16, 3, 0.5);
  CHECK(bank.size() == 16);
  CHECK(bank.float_count() == 16 * 3 * 256);
  const auto& stored = bank.sessions().front();
  CHECK(stored.key_frames == 3);
  CHECK(stored.dim == 256);
  const auto picked = select_exemplars(samples, 16);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto& src = samples[picked[i]];
    CHECK(stored.exemplars[i].score == src.score);
    CHECK(stored.exemplars[i].id == src.features.id);
    CHECK(stored.exemplars[i].features == phi_select(src.features.frames, 3, 0.5));
  }
  CHECK_THROWS(write_session(bank, "s1", samples, 16, 3, 0.5));

  write_session(bank, "s2", session(rng, 5, 16, 256), 16, 3, 0.5);
  CHECK(bank.sessions().size() == 2);
  CHECK(bank.contains("s2"));
  CHECK(bank.size() == 21);
  CHECK(bank.float_count() == (16 + 5) * 3 * 256);
}

TEST_CASE("sample_replay_batch: empty bank and small bank") {
  Rng rng(5);
  MemoryBank bank;
  CHECK_FALSE(sample_replay_batch(bank, 2, rng).has_value());
  write_session(bank, "s", session(rng, 2), 16, 3, 0.5);
  const auto all = sample_replay_batch(bank, 2, rng);
  REQUIRE(all.has_value());
  CHECK(all->size() == 2);
  CHECK((*all)[0] != (*all)[1]);
  CHECK(sample_replay_batch(bank, 5, rng)->size() == 2);
}

TEST_CASE("sample_replay_batch: deterministic and uniform") {
  Rng rng(6);
  MemoryBank bank;
  write_session(bank, "a", session(rng, 16), 16, 2, 0.5);
  write_session(bank, "b", session(rng, 16), 16, 2, 0.5);
  REQUIRE(bank.size() == 32);

  Rng r1(99), r2(99);
  for (int i = 0; i < 20; ++i) CHECK(*sample_replay_batch(bank, 2, r1) == *sample_replay_batch(bank, 2, r2));

  const int draws = 10000;
  const Index b = 2;
  std::map<const Exemplar*, int> counts;
  Rng r(7);
  for (int i = 0; i < draws; ++i) {
    const auto batch = sample_replay_batch(bank, b, r);
    for (const Exemplar* e : *batch) ++counts[e];
  }
  CHECK(counts.size() == 32);
  const double p = static_cast<double>(b) / 32.0;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (const auto& [e, c] : counts) CHECK(std::abs(c - draws * p) < 3.0 * sd);
}

TEST_CASE("bank codec round trip and byte accounting") {
  Rng rng(8);
  MemoryBank bank;
  CHECK(encode_bank(bank).size() == bank.byte_size());
  write_session(bank, "first", session(rng, 20, 8, 5), 6, 3, 0.5);
  write_session(bank, "second-session", session(rng, 3, 8, 5), 6, 3, 0.5);
  const std::string bytes = encode_bank(bank);
  CHECK(bytes.size() == bank.byte_size());
  CHECK(bytes.substr(0, 8) == "ASALBANK");

  const MemoryBank back = decode_bank(bytes);
  CHECK(back.size() == bank.size());
  CHECK(back.float_count() == bank.float_count());
  for (std::size_t s = 0; s < bank.sessions().size(); ++s) {
    const auto& x = bank.sessions()[s];
    const auto& y = back.sessions()[s];
    CHECK(x.tag == y.tag);
    for (std::size_t i = 0; i < x.exemplars.size(); ++i) {
      CHECK(x.exemplars[i].score == y.exemplars[i].score);
      CHECK(x.exemplars[i].features.cast<float>() == y.exemplars[i].features.cast<float>());
    }
  }
  CHECK(encode_bank(back) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "asal_bank_test.bin").string();
  save_bank(bank, path);
  CHECK(std::filesystem::file_size(path) == bank.byte_size());
  CHECK(encode_bank(load_bank(path)) == bytes);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(decode_bank(bytes.substr(0, bytes.size() - 3)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_bank(bad), FormatError);
  CHECK_THROWS_AS(decode_bank(bytes + "x"), FormatError);
}
