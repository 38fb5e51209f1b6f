#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "evdiff/core/rng.hpp"
#include "evdiff/data/dataset.hpp"
#include "evdiff/data/events.hpp"
#include "evdiff/data/hawkes.hpp"
#include "evdiff/data/jsonl.hpp"

using namespace evdiff;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("load_jsonl: happy path, rejection messages, K inference") {
  const std::string p = temp_file("evdiff_load.jsonl");
  write_file(p, R"({"marks":[0,1],"times":[1.0,2.5]})" "\n");
  const LoadedCorpus c = load_jsonl(p);
  REQUIRE(c.sequences.size() == 1);
  CHECK(c.num_marks >= 2);
  CHECK(c.sequences[0].times[1] == doctest::Approx(2.5));

  write_file(p, R"({"marks":[0,0],"times":[2.0,2.0]})" "\n");
  CHECK_THROWS_WITH_AS(load_jsonl(p), "line 1: non-increasing at index 1",
                       ValidationError);

  write_file(p, R"({"K":2})" "\n" R"({"marks":[0,5],"times":[1.0,2.0]})" "\n");
  CHECK_THROWS_AS(load_jsonl(p), ValidationError);

  // Three lines covering marks 0..4 -> K = 5.
  write_file(p,
             R"({"marks":[0,1],"times":[1,2]})" "\n"
             R"({"marks":[2,3],"times":[1,2]})" "\n"
             R"({"marks":[4,0],"times":[1,2]})" "\n");
  CHECK(load_jsonl(p).num_marks == 5);
  std::filesystem::remove(p);
}

TEST_CASE("save/load round trip preserves sequences and K header") {
  const std::string p = temp_file("evdiff_rt.jsonl");
  std::vector<EventSequence> seqs(2);
  seqs[0].marks = {0, 2, 1};
  seqs[0].times = {0.5, 1.25, 9.75};
  seqs[1].marks = {1};
  seqs[1].times = {3.0};
  save_jsonl(p, seqs, 3);
  const LoadedCorpus c = load_jsonl(p);
  CHECK(c.num_marks == 3);
  REQUIRE(c.sequences.size() == 2);
  CHECK(c.sequences[0].times == seqs[0].times);
  CHECK(c.sequences[1].marks == seqs[1].marks);
  std::filesystem::remove(p);
}

TEST_CASE("normalize_times: (0,100] rule and exact max") {
  std::vector<EventSequence> corpus(2);
  corpus[0].marks = {0, 0};
  corpus[0].times = {50.0, 200.0};
  corpus[1].marks = {0};
  corpus[1].times = {100.0};
  const double scale = normalize_times(corpus);
  CHECK(scale == doctest::Approx(0.5));
  CHECK(corpus[0].times[0] == doctest::Approx(25.0));
  CHECK(corpus[0].times[1] == 100.0);  // exactly

  std::vector<EventSequence> same(1);
  same[0].marks = {0, 0};
  same[0].times = {40.0, 100.0};
  normalize_times(same);
  CHECK(same[0].times[0] == doctest::Approx(40.0));
  CHECK(same[0].times[1] == 100.0);

  std::vector<EventSequence> empty;
  CHECK_THROWS_AS(normalize_times(empty), ValidationError);
}

TEST_CASE("make_windows: boundary counts and contiguity") {
  EventSequence seq;
  for (int i = 0; i < 32; ++i) {
    seq.marks.push_back(i % 3);
    seq.times.push_back(i + 1.0);
  }
  EventSequence len30 = seq, len29 = seq;
  len30.marks.resize(30);
  len30.times.resize(30);
  len29.marks.resize(29);
  len29.times.resize(29);

  CHECK(make_windows(len30, 20, 10, 1).size() == 1);
  CHECK(make_windows(seq, 20, 10, 1).size() == 3);  // 32 - 30 + 1
  CHECK(make_windows(len29, 20, 10, 1).empty());

  // Concatenating history and target reproduces a contiguous slice.
  const auto windows = make_windows(seq, 20, 10, 1);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    CHECK(win.anchor == win.history.times.back());
    CHECK(win.target.times.front() > win.anchor);
    for (int i = 0; i < 20; ++i) CHECK(win.history.times[i] == seq.times[w + i]);
    for (int i = 0; i < 10; ++i) {
      CHECK(win.target.times[i] == seq.times[w + 20 + i]);
      CHECK(win.target.marks[i] == seq.marks[w + 20 + i]);
    }
  }
}

TEST_CASE("split_sequences: disjoint, exhaustive, seeded") {
  const SplitIndices s = split_sequences(100, 42);
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);
  std::vector<bool> seen(100, false);
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const int i : *part) {
      CHECK(!seen[i]);
      seen[i] = true;
    }
  const SplitIndices s2 = split_sequences(100, 42);
  CHECK(s.train == s2.train);
  const SplitIndices s3 = split_sequences(100, 43);
  CHECK(s.train != s3.train);
}

TEST_CASE("hawkes: zero kernels reduce to a Poisson process (analytic mean oracle)") {
  HawkesModel m;
  m.base_rates = Eigen::VectorXd::Constant(1, 0.7);
  m.kernels = {{ExpKernel{0.0, 1.0}}};
  m.horizon = 10.0;
  const int runs = 10000;
  const auto seqs = hawkes_generate(m, runs, 99);
  double total = 0;
  for (const auto& s : seqs) total += static_cast<double>(s.size());
  const double mean = total / runs;
  const double expected = 0.7 * 10.0;  // mu * T
  const double se = std::sqrt(expected / runs);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("hawkes: deterministic under a fixed seed") {
  const HawkesModel m = HawkesModel::random_from_menu(3, 20.0, 0.4, 7);
  const auto a = hawkes_generate(m, 5, 123);
  const auto b = hawkes_generate(m, 5, 123);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].marks == b[i].marks);
    CHECK(a[i].times == b[i].times);
  }
  const auto c = hawkes_generate(m, 5, 124);
  CHECK(a[0].times != c[0].times);
}

TEST_CASE("hawkes: self-exciting stationary rate matches mu/(1-alpha) within 5%") {
  HawkesModel m;
  m.base_rates = Eigen::VectorXd::Constant(1, 1.0);
  m.kernels = {{ExpKernel{0.5, 1.0}}};  // branching ratio 0.5
  m.horizon = 200.0;
  const int runs = 300;
  const auto seqs = hawkes_generate(m, runs, 17);
  double total = 0;
  for (const auto& s : seqs) total += static_cast<double>(s.size());
  const double rate = total / (runs * m.horizon);
  const double expected = 1.0 / (1.0 - 0.5);
  CHECK(std::abs(rate - expected) / expected < 0.05);
}

TEST_CASE("hawkes: generated sequences satisfy strict monotonicity and mark range") {
  const HawkesModel m = HawkesModel::random_from_menu(5, 25.0, 0.3, 21);
  const auto seqs = hawkes_generate(m, 50, 55);
  for (const auto& s : seqs) s.validate(5, "generated");
}

TEST_CASE("hawkes: mean sequence length stable across seeds") {
  const HawkesModel m = HawkesModel::random_from_menu(5, 25.0, 0.3, 21);
  auto mean_len = [&](std::uint64_t seed) {
    const auto seqs = hawkes_generate(m, 200, seed);
    double total = 0;
    for (const auto& s : seqs) total += static_cast<double>(s.size());
    return total / 200.0;
  };
  const double a = mean_len(1), b = mean_len(2);
  CHECK(std::abs(a - b) / a < 0.10);
}

TEST_CASE("hawkes: misconfiguration errors") {
  HawkesModel m;
  m.base_rates = Eigen::VectorXd::Zero(2);
  m.kernels = {{ExpKernel{}, ExpKernel{}}, {ExpKernel{}, ExpKernel{}}};
  m.horizon = 10.0;
  CHECK_THROWS_AS(hawkes_generate(m, 1, 1), ConfigError);
  m.base_rates = Eigen::VectorXd::Constant(2, 0.5);
  m.horizon = 0.0;
  CHECK_THROWS_AS(hawkes_generate(m, 1, 1), ConfigError);
}

TEST_CASE("dataset: load builds manifest, normalizes, and splits disjointly") {
  const std::string p = temp_file("evdiff_ds.jsonl");
  std::vector<EventSequence> seqs;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    EventSequence s;
    double t = 0;
    for (int j = 0; j < 8; ++j) {
      t += 0.5 + rng.uniform();
      s.times.push_back(t);
      s.marks.push_back(rng.uniform_int(0, 2));
    }
    seqs.push_back(std::move(s));
  }
  save_jsonl(p, seqs, 3);
  const Dataset d = Dataset::load(p, "", 11);
  CHECK(d.manifest.num_marks == 3);
  double max_t = 0;
  for (const auto& s : d.sequences) max_t = std::max(max_t, s.times.back());
  CHECK(max_t == 100.0);
  CHECK(d.manifest.splits.train.size() == 6);
  CHECK(!d.manifest.content_hash.empty());

  // Manifest round trip.
  const std::string mp = temp_file("evdiff_ds.manifest.json");
  d.manifest.save(mp);
  const Dataset d2 = Dataset::load(p, mp, 999);  // seed ignored with manifest
  CHECK(d2.manifest.splits.train == d.manifest.splits.train);
  CHECK(d2.manifest.scale == doctest::Approx(d.manifest.scale));
  std::filesystem::remove(p);
  std::filesystem::remove(mp);
}
