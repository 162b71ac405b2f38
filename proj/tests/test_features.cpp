#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "hypomimia/errors.hpp"
#include "hypomimia/feature_processing.hpp"
#include "hypomimia/rng.hpp"

using namespace hypomimia;

namespace {

// Brute-force restatement of the group statistics, written independently of
// the library code so both cannot share a mistake.
struct OracleStats {
  double hv, mean, sd, z, pd, range, dmin, dmax;
};

OracleStats oracle(const std::array<double, 4>& g, std::size_t j) {
  OracleStats o{};
  o.hv = g[j - 1];
  o.mean = (g[0] + g[1] + g[2] + g[3]) / 4.0;
  double acc = 0.0;
  for (double v : g) acc += (v - o.mean) * (v - o.mean);
  o.sd = std::sqrt(acc / 4.0);
  o.z = o.sd < 1e-12 ? 0.0 : (o.hv - o.mean) / o.sd;
  o.pd = (o.hv - o.mean) / o.mean;
  double mn = g[0], mx = g[0];
  for (double v : g) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  o.range = mx - mn;
  o.dmin = o.hv - mn;
  o.dmax = o.hv - mx;
  return o;
}

IntensityRecord record_1_to_16() {
  IntensityRecord r;
  for (std::size_t i = 0; i < 16; ++i) r.values[i] = double(i + 1);
  r.subject_id = "seq";
  return r;
}

IntensityRecord random_record(SeededRng& rng) {
  IntensityRecord r;
  for (double& v : r.values) v = rng.uniform(0.05, 20.0);
  r.subject_id = "r";
  return r;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("grouping splits sixteen values in order") {
  auto groups = group(record_1_to_16());
  CHECK(groups[0] == std::array<double, 4>{1, 2, 3, 4});
  CHECK(groups[1] == std::array<double, 4>{5, 6, 7, 8});
  CHECK(groups[3] == std::array<double, 4>{13, 14, 15, 16});
  // concatenating the groups reproduces the record
  std::size_t i = 0;
  for (const auto& g : groups)
    for (double v : g) CHECK(v == record_1_to_16().values[i++]);
}

TEST_CASE("group statistics on a worked example") {
  GroupStats s = group_stats({2, 1, 1, 0}, 1);
  CHECK(s.hv == 2.0);
  CHECK(s.mean == 1.0);
  CHECK(s.std_dev == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(s.zscore == doctest::Approx(1.4142135623730951).epsilon(1e-15));
  CHECK(s.pd == 1.0);
  CHECK(s.range == 2.0);
  CHECK(s.dmin == 2.0);
  CHECK(s.dmax == 0.0);
  CHECK(s.group_index == 1);

  GroupStats s2 = group_stats({5, 6, 7, 8}, 2);
  CHECK(s2.hv == 6.0);  // j-th element, not the max
  CHECK(s2.dmax == -2.0);
  CHECK(s2.dmin == 1.0);
}

TEST_CASE("constant group degenerates cleanly") {
  GroupStats s = group_stats({3, 3, 3, 3}, 4);
  CHECK(s.hv == 3.0);
  CHECK(s.mean == 3.0);
  CHECK(s.std_dev == 0.0);
  CHECK(s.zscore == 0.0);  // guarded division
  CHECK(s.pd == 0.0);
  CHECK(s.range == 0.0);
  CHECK(s.dmin == 0.0);
  CHECK(s.dmax == 0.0);
}

TEST_CASE("group index is validated") {
  CHECK_THROWS_AS(group_stats({1, 2, 3, 4}, 0), DataError);
  CHECK_THROWS_AS(group_stats({1, 2, 3, 4}, 5), DataError);
}

TEST_CASE("library statistics match the brute-force oracle") {
  SeededRng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    IntensityRecord r = random_record(rng);
    auto groups = group(r);
    auto stats = process_record(r);
    for (std::size_t j = 1; j <= 4; ++j) {
      OracleStats o = oracle(groups[j - 1], j);
      const GroupStats& s = stats[j - 1];
      CHECK(std::abs(s.hv - o.hv) < 1e-12);
      CHECK(std::abs(s.mean - o.mean) < 1e-12);
      CHECK(std::abs(s.std_dev - o.sd) < 1e-12);
      CHECK(std::abs(s.zscore - o.z) < 1e-12);
      CHECK(std::abs(s.pd - o.pd) < 1e-12);
      CHECK(std::abs(s.range - o.range) < 1e-12);
      CHECK(std::abs(s.dmin - o.dmin) < 1e-12);
      CHECK(std::abs(s.dmax - o.dmax) < 1e-12);
      CHECK(s.group_index == j);
    }
  }
}

TEST_CASE("highlight values sit at positions 1, 6, 11, 16") {
  IntensityRecord r = record_1_to_16();
  auto stats = process_record(r);
  CHECK(stats[0].hv == r.values[0]);
  CHECK(stats[1].hv == r.values[5]);
  CHECK(stats[2].hv == r.values[10]);
  CHECK(stats[3].hv == r.values[15]);
}

TEST_CASE("diagonally dominant record yields positive deviations") {
  IntensityRecord r;
  r.subject_id = "dom";
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t c = 0; c < 4; ++c) {
      r.values[4 * j + c] = (j == c) ? 5.0 + double(j) : 1.0 + 0.1 * double(c);
    }
  }
  for (const GroupStats& s : process_record(r)) {
    CHECK(s.pd > 0.0);
    CHECK(s.zscore > 0.0);
    CHECK(s.dmax == 0.0);  // highlight is the maximum
    CHECK(s.dmin > 0.0);
  }
}

TEST_CASE("scale-free statistics are invariant under positive scaling") {
  SeededRng rng(78);
  for (int trial = 0; trial < 200; ++trial) {
    IntensityRecord r = random_record(rng);
    double alpha = rng.uniform(0.1, 50.0);
    IntensityRecord scaled = r;
    for (double& v : scaled.values) v *= alpha;
    auto a = process_record(r);
    auto b = process_record(scaled);
    for (std::size_t j = 0; j < 4; ++j) {
      // zscore and pd are ratios; they shrug off a global gain change.
      CHECK(std::abs(a[j].zscore - b[j].zscore) < 1e-9);
      CHECK(std::abs(a[j].pd - b[j].pd) < 1e-9);
      // the rest scale linearly
      CHECK(std::abs(b[j].range - alpha * a[j].range) <
            1e-9 * std::max(1.0, std::abs(a[j].range)) * alpha);
    }
  }
}

TEST_CASE("statistics of one group ignore the other groups") {
  SeededRng rng(79);
  IntensityRecord r = random_record(rng);
  IntensityRecord tweaked = r;
  for (std::size_t i = 4; i < 16; ++i) tweaked.values[i] = rng.uniform(0.05, 20.0);
  auto a = process_record(r);
  auto b = process_record(tweaked);
  CHECK(a[0].hv == b[0].hv);
  CHECK(a[0].mean == b[0].mean);
  CHECK(a[0].zscore == b[0].zscore);
  CHECK(a[0].dmax == b[0].dmax);
}

TEST_CASE("raw sequence carries the groups verbatim") {
  IntensityRecord r = record_1_to_16();
  ClassifierSequence seq = assemble_sequence(r, SequenceMode::Raw);
  CHECK(seq.mode == SequenceMode::Raw);
  REQUIRE(seq.timesteps.size() == 4);
  auto groups = group(r);
  for (std::size_t j = 0; j < 4; ++j) {
    REQUIRE(seq.timesteps[j].numel() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(seq.timesteps[j][c] == groups[j][c]);
    }
  }
}

TEST_CASE("processed sequence prepends the raw group then the statistics") {
  SeededRng rng(80);
  IntensityRecord r = random_record(rng);
  ClassifierSequence raw = assemble_sequence(r, SequenceMode::Raw);
  ClassifierSequence proc = assemble_sequence(r, SequenceMode::Processed);
  auto stats = process_record(r);
  REQUIRE(proc.timesteps.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    REQUIRE(proc.timesteps[j].numel() == 12);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(proc.timesteps[j][c] == raw.timesteps[j][c]);
    }
    const GroupStats& s = stats[j];
    const double expected[8] = {s.hv,  s.mean,  s.std_dev, s.zscore,
                                s.pd,  s.range, s.dmin,    s.dmax};
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(proc.timesteps[j][4 + k] == expected[k]);
    }
  }
}

TEST_CASE("constant record maps to the closed-form timestep") {
  IntensityRecord r;
  r.subject_id = "c";
  for (double& v : r.values) v = 2.5;
  ClassifierSequence seq = assemble_sequence(r, SequenceMode::Processed);
  for (const Tensor& step : seq.timesteps) {
    // (c, c, c, c, hv=c, mean=c, 0, 0, 0, 0, 0, 0)
    for (std::size_t i = 0; i < 6; ++i) CHECK(step[i] == 2.5);
    for (std::size_t i = 6; i < 12; ++i) CHECK(step[i] == 0.0);
  }
}

TEST_CASE("sequence mode names and dimensions round-trip") {
  CHECK(sequence_dim(SequenceMode::Raw) == 4);
  CHECK(sequence_dim(SequenceMode::Processed) == 12);
  CHECK(parse_sequence_mode("raw") == SequenceMode::Raw);
  CHECK(parse_sequence_mode("processed") == SequenceMode::Processed);
  CHECK(to_string(SequenceMode::Raw) == "raw");
  CHECK(to_string(SequenceMode::Processed) == "processed");
  CHECK(parse_sequence_mode(to_string(SequenceMode::Processed)) ==
        SequenceMode::Processed);
  CHECK_THROWS_AS(parse_sequence_mode("cooked"), ConfigError);
}

TEST_CASE("record validation rejects non-positive and non-finite entries") {
  SeededRng rng(81);
  IntensityRecord r = random_record(rng);
  CHECK_NOTHROW(r.validate());
  IntensityRecord zero = r;
  zero.values[3] = 0.0;
  CHECK_THROWS_AS(zero.validate(), DataError);
  IntensityRecord neg = r;
  neg.values[9] = -0.5;
  CHECK_THROWS_AS(neg.validate(), DataError);
  IntensityRecord nan = r;
  nan.values[15] = std::nan("");
  CHECK_THROWS_AS(nan.validate(), DataError);
}

TEST_CASE("jsonl round-trip preserves every bit") {
  SeededRng rng(82);
  std::vector<IntensityRecord> records;
  for (int i = 0; i < 20; ++i) {
    IntensityRecord r = random_record(rng);
    r.subject_id = "subject-" + std::to_string(i);
    if (i % 3 == 0) r.diagnosis = Diagnosis::PD;
    if (i % 3 == 1) r.diagnosis = Diagnosis::HC;
    records.push_back(std::move(r));
  }
  auto path = temp_file("features_roundtrip.jsonl");
  write_records_jsonl(path, records, false);
  auto back = read_records_jsonl(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].subject_id == records[i].subject_id);
    CHECK(back[i].diagnosis == records[i].diagnosis);
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK(back[i].values[k] == records[i].values[k]);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("jsonl stats block is emitted on request and ignored on read") {
  SeededRng rng(83);
  std::vector<IntensityRecord> records = {random_record(rng)};
  std::ostringstream with, without;
  write_records_jsonl(with, records, true);
  write_records_jsonl(without, records, false);
  CHECK(with.str().find("\"stats\"") != std::string::npos);
  CHECK(without.str().find("\"stats\"") == std::string::npos);

  auto path = temp_file("features_stats.jsonl");
  write_records_jsonl(path, records, true);
  auto back = read_records_jsonl(path);
  REQUIRE(back.size() == 1);
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(back[0].values[k] == records[0].values[k]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("jsonl reader names the file and line on malformed input") {
  auto path = temp_file("features_bad.jsonl");
  {
    std::ofstream out(path);
    SeededRng rng(84);
    std::vector<IntensityRecord> one = {random_record(rng)};
    write_records_jsonl(out, one, false);
    out << "{ not json\n";
  }
  try {
    read_records_jsonl(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("features_bad.jsonl") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);  // the offending line
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_records_jsonl(temp_file("missing_features.jsonl")),
                  DataError);
}

TEST_CASE("jsonl reader rejects wrong-arity and non-positive values") {
  auto path = temp_file("features_arity.jsonl");
  {
    std::ofstream out(path);
    out << R"({"subject_id":"a","values":[1,2,3]})" << "\n";
  }
  CHECK_THROWS_AS(read_records_jsonl(path), DataError);
  {
    std::ofstream out(path);
    out << R"({"subject_id":"a","values":[0,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1]})"
        << "\n";
  }
  CHECK_THROWS_AS(read_records_jsonl(path), DataError);
  std::filesystem::remove(path);
}
