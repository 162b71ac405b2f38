#include "hypomimia/feature_processing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {
// Below this, a group is treated as constant and carries no deviation
// signal; the z-score degenerates to 0 instead of dividing by ~0.
constexpr double kStdGuard = 1e-12;
}  // namespace

void IntensityRecord::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] <= 0.0) {
      throw DataError("intensity record " + subject_id + ": value " +
                      std::to_string(i + 1) + " is not a positive finite real");
    }
  }
}

std::array<std::array<double, kGroupSize>, kGroupCount> group(
    const IntensityRecord& record) {
  record.validate();
  std::array<std::array<double, kGroupSize>, kGroupCount> groups;
  for (std::size_t j = 0; j < kGroupCount; ++j) {
    for (std::size_t i = 0; i < kGroupSize; ++i) {
      groups[j][i] = record.values[j * kGroupSize + i];
    }
  }
  return groups;
}

GroupStats group_stats(const std::array<double, kGroupSize>& values,
                       std::size_t j) {
  if (j < 1 || j > kGroupCount) {
    throw DataError("group index must lie in 1..4, got " + std::to_string(j));
  }
  GroupStats s;
  s.group_index = j;
  s.hv = values[j - 1];
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(kGroupSize);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(sq / static_cast<double>(kGroupSize));
  s.zscore = s.std_dev < kStdGuard ? 0.0 : (s.hv - s.mean) / s.std_dev;
  s.pd = (s.hv - s.mean) / s.mean;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  s.range = hi - lo;
  s.dmin = s.hv - lo;
  s.dmax = s.hv - hi;
  return s;
}

std::array<GroupStats, kGroupCount> process_record(const IntensityRecord& record) {
  auto groups = group(record);
  std::array<GroupStats, kGroupCount> stats;
  for (std::size_t j = 0; j < kGroupCount; ++j) {
    stats[j] = group_stats(groups[j], j + 1);
  }
  return stats;
}

std::string_view to_string(SequenceMode mode) {
  return mode == SequenceMode::Raw ? "raw" : "processed";
}

SequenceMode parse_sequence_mode(std::string_view s) {
  if (s == "raw") return SequenceMode::Raw;
  if (s == "processed") return SequenceMode::Processed;
  throw ConfigError("unknown sequence mode: " + std::string(s));
}

std::size_t sequence_dim(SequenceMode mode) {
  return mode == SequenceMode::Raw ? kGroupSize : kGroupSize + kStatsPerGroup;
}

ClassifierSequence assemble_sequence(const IntensityRecord& record,
                                     SequenceMode mode) {
  auto groups = group(record);
  ClassifierSequence seq;
  seq.mode = mode;
  seq.timesteps.reserve(kGroupCount);
  for (std::size_t j = 0; j < kGroupCount; ++j) {
    std::vector<double> step(groups[j].begin(), groups[j].end());
    if (mode == SequenceMode::Processed) {
      GroupStats s = group_stats(groups[j], j + 1);
      step.insert(step.end(), {s.hv, s.mean, s.std_dev, s.zscore, s.pd, s.range,
                               s.dmin, s.dmax});
    }
    std::size_t dim = step.size();
    seq.timesteps.push_back(Tensor::from_data({dim}, std::move(step)));
  }
  return seq;
}

void write_records_jsonl(std::ostream& out,
                         std::span<const IntensityRecord> records,
                         bool with_stats) {
  for (const IntensityRecord& record : records) {
    record.validate();
    nlohmann::ordered_json line;
    line["subject_id"] = record.subject_id;
    line["diagnosis"] = record.diagnosis
                            ? nlohmann::ordered_json(to_string(*record.diagnosis))
                            : nlohmann::ordered_json(nullptr);
    line["values"] = record.values;
    if (with_stats) {
      auto stats = process_record(record);
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const GroupStats& s : stats) {
        rows.push_back({s.hv, s.mean, s.std_dev, s.zscore, s.pd, s.range, s.dmin,
                        s.dmax});
      }
      line["stats"] = std::move(rows);
    }
    out << line.dump() << '\n';
  }
}

void write_records_jsonl(const std::filesystem::path& path,
                         std::span<const IntensityRecord> records,
                         bool with_stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_records_jsonl(out, records, with_stats);
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<IntensityRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<IntensityRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
    IntensityRecord record;
    try {
      record.subject_id = parsed.at("subject_id").get<std::string>();
      const auto& diag = parsed.at("diagnosis");
      if (!diag.is_null()) {
        record.diagnosis = parse_diagnosis(diag.get<std::string>());
      }
      const auto& values = parsed.at("values");
      if (values.size() != record.values.size()) {
        throw DataError("expected 16 values, got " +
                        std::to_string(values.size()));
      }
      for (std::size_t i = 0; i < record.values.size(); ++i) {
        record.values[i] = values.at(i).get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
    record.validate();
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace hypomimia
