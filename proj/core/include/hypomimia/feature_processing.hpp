#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypomimia/labels.hpp"
#include "hypomimia/tensor.hpp"

namespace hypomimia {

/// The 16 expression intensities of one subject: 4 videos (canonical
/// expression order) x 4 class scores, video-major. All values are
/// strictly positive.
struct IntensityRecord {
  std::array<double, 16> values{};
  std::string subject_id;
  std::optional<Diagnosis> diagnosis;

  void validate() const;  // DataError unless 16 finite positives
};

/// The eight per-group statistics. Group j's highlight value hv is the
/// group's j-th element — the score of video j against its own class.
struct GroupStats {
  double hv = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;  // population form: divide by the group size 4
  double zscore = 0.0;   // 0 when std_dev < 1e-12
  double pd = 0.0;       // (hv - mean) / mean
  double range = 0.0;
  double dmin = 0.0;  // hv - min, always >= 0
  double dmax = 0.0;  // hv - max, always <= 0
  std::size_t group_index = 0;  // j in 1..4
};

inline constexpr std::size_t kGroupCount = 4;
inline constexpr std::size_t kGroupSize = 4;
inline constexpr std::size_t kStatsPerGroup = 8;

// Group j = (i_{4(j-1)+1} .. i_{4j}), order preserved.
std::array<std::array<double, kGroupSize>, kGroupCount> group(
    const IntensityRecord& record);

// The eight statistics for one group; j is 1-based.
GroupStats group_stats(const std::array<double, kGroupSize>& values,
                       std::size_t j);

std::array<GroupStats, kGroupCount> process_record(const IntensityRecord& record);

enum class SequenceMode { Raw, Processed };

std::string_view to_string(SequenceMode mode);
SequenceMode parse_sequence_mode(std::string_view s);
std::size_t sequence_dim(SequenceMode mode);  // 4 or 12

/// The classifier input: 4 timesteps, one per group. Raw mode carries the
/// 4 group values; processed mode appends the 8 statistics in the order
/// hv, mean, std, zscore, pd, range, dmin, dmax.
struct ClassifierSequence {
  std::vector<Tensor> timesteps;  // 4 tensors of [dim]
  SequenceMode mode = SequenceMode::Raw;
};

ClassifierSequence assemble_sequence(const IntensityRecord& record,
                                     SequenceMode mode);

// JSON-lines persistence: one subject per line with subject_id, diagnosis,
// values[16] and, when requested, stats[4][8].
void write_records_jsonl(std::ostream& out,
                         std::span<const IntensityRecord> records,
                         bool with_stats);
void write_records_jsonl(const std::filesystem::path& path,
                         std::span<const IntensityRecord> records,
                         bool with_stats);
std::vector<IntensityRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace hypomimia
