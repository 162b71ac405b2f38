#include "hypomimia/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {

constexpr std::size_t kHeaderBytes = 4 + 4 * sizeof(std::uint32_t);
constexpr double kPi = 3.14159265358979323846;

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

double contrast_at(double a0, double amp, double period, std::size_t t) {
  return a0 + amp * std::sin(2.0 * kPi * static_cast<double>(t) / period);
}

nlohmann::json parse_jsonl_line(const std::filesystem::path& path,
                                const std::string& line, std::size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                    e.what());
  }
}

}  // namespace

std::size_t write_frames(const std::filesystem::path& path,
                         std::span<const Tensor> frames) {
  if (frames.empty()) throw DataError("write_frames: no frames");
  const std::vector<std::size_t>& shape = frames.front().shape();
  if (shape.size() != 3) {
    throw ShapeError("write_frames: frames must be [h x w x c], got " +
                     frames.front().shape_str());
  }
  for (const Tensor& frame : frames) {
    if (frame.shape() != shape) {
      throw ShapeError("write_frames: mixed frame shapes " +
                       frames.front().shape_str() + " vs " + frame.shape_str());
    }
  }
  std::string bytes;
  bytes.reserve(kHeaderBytes + frames.size() * frames.front().numel() * 4);
  bytes.append(kFrameMagic, 4);
  put_u32_le(bytes, static_cast<std::uint32_t>(frames.size()));
  for (std::size_t d : shape) put_u32_le(bytes, static_cast<std::uint32_t>(d));
  std::size_t clamped = 0;
  for (const Tensor& frame : frames) {
    for (double v : frame.data()) {
      double c = std::clamp(v, 0.0, 1.0);
      if (c != v) ++clamped;
      std::uint32_t raw = std::bit_cast<std::uint32_t>(static_cast<float>(c));
      put_u32_le(bytes, raw);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
  return clamped;
}

std::vector<Tensor> read_frames(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFrameMagic, 4) != 0) {
    throw DataError(path.string() + ": bad magic at offset 0");
  }
  if (bytes.size() < kHeaderBytes) {
    throw DataError(path.string() + ": truncated header at offset 4");
  }
  std::uint32_t n_frames = get_u32_le(p + 4);
  std::uint32_t height = get_u32_le(p + 8);
  std::uint32_t width = get_u32_le(p + 12);
  std::uint32_t channels = get_u32_le(p + 16);
  if (n_frames == 0 || height == 0 || width == 0 || channels == 0) {
    throw DataError(path.string() + ": zero dimension in header at offset 4");
  }
  // Guard the element-count product before using it for sizing.
  std::uint64_t per_frame = static_cast<std::uint64_t>(height) * width * channels;
  std::uint64_t total = per_frame * n_frames;
  if (per_frame > std::numeric_limits<std::uint32_t>::max() ||
      total > std::numeric_limits<std::size_t>::max() / sizeof(float)) {
    throw DataError(path.string() + ": dimension overflow in header at offset 4");
  }
  std::size_t expected = kHeaderBytes + static_cast<std::size_t>(total) * 4;
  if (bytes.size() < expected) {
    throw DataError(path.string() + ": payload truncated at offset " +
                    std::to_string(bytes.size()) + ", header at offset 4 promises " +
                    std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw DataError(path.string() + ": trailing bytes at offset " +
                    std::to_string(expected));
  }
  std::vector<Tensor> frames;
  frames.reserve(n_frames);
  std::size_t offset = kHeaderBytes;
  for (std::uint32_t i = 0; i < n_frames; ++i) {
    Tensor frame({height, width, channels});
    for (std::size_t j = 0; j < frame.numel(); ++j) {
      float f = std::bit_cast<float>(get_u32_le(p + offset));
      frame[j] = static_cast<double>(f);
      offset += 4;
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_expression_manifest(const std::filesystem::path& path,
                               std::span<const ExpressionManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const ExpressionManifestEntry& entry : entries) {
    nlohmann::ordered_json line;
    line["path"] = entry.path;
    line["label"] = to_string(entry.label);
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<ExpressionManifestEntry> read_expression_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ExpressionManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json parsed = parse_jsonl_line(path, line, line_no);
    try {
      ExpressionManifestEntry entry;
      entry.path = parsed.at("path").get<std::string>();
      entry.label = parse_expression_label(parsed.at("label").get<std::string>());
      entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return entries;
}

void write_subject_manifest(const std::filesystem::path& path,
                            std::span<const SubjectManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const SubjectManifestEntry& entry : entries) {
    nlohmann::ordered_json videos;
    for (std::size_t j = 0; j < kNumExpressions; ++j) {
      videos[std::string(to_string(kExpressionOrder[j]))] = entry.videos[j];
    }
    nlohmann::ordered_json line;
    line["subject_id"] = entry.subject_id;
    line["diagnosis"] = to_string(entry.diagnosis);
    line["videos"] = std::move(videos);
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<SubjectManifestEntry> read_subject_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<SubjectManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json parsed = parse_jsonl_line(path, line, line_no);
    try {
      SubjectManifestEntry entry;
      entry.subject_id = parsed.at("subject_id").get<std::string>();
      entry.diagnosis = parse_diagnosis(parsed.at("diagnosis").get<std::string>());
      const auto& videos = parsed.at("videos");
      if (videos.size() != kNumExpressions) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": subject must list exactly the four expressions");
      }
      for (std::size_t j = 0; j < kNumExpressions; ++j) {
        entry.videos[j] =
            videos.at(std::string(to_string(kExpressionOrder[j]))).get<std::string>();
      }
      entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return entries;
}

void SyntheticConfig::validate() const {
  if (per_class == 0 || subjects_per_cohort == 0 || records_per_cohort == 0) {
    throw ConfigError("synthetic config: counts must be >= 1");
  }
  if (image_size == 0 || channels == 0 || clip_frames == 0) {
    throw ConfigError("synthetic config: geometry must be positive");
  }
  if (noise_sigma < 0.0 || intensity_sigma < 0.0) {
    throw ConfigError("synthetic config: sigmas must be >= 0");
  }
  if (base_amplitude < 0.0 || osc_amplitude < 0.0) {
    throw ConfigError("synthetic config: amplitudes must be >= 0");
  }
  if (!(period > 0.0)) throw ConfigError("synthetic config: period must be > 0");
  if (!(damp_static > 0.0) || !(damp_dynamic > 0.0)) {
    throw ConfigError("synthetic config: damp factors must be > 0");
  }
  if (!(diag_mean_hc > 0.0) || !(diag_mean_pd > 0.0) || !(offdiag_mean > 0.0)) {
    throw ConfigError("synthetic config: intensity means must be > 0");
  }
}

std::vector<Tensor> synth_clip(const SyntheticConfig& config,
                               ExpressionLabel label, double a0, double amp,
                               SeededRng& rng) {
  std::size_t s = config.image_size;
  std::size_t c = config.channels;
  double theta = static_cast<double>(label) * kPi / 4.0;  // class * 45 degrees
  double ct = std::cos(theta), st = std::sin(theta);
  std::vector<Tensor> frames;
  frames.reserve(config.clip_frames);
  for (std::size_t t = 0; t < config.clip_frames; ++t) {
    double a = contrast_at(a0, amp, config.period, t);
    Tensor frame({s, s, c});
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        double u = (static_cast<double>(x) * ct + static_cast<double>(y) * st) /
                   static_cast<double>(s);
        double pattern = std::sin(2.0 * kPi * config.spatial_freq * u);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double v = 0.5 + a * pattern;
          if (config.noise_sigma > 0.0) {
            v += rng.normal(0.0, config.noise_sigma);
          }
          // Quantize through f32 so the on-disk format reproduces the
          // in-memory value bit-exactly.
          frame[(y * s + x) * c + ch] = static_cast<double>(
              static_cast<float>(std::clamp(v, 0.0, 1.0)));
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<ExpressionManifestEntry> synth_expression_videos(
    const SyntheticConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  SeededRng root(config.seed);
  std::vector<ExpressionManifestEntry> entries;
  for (std::size_t cls = 0; cls < kNumExpressions; ++cls) {
    ExpressionLabel label = kExpressionOrder[cls];
    for (std::size_t i = 0; i < config.per_class; ++i) {
      SeededRng clip_rng = root.fork(cls * 100000 + i);
      std::vector<Tensor> frames = synth_clip(config, label, config.base_amplitude,
                                              config.osc_amplitude, clip_rng);
      ExpressionManifestEntry entry;
      entry.path = "expr_" + std::string(to_string(label)) + "_" +
                   std::to_string(i) + ".ftb";
      entry.label = label;
      write_frames(out_dir / entry.path, frames);
      entries.push_back(std::move(entry));
    }
  }
  write_expression_manifest(out_dir / "manifest.jsonl", entries);
  return entries;
}

std::vector<SubjectManifestEntry> synth_subject_videos(
    const SyntheticConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  SeededRng root(config.seed);
  std::vector<SubjectManifestEntry> entries;
  for (std::size_t cohort = 0; cohort < 2; ++cohort) {
    Diagnosis diagnosis = static_cast<Diagnosis>(cohort);
    double a0 = config.base_amplitude;
    double amp = config.osc_amplitude;
    if (diagnosis == Diagnosis::PD) {
      a0 *= config.damp_static;    // expression absence: weaker contrast
      amp *= config.damp_dynamic;  // rigidity: flatter temporal modulation
    }
    for (std::size_t i = 0; i < config.subjects_per_cohort; ++i) {
      SubjectManifestEntry entry;
      char id[16];
      std::snprintf(id, sizeof(id), "%s_%03zu",
                    diagnosis == Diagnosis::PD ? "pd" : "hc", i);
      entry.subject_id = id;
      entry.diagnosis = diagnosis;
      for (std::size_t j = 0; j < kNumExpressions; ++j) {
        SeededRng clip_rng = root.fork((cohort * 1000 + i) * 16 + j);
        std::vector<Tensor> frames =
            synth_clip(config, kExpressionOrder[j], a0, amp, clip_rng);
        entry.videos[j] = entry.subject_id + "_" +
                          std::string(to_string(kExpressionOrder[j])) + ".ftb";
        write_frames(out_dir / entry.videos[j], frames);
      }
      entries.push_back(std::move(entry));
    }
  }
  write_subject_manifest(out_dir / "subjects.jsonl", entries);
  return entries;
}

std::vector<IntensityRecord> synth_intensity_records(const SyntheticConfig& config) {
  config.validate();
  SeededRng root(config.seed);
  std::vector<IntensityRecord> records;
  for (std::size_t cohort = 0; cohort < 2; ++cohort) {
    Diagnosis diagnosis = static_cast<Diagnosis>(cohort);
    double diag_mean =
        diagnosis == Diagnosis::PD ? config.diag_mean_pd : config.diag_mean_hc;
    for (std::size_t i = 0; i < config.records_per_cohort; ++i) {
      SeededRng rng = root.fork(0x5eed0000 + cohort * 100000 + i);
      IntensityRecord record;
      char id[16];
      std::snprintf(id, sizeof(id), "%s_%03zu",
                    diagnosis == Diagnosis::PD ? "pd" : "hc", i);
      record.subject_id = id;
      record.diagnosis = diagnosis;
      for (std::size_t j = 0; j < kNumExpressions; ++j) {
        for (std::size_t c = 0; c < kNumExpressions; ++c) {
          double mu = j == c ? diag_mean : config.offdiag_mean;
          record.values[j * kNumExpressions + c] =
              std::exp(rng.normal(std::log(mu), config.intensity_sigma));
        }
      }
      records.push_back(std::move(record));
    }
  }
  return records;
}

std::vector<FrameSequence> load_expression_dataset(
    const std::filesystem::path& manifest_path, std::size_t m) {
  std::filesystem::path root = manifest_path.parent_path();
  std::vector<FrameSequence> dataset;
  for (const ExpressionManifestEntry& entry :
       read_expression_manifest(manifest_path)) {
    dataset.push_back(sample_frames(read_frames(root / entry.path), m, entry.label));
  }
  return dataset;
}

std::vector<SubjectVideos> load_subject_dataset(
    const std::filesystem::path& manifest_path, std::size_t m) {
  std::filesystem::path root = manifest_path.parent_path();
  std::vector<SubjectVideos> dataset;
  for (const SubjectManifestEntry& entry : read_subject_manifest(manifest_path)) {
    SubjectVideos subject;
    subject.subject_id = entry.subject_id;
    subject.diagnosis = entry.diagnosis;
    for (std::size_t j = 0; j < kNumExpressions; ++j) {
      subject.videos[j] = sample_frames(read_frames(root / entry.videos[j]), m,
                                        kExpressionOrder[j]);
    }
    dataset.push_back(std::move(subject));
  }
  return dataset;
}

}  // namespace hypomimia
