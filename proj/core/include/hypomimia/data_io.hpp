#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hypomimia/expression_model.hpp"
#include "hypomimia/feature_processing.hpp"
#include "hypomimia/labels.hpp"
#include "hypomimia/rng.hpp"
#include "hypomimia/tensor.hpp"

namespace hypomimia {

/// Binary frame container: magic "FTB1", header of four u32 LE
/// (n_frames, height, width, channels), then f32 LE payload, frame-major,
/// row-major, channel-last, values in [0,1].
inline constexpr char kFrameMagic[4] = {'F', 'T', 'B', '1'};

// Frames must share one [h x w x c] shape. Values outside [0,1] are
// clamped; the return value counts clamped samples so callers can warn.
std::size_t write_frames(const std::filesystem::path& path,
                         std::span<const Tensor> frames);
std::vector<Tensor> read_frames(const std::filesystem::path& path);

struct ExpressionManifestEntry {
  std::string path;  // relative to the manifest's directory
  ExpressionLabel label = ExpressionLabel::Neutral;
};

struct SubjectManifestEntry {
  std::string subject_id;
  Diagnosis diagnosis = Diagnosis::HC;
  std::array<std::string, kNumExpressions> videos;  // canonical order
};

void write_expression_manifest(const std::filesystem::path& path,
                               std::span<const ExpressionManifestEntry> entries);
std::vector<ExpressionManifestEntry> read_expression_manifest(
    const std::filesystem::path& path);
void write_subject_manifest(const std::filesystem::path& path,
                            std::span<const SubjectManifestEntry> entries);
std::vector<SubjectManifestEntry> read_subject_manifest(
    const std::filesystem::path& path);

struct SyntheticConfig {
  std::uint64_t seed = 42;
  // pixel-level generators
  std::size_t per_class = 16;  // clips per expression class
  std::size_t subjects_per_cohort = 80;
  std::size_t image_size = 32;
  std::size_t channels = 1;
  std::size_t clip_frames = 40;
  double spatial_freq = 3.0;    // cycles across the image
  double base_amplitude = 0.25;  // a0, static contrast
  double osc_amplitude = 0.15;   // amp, temporal modulation
  double period = 20.0;          // frames per oscillation
  double noise_sigma = 0.05;
  double damp_static = 0.6;   // PD contrast factor
  double damp_dynamic = 0.4;  // PD modulation factor
  // intensity-level generator
  std::size_t records_per_cohort = 80;
  double diag_mean_hc = 0.7;
  double diag_mean_pd = 0.45;
  double offdiag_mean = 0.3;
  double intensity_sigma = 0.08;  // log-space spread

  void validate() const;  // ConfigError on violations
};

// One clip: a class-oriented sinusoidal pattern (orientation = class * 45
// degrees) whose contrast follows a(t) = a0 + amp*sin(2*pi*t/period), plus
// Gaussian pixel noise, clamped to [0,1]. Pixel values are quantized to
// f32 so the on-disk container reproduces them bit-exactly.
std::vector<Tensor> synth_clip(const SyntheticConfig& config,
                               ExpressionLabel label, double a0, double amp,
                               SeededRng& rng);

// Writes per_class clips per class plus manifest.jsonl under out_dir.
std::vector<ExpressionManifestEntry> synth_expression_videos(
    const SyntheticConfig& config, const std::filesystem::path& out_dir);

// Writes 4 clips per subject (canonical order) plus subjects.jsonl. HC
// uses (a0, amp); PD uses (a0*damp_static, amp*damp_dynamic).
std::vector<SubjectManifestEntry> synth_subject_videos(
    const SyntheticConfig& config, const std::filesystem::path& out_dir);

// Intensity-level stand-in: 16 values per record drawn as exp(N(log(mu),
// sigma)) with mu = diag or offdiag mean for the record's cohort.
std::vector<IntensityRecord> synth_intensity_records(const SyntheticConfig& config);

// Manifest-driven loaders; sampling reduces each clip to M frames.
std::vector<FrameSequence> load_expression_dataset(
    const std::filesystem::path& manifest_path, std::size_t m);

struct SubjectVideos {
  std::string subject_id;
  Diagnosis diagnosis = Diagnosis::HC;
  std::array<FrameSequence, kNumExpressions> videos;
};

std::vector<SubjectVideos> load_subject_dataset(
    const std::filesystem::path& manifest_path, std::size_t m);

}  // namespace hypomimia
