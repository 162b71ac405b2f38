#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hypomimia/classifier.hpp"
#include "hypomimia/feature_processing.hpp"
#include "hypomimia/labels.hpp"

namespace hypomimia {

enum class Averaging { BinaryPd, Macro };

std::string_view to_string(Averaging a);
Averaging parse_averaging(std::string_view s);

struct MetricsRow {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::BinaryPd;
};

// binary_pd scores the PD class; macro averages the per-class scores
// unweighted. Division-by-zero cells score 0.
MetricsRow compute_metrics(std::span<const Diagnosis> predictions,
                           std::span<const Diagnosis> labels, Averaging averaging);

struct FoldPlan {
  std::size_t k = 5;
  std::map<std::string, std::size_t> assignments;  // subject_id -> fold
  bool stratified = true;
};

// Seeded shuffle, then round-robin within each class so per-fold class
// counts differ from proportionality by at most 1. Subject-level: a
// subject's data never spans folds.
FoldPlan make_folds(const std::vector<std::pair<std::string, Diagnosis>>& subjects,
                    std::size_t k, std::uint64_t seed, bool stratified = true);

struct FoldMetrics {
  MetricsRow binary_pd;
  MetricsRow macro;
  std::size_t test_count = 0;
};

struct CvResult {
  std::vector<FoldMetrics> folds;
  FoldMetrics pooled;  // over concatenated test predictions
  FoldPlan plan;
};

// Five-fold protocol: train on k-1 folds, test on the held-out one, pool
// predictions across folds.
CvResult run_cv(const std::vector<IntensityRecord>& dataset,
                const RnnConfig& config, const ClassifierTrainConfig& train_cfg,
                SequenceMode mode, std::size_t k, std::uint64_t seed);

struct AblationRow {
  CellKind cell = CellKind::LSTM;
  bool processing = false;
  bool residual = false;
  FoldMetrics pooled;
  std::vector<FoldMetrics> folds;
};

struct AblationGrid {
  std::vector<AblationRow> rows;  // all 8 combinations, fixed order
};

// Runs the cell x processing x residual grid with one shared fold plan so
// rows differ only by configuration.
AblationGrid run_ablation(const std::vector<IntensityRecord>& dataset,
                          const RnnConfig& base_config,
                          const ClassifierTrainConfig& train_cfg, std::size_t k,
                          std::uint64_t seed);

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  std::size_t n = 0;
};

// Quantile by linear interpolation over the sorted sample (inclusive
// method: rank h = q(n-1)).
double quantile_linear(std::vector<double> values, double q);

struct BoxplotSummary {
  // [expression][cohort], cohort indexed by Diagnosis (HC=0, PD=1)
  std::array<std::array<BoxStats, 2>, kNumExpressions> cells{};
};

// Five-number summaries of the diagonal intensity hv per expression and
// cohort; both cohorts must be present.
BoxplotSummary boxplot_stats(const std::vector<IntensityRecord>& records);
std::string boxplot_csv(const BoxplotSummary& summary);

using Confusion4 =
    std::array<std::array<std::size_t, kNumExpressions>, kNumExpressions>;

struct ConfusionReport {
  Confusion4 counts{};
  std::array<std::array<double, kNumExpressions>, kNumExpressions> percentages{};
  std::array<bool, kNumExpressions> empty_class{};  // zero-count true rows
};

ConfusionReport confusion_report(const Confusion4& counts);
std::string confusion_text(const ConfusionReport& report);

std::string metrics_table_text(const AblationGrid& grid);

}  // namespace hypomimia
