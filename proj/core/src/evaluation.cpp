#include "hypomimia/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "hypomimia/errors.hpp"
#include "hypomimia/rng.hpp"

namespace hypomimia {

namespace {

struct BinaryCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// Counts with `positive` as the positive class.
BinaryCounts count(std::span<const Diagnosis> predictions,
                   std::span<const Diagnosis> labels, Diagnosis positive) {
  BinaryCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool truth = labels[i] == positive;
    bool pred = predictions[i] == positive;
    if (truth && pred) ++c.tp;
    else if (!truth && !pred) ++c.tn;
    else if (!truth && pred) ++c.fp;
    else ++c.fn;
  }
  return c;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double precision, double recall) {
  return precision + recall == 0.0
             ? 0.0
             : 2.0 * precision * recall / (precision + recall);
}

FoldMetrics pooled_metrics(std::span<const Diagnosis> predictions,
                           std::span<const Diagnosis> labels) {
  FoldMetrics fm;
  fm.binary_pd = compute_metrics(predictions, labels, Averaging::BinaryPd);
  fm.macro = compute_metrics(predictions, labels, Averaging::Macro);
  fm.test_count = labels.size();
  return fm;
}

std::vector<LabeledSequence> assemble_all(
    const std::vector<const IntensityRecord*>& records, SequenceMode mode) {
  std::vector<LabeledSequence> sequences;
  sequences.reserve(records.size());
  for (const IntensityRecord* record : records) {
    sequences.emplace_back(assemble_sequence(*record, mode), *record->diagnosis);
  }
  return sequences;
}

}  // namespace

std::string_view to_string(Averaging a) {
  return a == Averaging::BinaryPd ? "binary_pd" : "macro";
}

Averaging parse_averaging(std::string_view s) {
  if (s == "binary_pd") return Averaging::BinaryPd;
  if (s == "macro") return Averaging::Macro;
  throw ConfigError("unknown averaging mode: " + std::string(s));
}

MetricsRow compute_metrics(std::span<const Diagnosis> predictions,
                           std::span<const Diagnosis> labels, Averaging averaging) {
  if (labels.empty() || predictions.size() != labels.size()) {
    throw DataError("metrics need equal-length, non-empty prediction/label lists");
  }
  MetricsRow row;
  row.averaging = averaging;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++correct;
  }
  row.accuracy = ratio(correct, labels.size());
  BinaryCounts pd = count(predictions, labels, Diagnosis::PD);
  if (averaging == Averaging::BinaryPd) {
    row.precision = ratio(pd.tp, pd.tp + pd.fp);
    row.recall = ratio(pd.tp, pd.tp + pd.fn);
    row.f1 = f1_of(row.precision, row.recall);
    return row;
  }
  BinaryCounts hc = count(predictions, labels, Diagnosis::HC);
  double p_pd = ratio(pd.tp, pd.tp + pd.fp);
  double r_pd = ratio(pd.tp, pd.tp + pd.fn);
  double p_hc = ratio(hc.tp, hc.tp + hc.fp);
  double r_hc = ratio(hc.tp, hc.tp + hc.fn);
  row.precision = 0.5 * (p_hc + p_pd);
  row.recall = 0.5 * (r_hc + r_pd);
  row.f1 = 0.5 * (f1_of(p_hc, r_hc) + f1_of(p_pd, r_pd));
  return row;
}

FoldPlan make_folds(const std::vector<std::pair<std::string, Diagnosis>>& subjects,
                    std::size_t k, std::uint64_t seed, bool stratified) {
  if (k == 0) throw ConfigError("fold count must be >= 1");
  if (subjects.size() < k) {
    throw DataError("need at least " + std::to_string(k) + " subjects for " +
                    std::to_string(k) + " folds, got " +
                    std::to_string(subjects.size()));
  }
  FoldPlan plan;
  plan.k = k;
  plan.stratified = stratified;
  std::vector<std::size_t> order(subjects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);
  if (stratified) {
    // Round-robin within each class keeps per-fold class counts within one
    // of proportionality.
    std::array<std::size_t, 2> next{0, 0};
    for (std::size_t idx : order) {
      std::size_t cls = static_cast<std::size_t>(subjects[idx].second);
      plan.assignments[subjects[idx].first] = next[cls] % k;
      ++next[cls];
    }
  } else {
    for (std::size_t i = 0; i < order.size(); ++i) {
      plan.assignments[subjects[order[i]].first] = i % k;
    }
  }
  if (plan.assignments.size() != subjects.size()) {
    throw DataError("fold plan: duplicate subject ids in input");
  }
  return plan;
}

CvResult run_cv(const std::vector<IntensityRecord>& dataset,
                const RnnConfig& config, const ClassifierTrainConfig& train_cfg,
                SequenceMode mode, std::size_t k, std::uint64_t seed) {
  std::vector<std::pair<std::string, Diagnosis>> subjects;
  subjects.reserve(dataset.size());
  for (const IntensityRecord& record : dataset) {
    if (!record.diagnosis) {
      throw DataError("record " + record.subject_id + " has no diagnosis");
    }
    subjects.emplace_back(record.subject_id, *record.diagnosis);
  }
  FoldPlan plan = make_folds(subjects, k, seed);
  RnnConfig fold_config = config;
  fold_config.input_dim = sequence_dim(mode);

  CvResult result;
  result.plan = plan;
  std::vector<Diagnosis> pooled_preds, pooled_labels;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<const IntensityRecord*> train, test;
    for (const IntensityRecord& record : dataset) {
      (plan.assignments.at(record.subject_id) == fold ? test : train)
          .push_back(&record);
    }
    DiagnosisClassifier model(fold_config, seed + fold);
    ClassifierTrainConfig fold_train = train_cfg;
    fold_train.seed = train_cfg.seed + fold;
    train_classifier(model, assemble_all(train, mode), fold_train);

    std::vector<Diagnosis> preds, labels;
    preds.reserve(test.size());
    for (const IntensityRecord* record : test) {
      preds.push_back(predict(*record, mode, model).predicted);
      labels.push_back(*record->diagnosis);
    }
    result.folds.push_back(pooled_metrics(preds, labels));
    pooled_preds.insert(pooled_preds.end(), preds.begin(), preds.end());
    pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
  }
  result.pooled = pooled_metrics(pooled_preds, pooled_labels);
  return result;
}

AblationGrid run_ablation(const std::vector<IntensityRecord>& dataset,
                          const RnnConfig& base_config,
                          const ClassifierTrainConfig& train_cfg, std::size_t k,
                          std::uint64_t seed) {
  AblationGrid grid;
  for (CellKind cell : {CellKind::LSTM, CellKind::GRU}) {
    for (bool processing : {false, true}) {
      for (bool residual : {false, true}) {
        RnnConfig config = base_config;
        config.cell = cell;
        config.residual = residual;
        SequenceMode mode =
            processing ? SequenceMode::Processed : SequenceMode::Raw;
        // Same seed for every row: the fold plan (and everything else
        // split-related) is shared, so rows differ only by configuration.
        CvResult cv = run_cv(dataset, config, train_cfg, mode, k, seed);
        AblationRow row;
        row.cell = cell;
        row.processing = processing;
        row.residual = residual;
        row.pooled = cv.pooled;
        row.folds = cv.folds;
        grid.rows.push_back(std::move(row));
      }
    }
  }
  return grid;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ConfigError("quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  double h = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

BoxplotSummary boxplot_stats(const std::vector<IntensityRecord>& records) {
  // samples[expression][cohort]
  std::array<std::array<std::vector<double>, 2>, kNumExpressions> samples;
  for (const IntensityRecord& record : records) {
    if (!record.diagnosis) {
      throw DataError("record " + record.subject_id + " has no diagnosis");
    }
    record.validate();
    std::size_t cohort = static_cast<std::size_t>(*record.diagnosis);
    for (std::size_t j = 0; j < kNumExpressions; ++j) {
      samples[j][cohort].push_back(record.values[j * kGroupSize + j]);
    }
  }
  BoxplotSummary summary;
  for (std::size_t j = 0; j < kNumExpressions; ++j) {
    for (std::size_t cohort = 0; cohort < 2; ++cohort) {
      const std::vector<double>& values = samples[j][cohort];
      if (values.empty()) {
        throw DataError(std::string("cohort ") +
                        std::string(to_string(static_cast<Diagnosis>(cohort))) +
                        " is empty");
      }
      BoxStats& cell = summary.cells[j][cohort];
      cell.n = values.size();
      cell.min = *std::min_element(values.begin(), values.end());
      cell.max = *std::max_element(values.begin(), values.end());
      cell.q1 = quantile_linear(values, 0.25);
      cell.median = quantile_linear(values, 0.5);
      cell.q3 = quantile_linear(values, 0.75);
    }
  }
  return summary;
}

std::string boxplot_csv(const BoxplotSummary& summary) {
  std::ostringstream out;
  out << "expression,cohort,n,min,q1,median,q3,max\n";
  out << std::setprecision(17);
  for (std::size_t j = 0; j < kNumExpressions; ++j) {
    for (std::size_t cohort = 0; cohort < 2; ++cohort) {
      const BoxStats& cell = summary.cells[j][cohort];
      out << to_string(kExpressionOrder[j]) << ','
          << to_string(static_cast<Diagnosis>(cohort)) << ',' << cell.n << ','
          << cell.min << ',' << cell.q1 << ',' << cell.median << ',' << cell.q3
          << ',' << cell.max << '\n';
    }
  }
  return out.str();
}

ConfusionReport confusion_report(const Confusion4& counts) {
  ConfusionReport report;
  report.counts = counts;
  for (std::size_t row = 0; row < kNumExpressions; ++row) {
    std::size_t total = 0;
    for (std::size_t col = 0; col < kNumExpressions; ++col) {
      total += counts[row][col];
    }
    report.empty_class[row] = total == 0;
    for (std::size_t col = 0; col < kNumExpressions; ++col) {
      report.percentages[row][col] =
          total == 0 ? 0.0
                     : 100.0 * static_cast<double>(counts[row][col]) /
                           static_cast<double>(total);
    }
  }
  return report;
}

std::string confusion_text(const ConfusionReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "true\\pred";
  for (ExpressionLabel label : kExpressionOrder) {
    out << std::right << std::setw(12) << to_string(label);
  }
  out << '\n';
  for (std::size_t row = 0; row < kNumExpressions; ++row) {
    out << std::left << std::setw(12) << to_string(kExpressionOrder[row]);
    for (std::size_t col = 0; col < kNumExpressions; ++col) {
      std::ostringstream cell;
      cell << report.counts[row][col] << " (" << std::fixed
           << std::setprecision(1) << report.percentages[row][col] << "%)";
      out << std::right << std::setw(12) << cell.str();
    }
    if (report.empty_class[row]) out << "  [no samples]";
    out << '\n';
  }
  return out.str();
}

std::string metrics_table_text(const AblationGrid& grid) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "cell" << std::setw(12) << "processing"
      << std::setw(10) << "residual" << std::right << std::setw(10) << "acc"
      << std::setw(10) << "prec" << std::setw(10) << "recall" << std::setw(10)
      << "f1" << '\n';
  for (const AblationRow& row : grid.rows) {
    const MetricsRow& m = row.pooled.binary_pd;
    out << std::left << std::setw(6) << to_string(row.cell) << std::setw(12)
        << (row.processing ? "on" : "off") << std::setw(10)
        << (row.residual ? "on" : "off") << std::right << std::fixed
        << std::setprecision(3) << std::setw(10) << m.accuracy << std::setw(10)
        << m.precision << std::setw(10) << m.recall << std::setw(10) << m.f1
        << '\n';
  }
  return out.str();
}

}  // namespace hypomimia
