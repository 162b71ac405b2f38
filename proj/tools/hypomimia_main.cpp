#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypomimia/checkpoint.hpp"
#include "hypomimia/classifier.hpp"
#include "hypomimia/data_io.hpp"
#include "hypomimia/errors.hpp"
#include "hypomimia/evaluation.hpp"
#include "hypomimia/expression_model.hpp"
#include "hypomimia/feature_processing.hpp"
#include "hypomimia/gradsuite.hpp"
#include "hypomimia/version.hpp"
#include "run_config.hpp"

namespace hypomimia::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Directories are accepted where a manifest lives under a well-known name.
fs::path manifest_path(const fs::path& given, const char* name) {
  return fs::is_directory(given) ? given / name : given;
}

void emit(const ordered_json& report, const std::optional<fs::path>& out) {
  std::string text = report.dump(2);
  text.push_back('\n');
  std::cout << text;
  if (out) {
    std::ofstream file(*out, std::ios::binary);
    if (!file) throw DataError("cannot open " + out->string() + " for writing");
    file << text;
    if (!file) throw DataError("failed writing " + out->string());
  }
}

ordered_json history_json(const std::vector<EpochStats>& history) {
  ordered_json rows = ordered_json::array();
  for (const EpochStats& e : history) {
    rows.push_back(
        {{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  }
  return rows;
}

ordered_json metrics_json(const MetricsRow& m) {
  return {{"averaging", std::string(to_string(m.averaging))},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1}};
}

ordered_json fold_json(const FoldMetrics& f) {
  return {{"binary_pd", metrics_json(f.binary_pd)},
          {"macro", metrics_json(f.macro)},
          {"test_count", f.test_count}};
}

ordered_json cv_json(const CvResult& cv) {
  ordered_json j;
  ordered_json folds = ordered_json::array();
  for (const FoldMetrics& f : cv.folds) folds.push_back(fold_json(f));
  j["folds"] = std::move(folds);
  j["pooled"] = fold_json(cv.pooled);
  ordered_json assignments;
  for (const auto& [subject, fold] : cv.plan.assignments) {
    assignments[subject] = fold;
  }
  j["assignments"] = std::move(assignments);
  return j;
}

ordered_json ablation_json(const AblationGrid& grid) {
  ordered_json rows = ordered_json::array();
  for (const AblationRow& row : grid.rows) {
    ordered_json folds = ordered_json::array();
    for (const FoldMetrics& f : row.folds) folds.push_back(fold_json(f));
    rows.push_back({{"cell", std::string(to_string(row.cell))},
                    {"processing", row.processing},
                    {"residual", row.residual},
                    {"pooled", fold_json(row.pooled)},
                    {"folds", std::move(folds)}});
  }
  return rows;
}

std::vector<LabeledSequence> labeled_sequences(
    const std::vector<IntensityRecord>& records, SequenceMode mode) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const IntensityRecord& r : records) {
    if (!r.diagnosis) {
      throw DataError("record '" + r.subject_id +
                      "' has no diagnosis; training requires labels");
    }
    out.emplace_back(assemble_sequence(r, mode), *r.diagnosis);
  }
  return out;
}

struct SynthArgs {
  std::string level;
  std::optional<fs::path> config;
  fs::path out;
};

int run_synth(const SynthArgs& args) {
  RunConfig config = load_run_config(args.config);
  config.data.seed = resolve_seed(std::nullopt, config.data.seed);
  fs::create_directories(args.out);
  ordered_json report = report_envelope(config);
  report["command"] = "synth";
  report["level"] = args.level;
  report["out"] = args.out.string();
  if (args.level == "video") {
    auto entries = synth_expression_videos(config.data, args.out);
    report["videos"] = entries.size();
    report["manifest"] = (args.out / "manifest.jsonl").string();
  } else if (args.level == "subject") {
    auto entries = synth_subject_videos(config.data, args.out);
    report["subjects"] = entries.size();
    report["manifest"] = (args.out / "subjects.jsonl").string();
  } else {
    auto records = synth_intensity_records(config.data);
    fs::path path = args.out / "records.jsonl";
    write_records_jsonl(path, records, false);
    report["records"] = records.size();
    report["manifest"] = path.string();
  }
  emit(report, std::nullopt);
  return 0;
}

struct TrainExprArgs {
  std::optional<fs::path> config;
  fs::path data;
  std::optional<fs::path> out;
};

int run_train_expr(const TrainExprArgs& args) {
  RunConfig config = load_run_config(args.config);
  std::uint64_t seed = resolve_seed(std::nullopt, config.train.seed);
  config.train.seed = seed;
  auto dataset = load_expression_dataset(
      manifest_path(args.data, "manifest.jsonl"), config.model.frames);
  ExpressionModel model(config.model, config.prompts, seed);
  auto history = train_expression_model(model, dataset, config.train);
  if (args.out) save_expression_model(*args.out, model);
  ordered_json report = report_envelope(config);
  report["command"] = "train-expr";
  report["videos"] = dataset.size();
  report["history"] = history_json(history);
  report["epochs_run"] = history.size();
  if (!history.empty()) {
    report["final_loss"] = history.back().loss;
    report["final_accuracy"] = history.back().accuracy;
  }
  if (args.out) report["model"] = args.out->string();
  emit(report, std::nullopt);
  return 0;
}

struct EvalExprArgs {
  fs::path model;
  fs::path data;
  std::optional<fs::path> out;
};

int run_eval_expr(const EvalExprArgs& args) {
  ExpressionModel model = load_expression_model(args.model);
  RunConfig config;
  config.model = model.config();
  config.prompts = model.prompts();
  auto dataset = load_expression_dataset(
      manifest_path(args.data, "manifest.jsonl"), config.model.frames);
  ExpressionEval eval = evaluate_expression(model, dataset);
  ConfusionReport confusion = confusion_report(eval.confusion);
  ordered_json report = report_envelope(config);
  report["command"] = "eval-expr";
  report["videos"] = dataset.size();
  report["accuracy"] = eval.accuracy;
  report["confusion_counts"] = confusion.counts;
  report["confusion_percentages"] = confusion.percentages;
  report["empty_classes"] = confusion.empty_class;
  report["table"] = confusion_text(confusion);
  emit(report, args.out);
  return 0;
}

struct ExtractArgs {
  fs::path model;
  fs::path subjects;
  std::optional<fs::path> out;
};

int run_extract(const ExtractArgs& args) {
  ExpressionModel model = load_expression_model(args.model);
  auto subjects = load_subject_dataset(
      manifest_path(args.subjects, "subjects.jsonl"), model.config().frames);
  std::vector<IntensityRecord> records;
  records.reserve(subjects.size());
  for (const SubjectVideos& s : subjects) {
    records.push_back(
        model.extract_intensity_record(s.videos, s.subject_id, s.diagnosis));
  }
  if (!args.out) {
    write_records_jsonl(std::cout, records, false);
    return 0;
  }
  write_records_jsonl(*args.out, records, false);
  RunConfig config;
  config.model = model.config();
  config.prompts = model.prompts();
  ordered_json report = report_envelope(config);
  report["command"] = "extract";
  report["records"] = records.size();
  report["out"] = args.out->string();
  emit(report, std::nullopt);
  return 0;
}

struct ProcessArgs {
  fs::path in;
  std::optional<fs::path> out;
};

int run_process(const ProcessArgs& args) {
  auto records = read_records_jsonl(args.in);
  if (!args.out) {
    write_records_jsonl(std::cout, records, true);
    return 0;
  }
  write_records_jsonl(*args.out, records, true);
  ordered_json report = report_envelope(RunConfig{});
  report["command"] = "process";
  report["records"] = records.size();
  report["out"] = args.out->string();
  emit(report, std::nullopt);
  return 0;
}

struct TrainClfArgs {
  std::optional<fs::path> config;
  fs::path in;
  std::string mode = "processed";
  std::optional<fs::path> out;
};

int run_train_clf(const TrainClfArgs& args) {
  RunConfig config = load_run_config(args.config);
  SequenceMode mode = parse_sequence_mode(args.mode);
  std::uint64_t seed = resolve_seed(std::nullopt, config.classifier_train.seed);
  config.classifier_train.seed = seed;
  config.classifier.input_dim = sequence_dim(mode);
  auto records = read_records_jsonl(args.in);
  auto dataset = labeled_sequences(records, mode);
  DiagnosisClassifier model(config.classifier, seed);
  auto history = train_classifier(model, dataset, config.classifier_train);
  if (args.out) save_classifier(*args.out, model);
  ordered_json report = report_envelope(config);
  report["command"] = "train-clf";
  report["mode"] = args.mode;
  report["records"] = records.size();
  report["history"] = history_json(history);
  if (!history.empty()) {
    report["final_loss"] = history.back().loss;
    report["final_accuracy"] = history.back().accuracy;
  }
  if (args.out) report["model"] = args.out->string();
  emit(report, std::nullopt);
  return 0;
}

struct CvArgs {
  std::optional<fs::path> config;
  fs::path in;
  std::string mode = "processed";
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

int run_cv_cmd(const CvArgs& args) {
  RunConfig config = load_run_config(args.config);
  SequenceMode mode = parse_sequence_mode(args.mode);
  config.classifier.input_dim = sequence_dim(mode);
  std::uint64_t seed = resolve_seed(args.seed, config.classifier_train.seed);
  auto records = read_records_jsonl(args.in);
  CvResult cv = run_cv(records, config.classifier, config.classifier_train,
                       mode, config.eval.k, seed);
  ordered_json report = report_envelope(config);
  report["command"] = "cv";
  report["mode"] = args.mode;
  report["k"] = config.eval.k;
  report["seed"] = seed;
  report.update(cv_json(cv));
  emit(report, args.out);
  return 0;
}

struct AblateArgs {
  std::optional<fs::path> config;
  fs::path in;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

int run_ablate(const AblateArgs& args) {
  RunConfig config = load_run_config(args.config);
  std::uint64_t seed = resolve_seed(args.seed, config.classifier_train.seed);
  auto records = read_records_jsonl(args.in);
  AblationGrid grid =
      run_ablation(records, config.classifier, config.classifier_train,
                   config.eval.k, seed);
  ordered_json report = report_envelope(config);
  report["command"] = "ablate";
  report["k"] = config.eval.k;
  report["seed"] = seed;
  report["rows"] = ablation_json(grid);
  report["table"] = metrics_table_text(grid);
  emit(report, args.out);
  return 0;
}

struct BoxplotArgs {
  fs::path in;
  std::optional<fs::path> out;
};

int run_boxplot(const BoxplotArgs& args) {
  auto records = read_records_jsonl(args.in);
  std::string csv = boxplot_csv(boxplot_stats(records));
  if (!args.out) {
    std::cout << csv;
    return 0;
  }
  std::ofstream file(*args.out, std::ios::binary);
  if (!file) throw DataError("cannot open " + args.out->string() + " for writing");
  file << csv;
  if (!file) throw DataError("failed writing " + args.out->string());
  ordered_json report = report_envelope(RunConfig{});
  report["command"] = "boxplot";
  report["records"] = records.size();
  report["out"] = args.out->string();
  emit(report, std::nullopt);
  return 0;
}

int run_gradcheck(const std::optional<fs::path>& out) {
  auto entries = run_gradient_suite();
  bool all_pass = true;
  ordered_json rows = ordered_json::array();
  for (const GradSuiteEntry& e : entries) {
    all_pass = all_pass && e.pass;
    rows.push_back({{"name", e.name},
                    {"max_rel_error", e.max_rel_error},
                    {"threshold", e.threshold},
                    {"pass", e.pass}});
    std::cerr << (e.pass ? "pass " : "FAIL ") << e.name << " ("
              << e.max_rel_error << ")\n";
  }
  ordered_json report = report_envelope(RunConfig{});
  report["command"] = "gradcheck";
  report["entries"] = std::move(rows);
  report["all_pass"] = all_pass;
  emit(report, out);
  return all_pass ? 0 : 4;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Dynamic facial expression screening pipeline"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--level", synth_args.level, "Dataset level")
      ->required()
      ->check(CLI::IsMember({"video", "subject", "intensity"}));
  synth->add_option("--config", synth_args.config, "Run configuration JSON");
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  TrainExprArgs train_expr_args;
  auto* train_expr =
      app.add_subcommand("train-expr", "Train the expression-intensity model");
  train_expr->add_option("--config", train_expr_args.config,
                         "Run configuration JSON");
  train_expr
      ->add_option("--data", train_expr_args.data,
                   "Labeled video dataset (directory or manifest)")
      ->required();
  train_expr->add_option("--out", train_expr_args.out, "Model checkpoint path");

  EvalExprArgs eval_expr_args;
  auto* eval_expr =
      app.add_subcommand("eval-expr", "Evaluate an expression model");
  eval_expr->add_option("--model", eval_expr_args.model, "Model checkpoint")
      ->required();
  eval_expr
      ->add_option("--data", eval_expr_args.data,
                   "Labeled video dataset (directory or manifest)")
      ->required();
  eval_expr->add_option("--out", eval_expr_args.out, "Also write the report here");

  ExtractArgs extract_args;
  auto* extract =
      app.add_subcommand("extract", "Extract per-subject intensity records");
  extract->add_option("--model", extract_args.model, "Model checkpoint")
      ->required();
  extract
      ->add_option("--subjects", extract_args.subjects,
                   "Subject dataset (directory or manifest)")
      ->required();
  extract->add_option("--out", extract_args.out, "Records JSONL path");

  ProcessArgs process_args;
  auto* process =
      app.add_subcommand("process", "Append group statistics to records");
  process->add_option("--in", process_args.in, "Records JSONL")->required();
  process->add_option("--out", process_args.out, "Processed JSONL path");

  TrainClfArgs train_clf_args;
  auto* train_clf =
      app.add_subcommand("train-clf", "Train the diagnosis classifier");
  train_clf->add_option("--config", train_clf_args.config,
                        "Run configuration JSON");
  train_clf->add_option("--in", train_clf_args.in, "Records JSONL")->required();
  train_clf->add_option("--mode", train_clf_args.mode, "Sequence mode")
      ->check(CLI::IsMember({"raw", "processed"}));
  train_clf->add_option("--out", train_clf_args.out, "Model checkpoint path");

  CvArgs cv_args;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  cv->add_option("--config", cv_args.config, "Run configuration JSON");
  cv->add_option("--in", cv_args.in, "Records JSONL")->required();
  cv->add_option("--mode", cv_args.mode, "Sequence mode")
      ->check(CLI::IsMember({"raw", "processed"}));
  cv->add_option("--seed", cv_args.seed, "Fold/model seed");
  cv->add_option("--out", cv_args.out, "Also write the report here");

  AblateArgs ablate_args;
  auto* ablate =
      app.add_subcommand("ablate", "Cell x processing x residual grid");
  ablate->add_option("--config", ablate_args.config, "Run configuration JSON");
  ablate->add_option("--in", ablate_args.in, "Records JSONL")->required();
  ablate->add_option("--seed", ablate_args.seed, "Fold/model seed");
  ablate->add_option("--out", ablate_args.out, "Also write the report here");

  BoxplotArgs boxplot_args;
  auto* boxplot =
      app.add_subcommand("boxplot", "Per-expression cohort intensity summaries");
  boxplot->add_option("--in", boxplot_args.in, "Records JSONL")->required();
  boxplot->add_option("--out", boxplot_args.out, "CSV path");

  std::optional<fs::path> gradcheck_out;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--out", gradcheck_out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (synth->parsed()) return run_synth(synth_args);
  if (train_expr->parsed()) return run_train_expr(train_expr_args);
  if (eval_expr->parsed()) return run_eval_expr(eval_expr_args);
  if (extract->parsed()) return run_extract(extract_args);
  if (process->parsed()) return run_process(process_args);
  if (train_clf->parsed()) return run_train_clf(train_clf_args);
  if (cv->parsed()) return run_cv_cmd(cv_args);
  if (ablate->parsed()) return run_ablate(ablate_args);
  if (boxplot->parsed()) return run_boxplot(boxplot_args);
  if (gradcheck->parsed()) return run_gradcheck(gradcheck_out);
  return 2;
}

}  // namespace
}  // namespace hypomimia::cli

int main(int argc, char** argv) {
  using namespace hypomimia;
  try {
    return cli::dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
