#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfba/dataset.hpp"
#include "lfba/predictor.hpp"

namespace lfba {

enum class Regime { kMergeSplit, kCrossRun };

std::string to_string(Regime regime);
Regime parse_regime(std::string_view text);

// How balanced accuracy treats classes that never occur in the labels.
// kExclude averages over present classes only; kZero averages over all
// num_classes, counting an absent class as recall 0.
enum class AbsentClassPolicy { kExclude, kZero };

double standard_accuracy(std::span<const int> predictions, std::span<const int> labels);
double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels,
                         AbsentClassPolicy policy = AbsentClassPolicy::kExclude,
                         int num_classes = 0);

struct FoldResult {
  int fold_id = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double s_acc = 0.0;
  double b_acc = 0.0;
  // Per class; nullopt when the class is absent from the test labels.
  std::vector<std::optional<double>> recalls;
  // confusion[true][predicted]
  std::vector<std::vector<std::int64_t>> confusion;
  std::vector<double> loss_trace;

  std::vector<int> absent_classes() const;
  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct EvalReport {
  Regime regime = Regime::kMergeSplit;
  int num_classes = 16;
  std::vector<FoldResult> per_fold;
  double mean_s_acc = 0.0;
  double mean_b_acc = 0.0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

FoldResult evaluate_fold(const PredictorModel& model, const Dataset& test, int fold_id,
                         AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

// 80/20 shuffle split, one fold.
EvalReport run_merge_split(const Dataset& dataset, const TrainConfig& train_config,
                           double train_fraction = 0.8, std::uint64_t split_seed = 0,
                           AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

// One fold per run, each holding that run out. Folds train concurrently;
// fold i trains with seed derive_seed(train_config.seed, i).
EvalReport run_cross_run(const Dataset& dataset, const TrainConfig& train_config,
                         AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

// Aligned text table, three decimals.
std::string emit_report(const EvalReport& report);

// Side-by-side summary of both regimes in one row.
std::string emit_comparison(const std::string& model_name, const EvalReport& merge,
                            const EvalReport& cross);

// Line-oriented JSON: one summary line followed by one line per fold.
std::string report_to_json_lines(const EvalReport& report);
EvalReport report_from_json_lines(const std::string& text);
// Several reports written back to back.
std::vector<EvalReport> reports_from_json_lines(const std::string& text);

}  // namespace lfba
