#include "lfba/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "lfba/error.hpp"
#include "lfba/hexfloat.hpp"
#include "lfba/random.hpp"

namespace lfba {

using nlohmann::json;

std::string to_string(Regime regime) {
  return regime == Regime::kMergeSplit ? "merge_split" : "cross_run";
}

Regime parse_regime(std::string_view text) {
  if (text == "merge" || text == "merge_split") return Regime::kMergeSplit;
  if (text == "cross-run" || text == "cross_run") return Regime::kCrossRun;
  throw ValidationError("unknown regime \"" + std::string(text) + "\"");
}

namespace {

void check_pairs(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("predictions and labels differ in length");
  }
  if (labels.empty()) throw ValidationError("accuracy of an empty set is undefined");
}

}  // namespace

double standard_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pairs(predictions, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels,
                         AbsentClassPolicy policy, int num_classes) {
  check_pairs(predictions, labels);
  const int top = *std::max_element(labels.begin(), labels.end());
  const int K = std::max(num_classes, top + 1);
  if (*std::min_element(labels.begin(), labels.end()) < 0) {
    throw ValidationError("negative class label");
  }
  std::vector<std::size_t> hits(static_cast<std::size_t>(K), 0);
  std::vector<std::size_t> totals(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++totals[y];
    hits[y] += predictions[i] == labels[i];
  }
  double sum = 0.0;
  int classes = 0;
  for (std::size_t k = 0; k < totals.size(); ++k) {
    if (totals[k] == 0) {
      if (policy == AbsentClassPolicy::kZero) ++classes;
      continue;
    }
    sum += static_cast<double>(hits[k]) / static_cast<double>(totals[k]);
    ++classes;
  }
  return sum / classes;
}

std::vector<int> FoldResult::absent_classes() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < recalls.size(); ++k) {
    if (!recalls[k]) out.push_back(static_cast<int>(k));
  }
  return out;
}

FoldResult evaluate_fold(const PredictorModel& model, const Dataset& test, int fold_id,
                         AbsentClassPolicy policy) {
  if (test.empty()) throw ValidationError("fold " + std::to_string(fold_id) + " has no test records");
  const int K = model.num_classes();
  FoldResult fold;
  fold.fold_id = fold_id;
  fold.test_size = test.size();
  fold.confusion.assign(static_cast<std::size_t>(K),
                        std::vector<std::int64_t>(static_cast<std::size_t>(K), 0));

  std::vector<int> predicted;
  std::vector<int> truth;
  predicted.reserve(test.size());
  truth.reserve(test.size());
  for (const auto& r : test.records()) {
    const int y = predict(model, r.features).argmax.value;
    predicted.push_back(y);
    truth.push_back(r.label.value);
    ++fold.confusion[static_cast<std::size_t>(r.label.value)][static_cast<std::size_t>(y)];
  }

  fold.s_acc = standard_accuracy(predicted, truth);
  fold.b_acc = balanced_accuracy(predicted, truth, policy, K);
  fold.recalls.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& row = fold.confusion[static_cast<std::size_t>(k)];
    std::int64_t total = 0;
    for (auto c : row) total += c;
    if (total > 0) {
      fold.recalls[static_cast<std::size_t>(k)] =
          static_cast<double>(row[static_cast<std::size_t>(k)]) / static_cast<double>(total);
    }
  }
  return fold;
}

namespace {

FoldResult train_and_evaluate(const SplitPair& split, TrainConfig config, int fold_id,
                              AbsentClassPolicy policy) {
  config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(fold_id));
  TrainResult trained = train(split.train, config);
  FoldResult fold = evaluate_fold(trained.model, split.test, fold_id, policy);
  fold.train_size = split.train.size();
  fold.loss_trace = std::move(trained.loss_trace);
  return fold;
}

void finish(EvalReport& report) {
  if (report.per_fold.empty()) return;
  double s = 0.0;
  double b = 0.0;
  for (const auto& f : report.per_fold) {
    s += f.s_acc;
    b += f.b_acc;
  }
  report.mean_s_acc = s / static_cast<double>(report.per_fold.size());
  report.mean_b_acc = b / static_cast<double>(report.per_fold.size());
}

}  // namespace

EvalReport run_merge_split(const Dataset& dataset, const TrainConfig& train_config,
                           double train_fraction, std::uint64_t split_seed,
                           AbsentClassPolicy policy) {
  const SplitPair split = split_merge_shuffle(dataset, train_fraction, split_seed);
  EvalReport report;
  report.regime = Regime::kMergeSplit;
  report.num_classes = 1 << dataset.n();
  report.per_fold.push_back(train_and_evaluate(split, train_config, 1, policy));
  finish(report);
  return report;
}

EvalReport run_cross_run(const Dataset& dataset, const TrainConfig& train_config,
                         AbsentClassPolicy policy) {
  const std::vector<int> runs = dataset.runs();
  if (runs.size() < 2) throw ValidationError("cross-run evaluation needs at least 2 runs");
  train_config.validate();

  std::vector<std::future<FoldResult>> pending;
  for (int run : runs) {
    pending.push_back(std::async(std::launch::async, [&dataset, &train_config, run, policy] {
      return train_and_evaluate(split_cross_run(dataset, run), train_config, run, policy);
    }));
  }
  EvalReport report;
  report.regime = Regime::kCrossRun;
  report.num_classes = 1 << dataset.n();
  for (auto& f : pending) report.per_fold.push_back(f.get());
  finish(report);
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string emit_report(const EvalReport& report) {
  std::ostringstream os;
  os << "Regime: " << (report.regime == Regime::kMergeSplit ? "Merge & Split Runs" : "Cross Run")
     << '\n';
  os << std::left << std::setw(6) << "Fold" << " | " << std::right << std::setw(6) << "Train"
     << " | " << std::setw(6) << "Test" << " | " << std::setw(6) << "S-Acc" << " | "
     << std::setw(6) << "B-Acc" << '\n';
  os << std::string(44, '-') << '\n';
  for (const auto& f : report.per_fold) {
    os << std::left << std::setw(6) << f.fold_id << " | " << std::right << std::setw(6)
       << f.train_size << " | " << std::setw(6) << f.test_size << " | " << std::setw(6)
       << fixed3(f.s_acc) << " | " << std::setw(6) << fixed3(f.b_acc) << '\n';
  }
  if (!report.per_fold.empty()) {
    os << std::string(44, '-') << '\n';
    os << std::left << std::setw(6) << "Mean" << " | " << std::right << std::setw(6) << ""
       << " | " << std::setw(6) << "" << " | " << std::setw(6) << fixed3(report.mean_s_acc)
       << " | " << std::setw(6) << fixed3(report.mean_b_acc) << '\n';
  }
  return os.str();
}

std::string emit_comparison(const std::string& model_name, const EvalReport& merge,
                            const EvalReport& cross) {
  std::ostringstream os;
  const int w = std::max<int>(5, static_cast<int>(model_name.size()));
  os << std::left << std::setw(w) << "Model" << " | " << std::setw(15) << "Merge & Split"
     << " | " << "Cross Run" << '\n';
  os << std::setw(w) << "" << " | " << std::setw(7) << "S-Acc" << ' ' << std::setw(7) << "B-Acc"
     << " | " << std::setw(7) << "S-Acc" << ' ' << "B-Acc" << '\n';
  os << std::string(static_cast<std::size_t>(w) + 36, '-') << '\n';
  os << std::setw(w) << model_name << " | " << std::setw(7) << fixed3(merge.mean_s_acc) << ' '
     << std::setw(7) << fixed3(merge.mean_b_acc) << " | " << std::setw(7)
     << fixed3(cross.mean_s_acc) << ' ' << fixed3(cross.mean_b_acc) << '\n';
  return os.str();
}

std::string report_to_json_lines(const EvalReport& report) {
  std::ostringstream os;
  json summary{{"kind", "eval_report"},
               {"regime", to_string(report.regime)},
               {"num_classes", report.num_classes},
               {"folds", report.per_fold.size()},
               {"mean_s_acc", to_hexfloat(report.mean_s_acc)},
               {"mean_b_acc", to_hexfloat(report.mean_b_acc)},
               {"mean_s_acc_display", fixed3(report.mean_s_acc)},
               {"mean_b_acc_display", fixed3(report.mean_b_acc)}};
  os << summary.dump() << '\n';
  for (const auto& f : report.per_fold) {
    json recalls = json::array();
    for (const auto& r : f.recalls) recalls.push_back(r ? json(to_hexfloat(*r)) : json(nullptr));
    json losses = json::array();
    for (double l : f.loss_trace) losses.push_back(to_hexfloat(l));
    json line{{"kind", "fold"},
              {"fold", f.fold_id},
              {"train_size", f.train_size},
              {"test_size", f.test_size},
              {"s_acc", to_hexfloat(f.s_acc)},
              {"b_acc", to_hexfloat(f.b_acc)},
              {"recalls", std::move(recalls)},
              {"absent_classes", f.absent_classes()},
              {"confusion", f.confusion},
              {"loss_trace", std::move(losses)}};
    os << line.dump() << '\n';
  }
  return os.str();
}

std::vector<EvalReport> reports_from_json_lines(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<EvalReport> reports;
  std::vector<std::size_t> expected_folds;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "eval_report") {
        EvalReport report;
        report.regime = parse_regime(j.at("regime").get<std::string>());
        report.num_classes = j.at("num_classes").get<int>();
        report.mean_s_acc = from_hexfloat(j.at("mean_s_acc").get<std::string>());
        report.mean_b_acc = from_hexfloat(j.at("mean_b_acc").get<std::string>());
        expected_folds.push_back(j.at("folds").get<std::size_t>());
        reports.push_back(std::move(report));
      } else if (kind == "fold") {
        if (reports.empty()) throw ParseError("fold line before any summary line", line_no);
        FoldResult f;
        f.fold_id = j.at("fold").get<int>();
        f.train_size = j.at("train_size").get<std::size_t>();
        f.test_size = j.at("test_size").get<std::size_t>();
        f.s_acc = from_hexfloat(j.at("s_acc").get<std::string>());
        f.b_acc = from_hexfloat(j.at("b_acc").get<std::string>());
        for (const auto& r : j.at("recalls")) {
          f.recalls.push_back(r.is_null() ? std::nullopt
                                          : std::optional<double>(from_hexfloat(r.get<std::string>())));
        }
        f.confusion = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
        for (const auto& l : j.at("loss_trace")) f.loss_trace.push_back(from_hexfloat(l.get<std::string>()));
        reports.back().per_fold.push_back(std::move(f));
      } else {
        throw ParseError("unknown line kind \"" + kind + "\"", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError& e) {
      if (e.line()) throw;
      throw ParseError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (reports.empty()) throw ParseError("report has no summary line");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].per_fold.size() != expected_folds[i]) {
      throw ParseError("report lists " + std::to_string(expected_folds[i]) +
                       " folds but holds " + std::to_string(reports[i].per_fold.size()));
    }
  }
  return reports;
}

EvalReport report_from_json_lines(const std::string& text) {
  auto reports = reports_from_json_lines(text);
  if (reports.size() != 1) {
    throw ParseError("expected one report, found " + std::to_string(reports.size()));
  }
  return std::move(reports.front());
}

}  // namespace lfba
