#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lfba/codec.hpp"

namespace lfba {

enum class SampleSource { kManualTraining, kOverride, kAutomation, kSynthetic };

std::string to_string(SampleSource source);
SampleSource parse_sample_source(std::string_view text);

struct SampleRecord {
  std::vector<double> features;
  std::optional<std::string> image_ref;
  ClassLabel label;
  std::string label_bits;
  std::optional<std::string> scene;
  int run = 1;
  double timestamp = 0.0;
  SampleSource source = SampleSource::kSynthetic;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// Builds a record whose label_bits is derived from the label.
SampleRecord make_record(std::vector<double> features, ClassLabel label, int run,
                         double timestamp, SampleSource source,
                         std::optional<std::string> scene = std::nullopt);

class Dataset {
 public:
  Dataset(int n = kDefaultSwitches, int d = 64);

  int n() const { return n_; }
  int d() const { return d_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<SampleRecord>& records() const { return records_; }
  const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

  // Validates the record against n and d before appending.
  void append(SampleRecord record);

  // Distinct run ids in ascending order.
  std::vector<int> runs() const;

  // Copy keeping only records whose source is not in `excluded`.
  Dataset without_sources(const std::vector<SampleSource>& excluded) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  int n_;
  int d_;
  std::vector<SampleRecord> records_;
};

inline constexpr int kDatasetFormatVersion = 1;

// Newline-delimited JSON. First line {"version","n","d"}, then one object per
// record. Features are hex-float strings so the round trip is bit-exact.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::string record_to_json_line(const SampleRecord& record);

struct SplitPair {
  Dataset train;
  Dataset test;
};

// Seeded Fisher-Yates over all records, then the first ceil(fraction * N) go
// to train.
SplitPair split_merge_shuffle(const Dataset& dataset, double train_fraction, std::uint64_t seed);

// Leave-one-run-out.
SplitPair split_cross_run(const Dataset& dataset, int held_out_run);

struct DatasetProfile {
  std::map<std::string, std::size_t> by_label_bits;
  std::map<std::string, std::size_t> by_scene;
  std::size_t total = 0;
};

DatasetProfile profile(const Dataset& dataset);

// Aligned text table in the ID / Scene / Output / Shots layout, followed by
// the per-output totals.
std::string render_profile(const DatasetProfile& profile);

}  // namespace lfba
