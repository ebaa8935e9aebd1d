#include "lfba/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lfba/error.hpp"
#include "lfba/hexfloat.hpp"
#include "lfba/random.hpp"
#include "lfba/scene_sim.hpp"

namespace lfba {

using nlohmann::json;

std::string to_string(SampleSource source) {
  switch (source) {
    case SampleSource::kManualTraining: return "manual_training";
    case SampleSource::kOverride: return "override";
    case SampleSource::kAutomation: return "automation";
    case SampleSource::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

SampleSource parse_sample_source(std::string_view text) {
  if (text == "manual_training") return SampleSource::kManualTraining;
  if (text == "override") return SampleSource::kOverride;
  if (text == "automation") return SampleSource::kAutomation;
  if (text == "synthetic") return SampleSource::kSynthetic;
  throw ValidationError("unknown sample source \"" + std::string(text) + "\"");
}

SampleRecord make_record(std::vector<double> features, ClassLabel label, int run,
                         double timestamp, SampleSource source, std::optional<std::string> scene) {
  SampleRecord r;
  r.features = std::move(features);
  r.label = label;
  r.label_bits = format_label(label);
  r.scene = std::move(scene);
  r.run = run;
  r.timestamp = timestamp;
  r.source = source;
  return r;
}

Dataset::Dataset(int n, int d) : n_(n), d_(d) {
  check_switch_count(n);
  if (d < 1) throw ValidationError("feature dimension must be >= 1");
}

void Dataset::append(SampleRecord record) {
  if (record.label.n != n_) {
    throw ValidationError("record switch count " + std::to_string(record.label.n) +
                          " differs from dataset n=" + std::to_string(n_));
  }
  if (encode_label(parse_bits(record.label_bits)) != record.label) {
    throw ValidationError("label " + std::to_string(record.label.value) +
                          " does not match label_bits \"" + record.label_bits + "\"");
  }
  if (record.features.size() != static_cast<std::size_t>(d_)) {
    throw ValidationError("record has " + std::to_string(record.features.size()) +
                          " features, dataset expects " + std::to_string(d_));
  }
  for (double f : record.features) {
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
      throw ValidationError("feature value outside [0,1]");
    }
  }
  if (record.run < 1) throw ValidationError("run must be >= 1");
  records_.push_back(std::move(record));
}

std::vector<int> Dataset::runs() const {
  std::set<int> seen;
  for (const auto& r : records_) seen.insert(r.run);
  return {seen.begin(), seen.end()};
}

Dataset Dataset::without_sources(const std::vector<SampleSource>& excluded) const {
  Dataset out(n_, d_);
  for (const auto& r : records_) {
    if (std::find(excluded.begin(), excluded.end(), r.source) == excluded.end()) {
      out.records_.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::string record_to_json_line(const SampleRecord& record) {
  json j;
  json feats = json::array();
  for (double f : record.features) feats.push_back(to_hexfloat(f));
  j["features"] = std::move(feats);
  j["image_ref"] = record.image_ref ? json(*record.image_ref) : json(nullptr);
  j["label"] = record.label.value;
  j["label_bits"] = record.label_bits;
  j["scene"] = record.scene ? json(*record.scene) : json(nullptr);
  j["run"] = record.run;
  j["timestamp"] = to_hexfloat(record.timestamp);
  j["source"] = to_string(record.source);
  return j.dump();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  json header{{"version", kDatasetFormatVersion}, {"n", dataset.n()}, {"d", dataset.d()}};
  out << header.dump() << '\n';
  for (const auto& r : dataset.records()) out << record_to_json_line(r) << '\n';
  if (!out) throw Error("write to " + path.string() + " failed");
}

namespace {

const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(std::string("missing field \"") + name + "\"", line);
  return *it;
}

template <typename T>
T typed(const json& obj, const char* name, std::size_t line) {
  try {
    return field(obj, name, line).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field \"") + name + "\" has the wrong type", line);
  }
}

double hex_field(const json& obj, const char* name, std::size_t line) {
  const std::string text = typed<std::string>(obj, name, line);
  try {
    return from_hexfloat(text);
  } catch (const ParseError&) {
    throw ParseError(std::string("field \"") + name + "\" is not a float: " + text, line);
  }
}

std::optional<std::string> optional_string(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw ParseError(std::string("field \"") + name + "\" must be string or null", line);
  return v.get<std::string>();
}

SampleRecord parse_record(const json& j, int n, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not an object", line);
  SampleRecord r;
  const json& feats = field(j, "features", line);
  if (!feats.is_array()) throw ParseError("field \"features\" must be an array", line);
  r.features.reserve(feats.size());
  for (const auto& f : feats) {
    if (!f.is_string()) throw ParseError("field \"features\" must hold hex-float strings", line);
    try {
      r.features.push_back(from_hexfloat(f.get<std::string>()));
    } catch (const ParseError&) {
      throw ParseError("field \"features\" holds a bad value: " + f.get<std::string>(), line);
    }
  }
  r.image_ref = optional_string(j, "image_ref", line);
  r.label = ClassLabel{typed<int>(j, "label", line), n};
  r.label_bits = typed<std::string>(j, "label_bits", line);
  r.scene = optional_string(j, "scene", line);
  r.run = typed<int>(j, "run", line);
  r.timestamp = hex_field(j, "timestamp", line);
  try {
    r.source = parse_sample_source(typed<std::string>(j, "source", line));
  } catch (const ValidationError& e) {
    throw ParseError(std::string("field \"source\": ") + e.what(), line);
  }
  return r;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) throw ParseError("missing header", 1);
  ++line_no;
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception&) {
    throw ParseError("header is not valid JSON", line_no);
  }
  const int version = typed<int>(header, "version", line_no);
  if (version != kDatasetFormatVersion) {
    throw ParseError("unsupported dataset version " + std::to_string(version), line_no);
  }
  Dataset dataset(typed<int>(header, "n", line_no), typed<int>(header, "d", line_no));

  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception&) {
      throw ParseError("record is not valid JSON", line_no);
    }
    try {
      dataset.append(parse_record(j, dataset.n(), line_no));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Splits

SplitPair split_merge_shuffle(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must be in (0,1)");
  }
  if (dataset.size() < 2) throw ValidationError("need at least 2 records to split");

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  // The epsilon keeps 0.8 * 100 at 80 despite binary rounding.
  const auto n_train = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(dataset.size()) - 1e-9));
  if (n_train == 0 || n_train >= dataset.size()) {
    throw ValidationError("split of " + std::to_string(dataset.size()) +
                          " records leaves train or test empty");
  }
  SplitPair out{Dataset(dataset.n(), dataset.d()), Dataset(dataset.n(), dataset.d())};
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.test).append(dataset[order[i]]);
  }
  return out;
}

SplitPair split_cross_run(const Dataset& dataset, int held_out_run) {
  const std::vector<int> runs = dataset.runs();
  if (runs.size() < 2) throw ValidationError("cross-run split needs at least 2 distinct runs");
  if (std::find(runs.begin(), runs.end(), held_out_run) == runs.end()) {
    throw ValidationError("run " + std::to_string(held_out_run) + " is not in the dataset");
  }
  SplitPair out{Dataset(dataset.n(), dataset.d()), Dataset(dataset.n(), dataset.d())};
  for (const auto& r : dataset.records()) {
    (r.run == held_out_run ? out.test : out.train).append(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiling

DatasetProfile profile(const Dataset& dataset) {
  DatasetProfile p;
  for (const auto& r : dataset.records()) {
    ++p.by_label_bits[r.label_bits];
    ++p.by_scene[r.scene.value_or("-")];
    ++p.total;
  }
  return p;
}

std::string render_profile(const DatasetProfile& p) {
  std::ostringstream os;
  os << std::left << std::setw(5) << "ID" << " | " << std::setw(36) << "Scene" << " | "
     << std::setw(6) << "Output" << " | " << std::right << std::setw(6) << "Shots" << '\n';
  os << std::string(62, '-') << '\n';
  for (const SceneEntry& e : catalog()) {
    const auto it = p.by_scene.find(e.id);
    const std::size_t count = it == p.by_scene.end() ? 0 : it->second;
    os << std::left << std::setw(5) << e.id << " | " << std::setw(36) << e.description << " | "
       << std::setw(6) << format_bits(e.preferred_output) << " | " << std::right << std::setw(6)
       << count << '\n';
  }
  if (const auto it = p.by_scene.find("-"); it != p.by_scene.end()) {
    os << std::left << std::setw(5) << "-" << " | " << std::setw(36) << "(no scene recorded)"
       << " | " << std::setw(6) << "" << " | " << std::right << std::setw(6) << it->second << '\n';
  }
  os << std::string(62, '-') << '\n';
  os << std::left << std::setw(5) << "" << " | " << std::setw(36) << "Total" << " | "
     << std::setw(6) << "" << " | " << std::right << std::setw(6) << p.total << "\n\n";

  os << std::left << std::setw(10) << "Output" << " | " << std::right << std::setw(6) << "Count"
     << '\n';
  os << std::string(19, '-') << '\n';
  for (const auto& [bits, count] : p.by_label_bits) {
    os << std::left << std::setw(10) << bits << " | " << std::right << std::setw(6) << count
       << '\n';
  }
  return os.str();
}

}  // namespace lfba
