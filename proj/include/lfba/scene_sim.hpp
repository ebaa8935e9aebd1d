#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfba/codec.hpp"
#include "lfba/dataset.hpp"
#include "lfba/random.hpp"

namespace lfba {

inline constexpr int kImageSide = 64;
inline constexpr int kBlockSide = 8;
inline constexpr int kFeatureDim = (kImageSide / kBlockSide) * (kImageSide / kBlockSide);

// One activity class of the testbed room together with the light setting
// the occupant prefers for it (c1..c4) and the number of shots collected.
struct SceneEntry {
  std::string id;
  std::string description;
  ControlVector preferred_output;
  int shots;
};

const std::vector<SceneEntry>& catalog();

// Throws ValidationError for ids outside the catalog.
const SceneEntry& find_scene(std::string_view id);
std::size_t scene_index(std::string_view id);

// One collection session; occupants wear different clothing in each.
struct RunId {
  int index = 1;

  explicit RunId(int i);
};

struct SceneFrame {
  // Row-major kImageSide x kImageSide raster in [0,1]. May be empty for
  // frames that were reconstructed from features alone (replay logs).
  std::vector<double> image;
  std::vector<double> features;
  std::string scene;
  int run = 1;
  double timestamp = 0.0;
  std::uint64_t frame_id = 0;

  friend bool operator==(const SceneFrame&, const SceneFrame&) = default;
};

struct GeneratorConfig {
  std::uint64_t seed = 42;
  double pixel_noise_sigma = 0.05;
  // Amplitude of the run-dependent clothing modulation on the occupant.
  double run_effect_strength = 0.25;
  // Occupant position jitter in pixels, per axis.
  int class_jitter = 2;

  void validate() const;
};

// Inclusive pixel rectangle.
struct Region {
  int r0, c0, r1, c1;

  bool contains(double r, double c) const { return r >= r0 && r <= r1 && c >= c0 && c <= c1; }
};

enum class Zone { kPiano, kDesk, kSofa, kMirror, kDoor };

// Fixed furniture areas of the room raster. Piano and desk include the
// space in front of them where the occupant sits.
Region zone_region(Zone zone);

// Body center (row, col) before jitter; nullopt for the empty room.
std::optional<std::pair<double, double>> occupant_anchor(std::string_view scene);

// 8x8 block means, row-major.
std::vector<double> block_features(std::span<const double> image);

// Deterministic in (scene, run, config, position of `draw`).
SceneFrame render_frame(std::string_view scene, RunId run, const GeneratorConfig& config,
                        Rng& draw);

// Per-sample stream used by generate_dataset and the gateway ticker.
Rng frame_stream(const GeneratorConfig& config, std::string_view scene, RunId run,
                 std::uint64_t sample_index);

// Default synthetic corpus: about 1000 samples over 5 runs.
inline constexpr int kDefaultRuns = 5;
inline constexpr double kDefaultScale = 0.056;

// For each run and scene emits round(shots * scale / runs) samples.
Dataset generate_dataset(int runs, double scale, const GeneratorConfig& config);

// Count generate_dataset emits per (run, scene).
int samples_per_run(const SceneEntry& scene, int runs, double scale);

// Binary PGM (P5, maxval 255).
std::string encode_pgm(std::span<const double> image, int width = kImageSide,
                       int height = kImageSide);
void write_pgm(const std::filesystem::path& path, std::span<const double> image);

}  // namespace lfba
