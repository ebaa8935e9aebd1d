#include "lfba/scene_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "lfba/error.hpp"

namespace lfba {

const std::vector<SceneEntry>& catalog() {
  static const std::vector<SceneEntry> entries = {
      {"A00", "No one is there.", parse_control_bits("0000"), 1468},
      {"A10", "Walking or standing.", parse_control_bits("0010"), 3567},
      {"A11", "Standing in front of the mirror.", parse_control_bits("1111"), 344},
      {"A20", "Just sitting on a chair.", parse_control_bits("0010"), 1309},
      {"A21", "Sitting on a chair reading papers.", parse_control_bits("0011"), 1890},
      {"A22", "Sitting on a chair with a computer.", parse_control_bits("0011"), 2306},
      {"A23", "Sitting on a chair using a monitor.", parse_control_bits("0001"), 2170},
      {"A30", "Just sitting on the sofa.", parse_control_bits("0110"), 1091},
      {"A31", "Sitting on the sofa reading papers.", parse_control_bits("0100"), 1366},
      {"A32", "Lying down on the sofa.", parse_control_bits("0000"), 971},
      {"A40", "Sitting in front of the piano.", parse_control_bits("1010"), 474},
      {"A41", "About to start playing the piano.", parse_control_bits("1000"), 333},
      {"A42", "Playing the piano.", parse_control_bits("1000"), 549},
  };
  return entries;
}

std::size_t scene_index(std::string_view id) {
  const auto& entries = catalog();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].id == id) return i;
  }
  throw ValidationError("unknown scene id \"" + std::string(id) + "\"");
}

const SceneEntry& find_scene(std::string_view id) { return catalog()[scene_index(id)]; }

RunId::RunId(int i) : index(i) {
  if (i < 1) throw ValidationError("run index must be >= 1, got " + std::to_string(i));
}

void GeneratorConfig::validate() const {
  if (!(pixel_noise_sigma >= 0.0)) throw ValidationError("pixel_noise_sigma must be >= 0");
  if (!(run_effect_strength >= 0.0 && run_effect_strength <= 1.0)) {
    throw ValidationError("run_effect_strength must be in [0,1]");
  }
  if (class_jitter < 0) throw ValidationError("class_jitter must be >= 0");
}

namespace {

using Image = std::vector<double>;

constexpr double kFloor = 0.05;
constexpr double kOccupant = 0.5;
constexpr double kHair = 0.1;
constexpr double kSkin = 0.85;
constexpr double kPaper = 1.0;
constexpr double kLaptop = 0.7;

constexpr Region kPiano{0, 0, 31, 31};
constexpr Region kDesk{0, 40, 43, 63};
constexpr Region kSofa{44, 32, 63, 63};
constexpr Region kMirror{24, 0, 43, 2};
constexpr Region kDoor{52, 0, 63, 5};

void fill_rect(Image& img, int r0, int c0, int r1, int c1, double v) {
  for (int r = std::max(r0, 0); r <= std::min(r1, kImageSide - 1); ++r) {
    for (int c = std::max(c0, 0); c <= std::min(c1, kImageSide - 1); ++c) {
      img[static_cast<std::size_t>(r * kImageSide + c)] = v;
    }
  }
}

void fill_rect(Image& img, const Region& z, double v) { fill_rect(img, z.r0, z.c0, z.r1, z.c1, v); }

// Furniture is identical in every run and every scene, only the monitor's
// screen changes when it is in use. Chair and sofa are about as bright as
// the occupant's clothing, so a dark outfit reads darker than the seat.
void draw_room(Image& img, bool monitor_on) {
  std::fill(img.begin(), img.end(), kFloor);
  fill_rect(img, 0, 0, 7, 31, 0.1);      // piano body
  fill_rect(img, 8, 0, 9, 31, 0.6);      // keyboard
  fill_rect(img, 16, 8, 19, 23, 0.25);   // piano bench
  fill_rect(img, kMirror, 0.5);
  fill_rect(img, 8, 40, 23, 63, 0.3);    // desk
  fill_rect(img, 0, 40, 7, 63, monitor_on ? 0.95 : 0.1);
  fill_rect(img, 26, 44, 35, 59, 0.5);   // chair
  fill_rect(img, kSofa, 0.5);
  fill_rect(img, kDoor, 0.35);
}

// Clothing analogue: a per-run tone plus body-scale stripes, in [-1, 1] and
// evaluated in body coordinates so the pattern moves with the occupant.
struct RunPattern {
  double tone;
  double angle;
  double wavelength;
  double phase;
};

RunPattern run_pattern(int run) {
  static constexpr std::array<RunPattern, 5> kRuns = {{
      {0.55, 0.0, 14.0, 0.0},
      {0.3, 1.2, 18.0, 1.0},
      {0.1, 0.6, 12.0, 2.0},
      {-1.0, 2.0, 20.0, 0.5},
      {0.9, 0.3, 16.0, 1.5},
  }};
  if (run <= static_cast<int>(kRuns.size())) return kRuns[static_cast<std::size_t>(run - 1)];
  const std::uint64_t h = mix64(static_cast<std::uint64_t>(run));
  auto unit = [](std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; };
  return {2.0 * unit(h) - 1.0, std::numbers::pi * unit(mix64(h)), 12.0 + 8.0 * unit(mix64(h + 1)),
          2.0 * std::numbers::pi * unit(mix64(h + 2))};
}

double pattern_at(const RunPattern& p, double dy, double dx) {
  const double u = dx * std::cos(p.angle) + dy * std::sin(p.angle);
  const double v = p.tone + 0.5 * std::sin(2.0 * std::numbers::pi * u / p.wavelength + p.phase);
  return std::clamp(v, -1.0, 1.0);
}

struct Blob {
  double cy, cx, ry, rx;
};

// Offsets relative to the body center.
struct Prop {
  int r0, c0, r1, c1;
  double value;
};

struct Pose {
  bool present = false;
  Blob body{};
  Blob head{};
  std::vector<Blob> hands;
  // Objects in use (papers on the lap, a laptop on the desk).
  std::vector<Prop> props;
};

void fill_ellipse(Image& img, const Blob& b, auto&& shade) {
  const int r0 = static_cast<int>(std::floor(b.cy - b.ry));
  const int r1 = static_cast<int>(std::ceil(b.cy + b.ry));
  const int c0 = static_cast<int>(std::floor(b.cx - b.rx));
  const int c1 = static_cast<int>(std::ceil(b.cx + b.rx));
  for (int r = std::max(r0, 0); r <= std::min(r1, kImageSide - 1); ++r) {
    for (int c = std::max(c0, 0); c <= std::min(c1, kImageSide - 1); ++c) {
      const double dy = (r - b.cy) / b.ry;
      const double dx = (c - b.cx) / b.rx;
      if (dy * dy + dx * dx <= 1.0) {
        img[static_cast<std::size_t>(r * kImageSide + c)] = shade(r - b.cy, c - b.cx);
      }
    }
  }
}

Pose pose_for(std::string_view id) {
  Pose p;
  p.present = true;
  auto seated = [&](double cy, double cx, double hy, double hx) {
    p.body = {cy, cx, 10.0, 10.0};
    p.head = {hy, hx, 4.0, 4.0};
  };
  if (id == "A00") {
    p.present = false;
  } else if (id == "A10") {
    p.body = {38, 22, 8.0, 7.0};
    p.head = {38, 22, 3.0, 3.0};
  } else if (id == "A11") {
    p.body = {34, 11, 8.0, 7.0};
    p.head = {34, 8, 3.0, 3.0};
  } else if (id == "A20") {
    seated(32, 52, 35, 52);
  } else if (id == "A21") {
    seated(32, 52, 35, 52);
    p.props.push_back({-8, -4, -1, 3, kPaper});
  } else if (id == "A22") {
    seated(32, 52, 35, 52);
    p.props.push_back({-20, -6, -13, 5, kLaptop});
  } else if (id == "A23") {
    seated(30, 52, 33, 52);
  } else if (id == "A30") {
    seated(48, 44, 46, 44);
  } else if (id == "A31") {
    seated(48, 44, 46, 44);
    p.props.push_back({-4, -2, 3, 5, kPaper});
  } else if (id == "A32") {
    p.body = {54, 47, 7.0, 17.0};
    p.head = {54, 33, 4.0, 4.0};
  } else if (id == "A40") {
    seated(24, 16, 27, 16);
  } else if (id == "A41") {
    seated(21, 16, 23, 16);
    p.hands = {{12, 9, 3.0, 3.0}, {12, 23, 3.0, 3.0}};
  } else if (id == "A42") {
    seated(18, 16, 20, 16);
    p.hands = {{8, 3, 3.0, 3.0}, {8, 29, 3.0, 3.0}};
  } else {
    throw ValidationError("unknown scene id \"" + std::string(id) + "\"");
  }
  return p;
}

}  // namespace

Region zone_region(Zone zone) {
  switch (zone) {
    case Zone::kPiano: return kPiano;
    case Zone::kDesk: return kDesk;
    case Zone::kSofa: return kSofa;
    case Zone::kMirror: return kMirror;
    case Zone::kDoor: return kDoor;
  }
  return kPiano;
}

std::optional<std::pair<double, double>> occupant_anchor(std::string_view scene) {
  const Pose pose = pose_for(find_scene(scene).id);
  if (!pose.present) return std::nullopt;
  return std::pair{pose.body.cy, pose.body.cx};
}

std::vector<double> block_features(std::span<const double> image) {
  if (image.size() != static_cast<std::size_t>(kImageSide * kImageSide)) {
    throw ValidationError("image must be " + std::to_string(kImageSide) + "x" +
                          std::to_string(kImageSide));
  }
  constexpr int blocks = kImageSide / kBlockSide;
  std::vector<double> out(static_cast<std::size_t>(kFeatureDim), 0.0);
  for (int br = 0; br < blocks; ++br) {
    for (int bc = 0; bc < blocks; ++bc) {
      double sum = 0.0;
      for (int r = br * kBlockSide; r < (br + 1) * kBlockSide; ++r) {
        for (int c = bc * kBlockSide; c < (bc + 1) * kBlockSide; ++c) {
          sum += image[static_cast<std::size_t>(r * kImageSide + c)];
        }
      }
      out[static_cast<std::size_t>(br * blocks + bc)] = sum / (kBlockSide * kBlockSide);
    }
  }
  return out;
}

SceneFrame render_frame(std::string_view scene, RunId run, const GeneratorConfig& config,
                        Rng& draw) {
  config.validate();
  const SceneEntry& entry = find_scene(scene);
  Pose pose = pose_for(entry.id);

  Image img(static_cast<std::size_t>(kImageSide * kImageSide));
  draw_room(img, entry.id == "A23");

  // Jitter is drawn even for the empty room so every scene consumes the
  // stream identically.
  const int jy = config.class_jitter ? draw.between(-config.class_jitter, config.class_jitter) : 0;
  const int jx = config.class_jitter ? draw.between(-config.class_jitter, config.class_jitter) : 0;

  if (pose.present) {
    auto shift = [&](Blob b) {
      b.cy += jy;
      b.cx += jx;
      return b;
    };
    const RunPattern pattern = run_pattern(run.index);
    const double strength = config.run_effect_strength;
    fill_ellipse(img, shift(pose.body), [&](double dy, double dx) {
      return kOccupant * (1.0 + strength * pattern_at(pattern, dy, dx));
    });
    fill_ellipse(img, shift(pose.head), [](double, double) { return kHair; });
    for (const Blob& hand : pose.hands) {
      fill_ellipse(img, shift(hand), [](double, double) { return kSkin; });
    }
    const int oy = static_cast<int>(pose.body.cy) + jy;
    const int ox = static_cast<int>(pose.body.cx) + jx;
    for (const Prop& prop : pose.props) {
      fill_rect(img, oy + prop.r0, ox + prop.c0, oy + prop.r1, ox + prop.c1, prop.value);
    }
  }

  if (config.pixel_noise_sigma > 0.0) {
    for (double& px : img) px += config.pixel_noise_sigma * draw.gaussian();
  }
  for (double& px : img) px = std::clamp(px, 0.0, 1.0);

  SceneFrame frame;
  frame.features = block_features(img);
  frame.image = std::move(img);
  frame.scene = entry.id;
  frame.run = run.index;
  return frame;
}

Rng frame_stream(const GeneratorConfig& config, std::string_view scene, RunId run,
                 std::uint64_t sample_index) {
  return Rng(derive_seed(config.seed, scene_index(scene), static_cast<std::uint64_t>(run.index),
                         sample_index));
}

int samples_per_run(const SceneEntry& scene, int runs, double scale) {
  return static_cast<int>(std::lround(scene.shots * scale / runs));
}

Dataset generate_dataset(int runs, double scale, const GeneratorConfig& config) {
  config.validate();
  if (runs < 2) {
    throw ValidationError("at least 2 runs are required for cross-run evaluation, got " +
                          std::to_string(runs));
  }
  if (!(scale > 0.0 && scale <= 1.0)) throw ValidationError("scale must be in (0, 1]");
  for (const SceneEntry& entry : catalog()) {
    if (samples_per_run(entry, runs, scale) == 0) {
      throw ValidationError("scale " + std::to_string(scale) + " yields no samples of " +
                            entry.id + " per run");
    }
  }

  Dataset dataset(kDefaultSwitches, kFeatureDim);
  for (int r = 1; r <= runs; ++r) {
    double clock = 0.0;
    for (const SceneEntry& entry : catalog()) {
      const ClassLabel label = encode_label(as_switches(entry.preferred_output));
      const int count = samples_per_run(entry, runs, scale);
      for (int k = 0; k < count; ++k) {
        Rng draw = frame_stream(config, entry.id, RunId(r), static_cast<std::uint64_t>(k));
        SceneFrame frame = render_frame(entry.id, RunId(r), config, draw);
        dataset.append(make_record(std::move(frame.features), label, r, clock,
                                   SampleSource::kSynthetic, entry.id));
        clock += 1.0;
      }
    }
  }
  return dataset;
}

std::string encode_pgm(std::span<const double> image, int width, int height) {
  if (image.size() != static_cast<std::size_t>(width * height)) {
    throw ValidationError("image size does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + image.size());
  for (double px : image) {
    out.push_back(static_cast<char>(std::lround(std::clamp(px, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_pgm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace lfba
