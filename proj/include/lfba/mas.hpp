#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lfba/codec.hpp"
#include "lfba/dataset.hpp"
#include "lfba/predictor.hpp"
#include "lfba/scene_sim.hpp"

namespace lfba {

enum class Mode { kManualNoTraining, kManualWithTraining, kAutomation };

// Wire names: "manual", "manual_training", "automation".
std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

inline bool is_manual(Mode m) { return m != Mode::kAutomation; }

struct MasConfig {
  int n = kDefaultSwitches;
  // Simulated seconds after a switch change during which frames are not
  // recorded. Zero records every frame.
  double settle_delay = 5.0;
  // Votes needed before automation acts; 1 disables smoothing.
  int majority_k = 3;

  void validate() const;
};

using FramePtr = std::shared_ptr<const SceneFrame>;

struct ControllerState {
  SwitchVector switches;
  ControlVector controls;
  Mode mode = Mode::kManualNoTraining;
  std::vector<ClassLabel> prediction_window;  // oldest first, at most k
  int k = 3;
  double settle_delay = 5.0;
  double settle_until = 0.0;
  // Automation stays silent until this time after a manual override.
  double override_until = 0.0;
  bool degraded = false;
  FramePtr last_frame;
  double last_timestamp = 0.0;

  static ControllerState initial(const MasConfig& config);

  // Frames compare by value.
  friend bool operator==(const ControllerState& a, const ControllerState& b);
};

struct SwitchPressed {
  int index = 1;  // 1-based
  friend bool operator==(const SwitchPressed&, const SwitchPressed&) = default;
};

struct FrameCaptured {
  FramePtr frame;
  friend bool operator==(const FrameCaptured& a, const FrameCaptured& b);
};

struct ModeChanged {
  Mode mode = Mode::kManualNoTraining;
  friend bool operator==(const ModeChanged&, const ModeChanged&) = default;
};

struct PredictionReady {
  Prediction prediction;
  std::uint64_t frame_id = 0;
  friend bool operator==(const PredictionReady&, const PredictionReady&) = default;
};

// The predictor could not be reached or answered garbage.
struct PredictionFailed {
  std::string reason;
  friend bool operator==(const PredictionFailed&, const PredictionFailed&) = default;
};

struct Event {
  double timestamp = 0.0;
  std::variant<SwitchPressed, FrameCaptured, ModeChanged, PredictionReady, PredictionFailed> body;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EmitControl {
  ControlVector controls;
  friend bool operator==(const EmitControl&, const EmitControl&) = default;
};

struct RecordSample {
  FramePtr frame;
  ClassLabel label;
  SampleSource source = SampleSource::kManualTraining;
  friend bool operator==(const RecordSample& a, const RecordSample& b);
};

struct RequestPrediction {
  FramePtr frame;
  friend bool operator==(const RequestPrediction& a, const RequestPrediction& b);
};

struct LogEntry {
  std::string message;
  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using Effect = std::variant<EmitControl, RecordSample, RequestPrediction, LogEntry>;

struct Transition {
  ControllerState state;
  std::vector<Effect> effects;
};

// Label seen more than k/2 times in the window, if any.
std::optional<ClassLabel> majority(std::span<const ClassLabel> window, int k);

// Pure transition. Throws StaleEventError when the event is older than the
// last processed one and ValidationError for malformed events.
Transition handle_event(const ControllerState& state, const Event& event);

Event make_frame_event(SceneFrame frame);

std::string effect_kind(const Effect& effect);
std::string event_kind(const Event& event);

}  // namespace lfba
