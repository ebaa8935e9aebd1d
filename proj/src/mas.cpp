#include "lfba/mas.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "lfba/error.hpp"

namespace lfba {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kManualNoTraining: return "manual";
    case Mode::kManualWithTraining: return "manual_training";
    case Mode::kAutomation: return "automation";
  }
  return "manual";
}

Mode parse_mode(std::string_view text) {
  if (text == "manual" || text == "MANUAL_NO_TRAINING") return Mode::kManualNoTraining;
  if (text == "manual_training" || text == "MANUAL_WITH_TRAINING") {
    return Mode::kManualWithTraining;
  }
  if (text == "automation" || text == "AUTOMATION") return Mode::kAutomation;
  throw ValidationError("unknown mode \"" + std::string(text) +
                        "\" (expected manual, manual_training or automation)");
}

void MasConfig::validate() const {
  check_switch_count(n);
  if (!std::isfinite(settle_delay) || settle_delay < 0.0) {
    throw ValidationError("settle_delay must be a finite value >= 0");
  }
  if (majority_k < 1) throw ValidationError("majority_k must be >= 1");
}

ControllerState ControllerState::initial(const MasConfig& config) {
  config.validate();
  ControllerState s;
  s.switches = SwitchVector(config.n);
  s.controls = ControlVector(config.n);
  s.k = config.majority_k;
  s.settle_delay = config.settle_delay;
  return s;
}

namespace {

bool same_frame(const FramePtr& a, const FramePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

}  // namespace

bool operator==(const ControllerState& a, const ControllerState& b) {
  return a.switches == b.switches && a.controls == b.controls && a.mode == b.mode &&
         a.prediction_window == b.prediction_window && a.k == b.k &&
         a.settle_delay == b.settle_delay && a.settle_until == b.settle_until &&
         a.override_until == b.override_until && a.degraded == b.degraded &&
         same_frame(a.last_frame, b.last_frame) && a.last_timestamp == b.last_timestamp;
}

bool operator==(const FrameCaptured& a, const FrameCaptured& b) {
  return same_frame(a.frame, b.frame);
}

bool operator==(const RecordSample& a, const RecordSample& b) {
  return same_frame(a.frame, b.frame) && a.label == b.label && a.source == b.source;
}

bool operator==(const RequestPrediction& a, const RequestPrediction& b) {
  return same_frame(a.frame, b.frame);
}

std::optional<ClassLabel> majority(std::span<const ClassLabel> window, int k) {
  if (window.empty()) throw ValidationError("majority of an empty window");
  if (k < 1) throw ValidationError("majority_k must be >= 1");
  std::map<int, int> counts;
  for (const ClassLabel& y : window) {
    if (++counts[y.value] * 2 > k) return y;
  }
  return std::nullopt;
}

Event make_frame_event(SceneFrame frame) {
  const double t = frame.timestamp;
  return Event{t, FrameCaptured{std::make_shared<const SceneFrame>(std::move(frame))}};
}

std::string event_kind(const Event& event) {
  struct {
    std::string operator()(const SwitchPressed&) const { return "switch_pressed"; }
    std::string operator()(const FrameCaptured&) const { return "frame_captured"; }
    std::string operator()(const ModeChanged&) const { return "mode_changed"; }
    std::string operator()(const PredictionReady&) const { return "prediction_ready"; }
    std::string operator()(const PredictionFailed&) const { return "prediction_failed"; }
  } v;
  return std::visit(v, event.body);
}

std::string effect_kind(const Effect& effect) {
  struct {
    std::string operator()(const EmitControl&) const { return "emit_control"; }
    std::string operator()(const RecordSample&) const { return "record_sample"; }
    std::string operator()(const RequestPrediction&) const { return "request_prediction"; }
    std::string operator()(const LogEntry&) const { return "log"; }
  } v;
  return std::visit(v, effect);
}

namespace {

class Step {
 public:
  Step(const ControllerState& s, double now) : st_(s), now_(now) {}

  void emit_if_changed(const ControlVector& c) {
    if (c == st_.controls) return;
    st_.controls = c;
    effects_.emplace_back(EmitControl{c});
  }

  void force_emit(const ControlVector& c) {
    st_.controls = c;
    effects_.emplace_back(EmitControl{c});
  }

  void log(std::string message) { effects_.emplace_back(LogEntry{std::move(message)}); }

  void operator()(const SwitchPressed& e) {
    if (e.index < 1 || e.index > st_.switches.size()) {
      throw ValidationError("switch index " + std::to_string(e.index) + " outside 1.." +
                            std::to_string(st_.switches.size()));
    }
    st_.switches = toggle(st_.switches, e.index);
    if (is_manual(st_.mode)) {
      emit_if_changed(as_controls(st_.switches));
      st_.settle_until = now_ + st_.settle_delay;
      return;
    }
    // Override: the occupant corrects the automation, so the new state is
    // applied at once and paired with the scene it was meant for.
    emit_if_changed(as_controls(st_.switches));
    const ClassLabel label = encode_label(st_.switches);
    if (!st_.last_frame) {
      log("override without a captured frame, no corrective sample");
    } else if (st_.last_frame->timestamp < st_.settle_until) {
      log("override frame inside settle window, no corrective sample");
    } else {
      effects_.emplace_back(RecordSample{st_.last_frame, label, SampleSource::kOverride});
    }
    st_.prediction_window.clear();
    st_.override_until = now_ + st_.settle_delay;
  }

  void operator()(const FrameCaptured& e) {
    if (!e.frame) throw ValidationError("frame event without a frame");
    st_.last_frame = e.frame;
    switch (st_.mode) {
      case Mode::kManualNoTraining:
        break;
      case Mode::kManualWithTraining:
        if (now_ >= st_.settle_until) {
          effects_.emplace_back(
              RecordSample{e.frame, encode_label(st_.switches), SampleSource::kManualTraining});
        } else {
          log("frame " + std::to_string(e.frame->frame_id) + " inside settle window");
        }
        break;
      case Mode::kAutomation:
        if (now_ < st_.override_until) {
          log("frame " + std::to_string(e.frame->frame_id) + " inside override hold");
        } else {
          effects_.emplace_back(RequestPrediction{e.frame});
        }
        break;
    }
  }

  void operator()(const ModeChanged& e) {
    if (e.mode == st_.mode) {
      log("mode already " + to_string(e.mode));
      return;
    }
    st_.mode = e.mode;
    st_.prediction_window.clear();
    if (is_manual(e.mode)) {
      st_.degraded = false;
      force_emit(as_controls(st_.switches));
    } else {
      st_.override_until = now_;
    }
  }

  void operator()(const PredictionReady& e) {
    const ClassLabel y = e.prediction.argmax;
    if (y.n != st_.switches.size() || y.value < 0 || y.value >= y.num_classes()) {
      throw ValidationError("prediction label does not fit n=" +
                            std::to_string(st_.switches.size()));
    }
    if (is_manual(st_.mode)) {
      log("prediction discarded in " + to_string(st_.mode) + " mode");
      return;
    }
    if (now_ < st_.override_until) {
      log("prediction discarded inside override hold");
      return;
    }
    st_.degraded = false;
    st_.prediction_window.push_back(y);
    if (st_.prediction_window.size() > static_cast<std::size_t>(st_.k)) {
      st_.prediction_window.erase(st_.prediction_window.begin());
    }
    if (st_.prediction_window.size() < static_cast<std::size_t>(st_.k)) return;
    if (const auto m = majority(st_.prediction_window, st_.k)) {
      emit_if_changed(decode_label(*m));
    }
  }

  void operator()(const PredictionFailed& e) {
    if (is_manual(st_.mode)) {
      log("prediction failure ignored in " + to_string(st_.mode) + " mode: " + e.reason);
      return;
    }
    st_.degraded = true;
    log("predictor unavailable, holding controls: " + e.reason);
  }

  Transition finish() && {
    st_.last_timestamp = now_;
    return {std::move(st_), std::move(effects_)};
  }

 private:
  ControllerState st_;
  double now_;
  std::vector<Effect> effects_;
};

}  // namespace

Transition handle_event(const ControllerState& state, const Event& event) {
  if (!std::isfinite(event.timestamp)) throw ValidationError("event timestamp is not finite");
  if (event.timestamp < state.last_timestamp) {
    std::ostringstream os;
    os << "event at t=" << event.timestamp << " is older than t=" << state.last_timestamp;
    throw StaleEventError(os.str());
  }
  Step step(state, event.timestamp);
  std::visit(step, event.body);
  return std::move(step).finish();
}

}  // namespace lfba
