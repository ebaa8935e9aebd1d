#include "lfba/event_log.hpp"

#include "lfba/error.hpp"
#include "lfba/hexfloat.hpp"

namespace lfba {

using nlohmann::json;

namespace {

json hex_array(std::span<const double> values) {
  json out = json::array();
  for (double v : values) out.push_back(to_hexfloat(v));
  return out;
}

std::vector<double> hex_values(const json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(from_hexfloat(v.get<std::string>()));
  return out;
}

}  // namespace

json frame_to_json(const SceneFrame& frame) {
  return json{{"frame_id", frame.frame_id},
              {"scene", frame.scene},
              {"run", frame.run},
              {"timestamp", to_hexfloat(frame.timestamp)},
              {"features", hex_array(frame.features)}};
}

SceneFrame frame_from_json(const json& j) {
  SceneFrame f;
  f.frame_id = j.at("frame_id").get<std::uint64_t>();
  f.scene = j.at("scene").get<std::string>();
  f.run = j.at("run").get<int>();
  f.timestamp = from_hexfloat(j.at("timestamp").get<std::string>());
  f.features = hex_values(j.at("features"));
  return f;
}

json event_to_json(const Event& event) {
  json j{{"type", event_kind(event)}, {"timestamp", to_hexfloat(event.timestamp)}};
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, SwitchPressed>) {
          j["index"] = e.index;
        } else if constexpr (std::is_same_v<T, FrameCaptured>) {
          j["frame"] = frame_to_json(*e.frame);
        } else if constexpr (std::is_same_v<T, ModeChanged>) {
          j["mode"] = to_string(e.mode);
        } else if constexpr (std::is_same_v<T, PredictionReady>) {
          j["probs"] = hex_array(e.prediction.probs);
          j["argmax"] = e.prediction.argmax.value;
          j["n"] = e.prediction.argmax.n;
          j["frame_id"] = e.frame_id;
        } else {
          j["reason"] = e.reason;
        }
      },
      event.body);
  return j;
}

Event event_from_json(const json& j) {
  Event ev;
  ev.timestamp = from_hexfloat(j.at("timestamp").get<std::string>());
  const std::string type = j.at("type").get<std::string>();
  if (type == "switch_pressed") {
    ev.body = SwitchPressed{j.at("index").get<int>()};
  } else if (type == "frame_captured") {
    ev.body = FrameCaptured{std::make_shared<const SceneFrame>(frame_from_json(j.at("frame")))};
  } else if (type == "mode_changed") {
    ev.body = ModeChanged{parse_mode(j.at("mode").get<std::string>())};
  } else if (type == "prediction_ready") {
    PredictionReady p;
    p.prediction.probs = hex_values(j.at("probs"));
    p.prediction.argmax = ClassLabel{j.at("argmax").get<int>(), j.at("n").get<int>()};
    p.frame_id = j.at("frame_id").get<std::uint64_t>();
    ev.body = std::move(p);
  } else if (type == "prediction_failed") {
    ev.body = PredictionFailed{j.at("reason").get<std::string>()};
  } else {
    throw ValidationError("unknown event type \"" + type + "\"");
  }
  return ev;
}

json effect_to_json(const Effect& effect) {
  json j{{"type", effect_kind(effect)}};
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, EmitControl>) {
          j["controls"] = format_bits(e.controls);
        } else if constexpr (std::is_same_v<T, RecordSample>) {
          j["frame"] = frame_to_json(*e.frame);
          j["label"] = e.label.value;
          j["label_bits"] = format_label(e.label);
          j["source"] = to_string(e.source);
        } else if constexpr (std::is_same_v<T, RequestPrediction>) {
          j["frame_id"] = e.frame->frame_id;
        } else {
          j["message"] = e.message;
        }
      },
      effect);
  return j;
}

namespace {

json header_json(const MasConfig& c) {
  return json{{"version", kEventLogFormatVersion},
              {"n", c.n},
              {"settle_delay", to_hexfloat(c.settle_delay)},
              {"majority_k", c.majority_k}};
}

json step_json(std::size_t seq, const Event& event, json effects) {
  return json{{"seq", seq}, {"event", event_to_json(event)}, {"effects", std::move(effects)}};
}

}  // namespace

EventLogWriter::EventLogWriter(const std::filesystem::path& path, const MasConfig& config)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << header_json(config).dump() << '\n' << std::flush;
}

void EventLogWriter::append(const Event& event, std::span<const Effect> effects) {
  json fx = json::array();
  for (const Effect& e : effects) fx.push_back(effect_to_json(e));
  out_ << step_json(seq_++, event, std::move(fx)).dump() << '\n' << std::flush;
}

void EventLogWriter::append(const LoggedStep& step) {
  out_ << step_json(seq_++, step.event, json(step.effects)).dump() << '\n' << std::flush;
}

void save_event_log(const EventLog& log, const std::filesystem::path& path) {
  EventLogWriter w(path, log.config);
  for (const auto& s : log.steps) w.append(s);
}

EventLog load_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  EventLog log;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(in, text)) throw ParseError("missing header", 1);
  ++line;
  try {
    const json h = json::parse(text);
    if (h.at("version").get<int>() != kEventLogFormatVersion) {
      throw ParseError("unsupported event log version", line);
    }
    log.config.n = h.at("n").get<int>();
    log.config.settle_delay = from_hexfloat(h.at("settle_delay").get<std::string>());
    log.config.majority_k = h.at("majority_k").get<int>();
    log.config.validate();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), line);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    try {
      const json j = json::parse(text);
      LoggedStep step;
      step.event = event_from_json(j.at("event"));
      for (const auto& fx : j.at("effects")) step.effects.push_back(fx);
      log.steps.push_back(std::move(step));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
  }
  return log;
}

ReplayResult replay(const EventLog& log) {
  ReplayResult r;
  ControllerState state = ControllerState::initial(log.config);
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const LoggedStep& step = log.steps[i];
    Transition t;
    try {
      t = handle_event(state, step.event);
    } catch (const Error& e) {
      r.mismatch = "step " + std::to_string(i) + ": event rejected: " + e.what();
      break;
    }
    ++r.events;
    if (t.effects.size() != step.effects.size()) {
      r.mismatch = "step " + std::to_string(i) + ": " + std::to_string(t.effects.size()) +
                   " effects, log has " + std::to_string(step.effects.size());
      break;
    }
    for (std::size_t k = 0; k < t.effects.size(); ++k) {
      const json produced = effect_to_json(t.effects[k]);
      const json& expected = step.effects[k];
      if (produced != expected) {
        r.mismatch = "step " + std::to_string(i) + " effect " + std::to_string(k) +
                     ": produced " + produced.dump() + ", log has " + expected.dump();
        break;
      }
      ++r.effects;
    }
    if (r.mismatch) break;
    state = std::move(t.state);
  }
  r.final_state = state;
  return r;
}

}  // namespace lfba
