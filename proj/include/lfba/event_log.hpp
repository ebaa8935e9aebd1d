#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfba/mas.hpp"

namespace lfba {

inline constexpr int kEventLogFormatVersion = 1;

// One processed event and the effects it produced, in order. Effects are
// kept in their serialized form since that is what replay compares.
struct LoggedStep {
  Event event;
  std::vector<nlohmann::json> effects;
};

struct EventLog {
  MasConfig config;
  std::vector<LoggedStep> steps;
};

// Frames are stored without their raster; features, ids and timestamps are
// kept bit-exact as hex floats.
nlohmann::json frame_to_json(const SceneFrame& frame);
SceneFrame frame_from_json(const nlohmann::json& j);
nlohmann::json event_to_json(const Event& event);
Event event_from_json(const nlohmann::json& j);
nlohmann::json effect_to_json(const Effect& effect);

// Appends one line per step; the header is written on construction.
class EventLogWriter {
 public:
  EventLogWriter(const std::filesystem::path& path, const MasConfig& config);

  void append(const Event& event, std::span<const Effect> effects);
  void append(const LoggedStep& step);

 private:
  std::ofstream out_;
  std::size_t seq_ = 0;
};

void save_event_log(const EventLog& log, const std::filesystem::path& path);
EventLog load_event_log(const std::filesystem::path& path);

struct ReplayResult {
  std::size_t events = 0;
  std::size_t effects = 0;
  // Step index and description of the first divergence.
  std::optional<std::string> mismatch;
  ControllerState final_state;

  bool ok() const { return !mismatch; }
};

// Runs the logged events through handle_event from the initial state and
// compares every produced effect against the recorded one.
ReplayResult replay(const EventLog& log);

}  // namespace lfba
