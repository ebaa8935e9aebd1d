#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lfba/error.hpp"
#include "lfba/event_log.hpp"
#include "lfba/random.hpp"

using namespace lfba;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lfba_test_" + name);
}

Event frame_event(double t, std::uint64_t id) {
  SceneFrame f;
  f.features = {0.1 + 0.2, 1.0 / 3.0, static_cast<double>(id % 7) / 7.0};
  f.timestamp = t;
  f.frame_id = id;
  f.scene = "A41";
  f.run = 2;
  return make_frame_event(std::move(f));
}

Event ready_event(double t, int label, std::uint64_t frame_id) {
  std::vector<double> probs(16, 0.01 / 15.0);
  probs[static_cast<std::size_t>(label)] = 0.99;
  return {t, PredictionReady{make_prediction(probs, 4, 1e-9), frame_id}};
}

// A session that passes through all three modes, overrides and failures.
std::vector<Event> session(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Event> events{{0.0, ModeChanged{Mode::kManualWithTraining}}};
  double t = 0.0;
  std::uint64_t id = 0;
  for (int i = 0; i < 300; ++i) {
    t += 0.25 + 0.1 * static_cast<double>(rng.below(10));
    switch (rng.below(8)) {
      case 0: events.push_back({t, SwitchPressed{1 + static_cast<int>(rng.below(4))}}); break;
      case 1: events.push_back({t, ModeChanged{static_cast<Mode>(rng.below(3))}}); break;
      case 2: events.push_back(ready_event(t, static_cast<int>(rng.below(2)) * 8, id)); break;
      case 3: events.push_back({t, PredictionFailed{"connection refused"}}); break;
      default: events.push_back(frame_event(t, id++));
    }
  }
  return events;
}

struct Recorded {
  ControllerState final_state;
  std::size_t effects = 0;
};

Recorded record(const std::vector<Event>& events, const MasConfig& cfg,
                const std::filesystem::path& path) {
  EventLogWriter writer(path, cfg);
  ControllerState s = ControllerState::initial(cfg);
  Recorded r;
  for (const Event& e : events) {
    Transition t = handle_event(s, e);
    writer.append(e, t.effects);
    r.effects += t.effects.size();
    s = std::move(t.state);
  }
  r.final_state = s;
  return r;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST(EventJson, RoundTripsEveryEventKind) {
  const std::vector<Event> events = {
      {0.1 + 0.2, SwitchPressed{3}},
      frame_event(1.0 / 3.0, 12),
      {2.0, ModeChanged{Mode::kAutomation}},
      ready_event(3.0, 8, 12),
      {4.0, PredictionFailed{"timeout after 2000 ms"}},
  };
  for (const Event& e : events) {
    const Event back = event_from_json(nlohmann::json::parse(event_to_json(e).dump()));
    EXPECT_EQ(back, e) << event_kind(e);
  }
  EXPECT_THROW(event_from_json(nlohmann::json{{"type", "teleport"}, {"timestamp", "0x0p+0"}}),
               ValidationError);
}

TEST(EventLog, RecordedSessionReplaysIdentically) {
  MasConfig cfg;
  cfg.settle_delay = 1.5;
  const auto path = temp_file("session.log");
  const auto events = session(3);
  const Recorded rec = record(events, cfg, path);
  const EventLog log = load_event_log(path);
  std::filesystem::remove(path);

  EXPECT_EQ(log.config.settle_delay, 1.5);
  ASSERT_EQ(log.steps.size(), events.size());
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(log.steps[i].event, events[i]);

  const ReplayResult r = replay(log);
  ASSERT_TRUE(r.ok()) << *r.mismatch;
  EXPECT_EQ(r.events, events.size());
  EXPECT_EQ(r.effects, rec.effects);
  EXPECT_EQ(r.final_state, rec.final_state);
  EXPECT_GT(rec.effects, 100u);
}

TEST(EventLog, SaveLoadRoundTrip) {
  const auto path = temp_file("session2.log");
  record(session(5), MasConfig{}, path);
  const EventLog first = load_event_log(path);
  const auto copy = temp_file("session2_copy.log");
  save_event_log(first, copy);
  EXPECT_EQ(read_lines(copy), read_lines(path));
  std::filesystem::remove(path);
  std::filesystem::remove(copy);
}

TEST(EventLog, TamperedEffectIsDetected) {
  const auto path = temp_file("tamper.log");
  record(session(7), MasConfig{}, path);
  auto lines = read_lines(path);
  std::size_t target = 0;
  for (std::size_t i = 1; i < lines.size() && !target; ++i) {
    if (lines[i].find("\"controls\":\"") != std::string::npos) target = i;
  }
  ASSERT_NE(target, 0u);
  auto j = nlohmann::json::parse(lines[target]);
  for (auto& fx : j["effects"]) {
    if (fx["type"] == "emit_control") {
      std::string bits = fx["controls"];
      bits[0] = bits[0] == '0' ? '1' : '0';
      fx["controls"] = bits;
      break;
    }
  }
  lines[target] = j.dump();
  write_lines(path, lines);
  const ReplayResult r = replay(load_event_log(path));
  std::filesystem::remove(path);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.mismatch->find("step " + std::to_string(target - 1)), std::string::npos) << *r.mismatch;
  EXPECT_EQ(r.events, target);
}

TEST(EventLog, DroppedEventIsDetected) {
  const auto path = temp_file("drop.log");
  record(session(9), MasConfig{}, path);
  auto lines = read_lines(path);
  // Losing the first press shifts every later switch state.
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].find("switch_pressed") != std::string::npos) {
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  write_lines(path, lines);
  const ReplayResult r = replay(load_event_log(path));
  std::filesystem::remove(path);
  EXPECT_FALSE(r.ok());
}

TEST(EventLog, MalformedLinesNameTheLine) {
  const auto path = temp_file("bad.log");
  record(session(11), MasConfig{}, path);
  auto lines = read_lines(path);
  lines[4] = lines[4].substr(0, lines[4].size() / 2);
  write_lines(path, lines);
  try {
    load_event_log(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  write_lines(path, {R"({"version":9,"n":4,"settle_delay":"0x0p+0","majority_k":3})"});
  EXPECT_THROW(load_event_log(path), ParseError);
  write_lines(path, {R"({"version":1,"n":4,"settle_delay":"0x0p+0","majority_k":0})"});
  EXPECT_THROW(load_event_log(path), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_event_log(path), Error);
}
