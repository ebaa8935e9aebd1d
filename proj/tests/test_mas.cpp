#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "lfba/error.hpp"
#include "lfba/mas.hpp"
#include "lfba/random.hpp"
#include "mas_properties.hpp"
#include "oracles.hpp"

using namespace lfba;

namespace {

using namespace masprop;

std::vector<ClassLabel> labels(std::initializer_list<int> values) {
  std::vector<ClassLabel> out;
  for (int v : values) out.push_back({v, 4});
  return out;
}

}  // namespace

TEST(Mas, ManualPressEmitsWithoutSample) {
  const Transition t = handle_event(state_with(Mode::kManualNoTraining, "0000"), press(1.0, 3));
  EXPECT_EQ(format_bits(t.state.switches), "0010");
  ASSERT_EQ(t.effects.size(), 1u);
  EXPECT_EQ(t.effects[0], Effect(EmitControl{parse_control_bits("0010")}));
  EXPECT_EQ(t.state.settle_until, 6.0);
}

TEST(Mas, SettledTrainingFrameRecordsSample) {
  const Transition t = handle_event(state_with(Mode::kManualWithTraining, "0011"), frame(10.0, 4));
  const auto samples = effects_of<RecordSample>(t.effects);
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].label.value, 3);
  EXPECT_EQ(samples[0].frame->frame_id, 4u);
  EXPECT_EQ(samples[0].source, SampleSource::kManualTraining);
}

TEST(Mas, UnsettledTrainingFrameOnlyLogs) {
  ControllerState s = state_with(Mode::kManualWithTraining, "0011");
  s = handle_event(s, press(1.0, 1)).state;
  const Transition t = handle_event(s, frame(3.0));
  EXPECT_TRUE(effects_of<RecordSample>(t.effects).empty());
  EXPECT_EQ(effects_of<LogEntry>(t.effects).size(), 1u);
  const Transition later = handle_event(t.state, frame(6.0));
  ASSERT_EQ(effects_of<RecordSample>(later.effects).size(), 1u);
  EXPECT_EQ(effects_of<RecordSample>(later.effects)[0].label.value, encode_label(parse_bits("1011")).value);
}

TEST(Mas, MajorityOfWindowDrivesControls) {
  ControllerState s = state_with(Mode::kAutomation, "0000");
  s.prediction_window = labels({8, 8});
  const Transition t = handle_event(s, ready(1.0, 2));
  EXPECT_EQ(t.state.prediction_window, labels({8, 8, 2}));
  ASSERT_EQ(t.effects.size(), 1u);
  EXPECT_EQ(t.effects[0], Effect(EmitControl{parse_control_bits("1000")}));
  EXPECT_EQ(format_bits(t.state.switches), "0000");

  // Already showing the majority: nothing to do.
  const Transition again = handle_event(t.state, ready(2.0, 8));
  EXPECT_TRUE(again.effects.empty());
  EXPECT_EQ(again.state.prediction_window, labels({8, 2, 8}));
}

TEST(Mas, NoMajorityKeepsControls) {
  ControllerState s = state_with(Mode::kAutomation, "0000");
  s.prediction_window = labels({8, 2});
  const Transition t = handle_event(s, ready(1.0, 3));
  EXPECT_TRUE(t.effects.empty());
  EXPECT_EQ(format_bits(t.state.controls), "0000");
}

TEST(Mas, WindowMustFillBeforeActing) {
  ControllerState s = state_with(Mode::kAutomation, "0000");
  s = handle_event(s, ready(1.0, 8)).state;
  const Transition t = handle_event(s, ready(2.0, 8));
  EXPECT_TRUE(t.effects.empty());
  EXPECT_EQ(handle_event(t.state, ready(3.0, 8)).effects.size(), 1u);
}

TEST(Mas, MajorityExamples) {
  EXPECT_EQ(majority(labels({8, 8, 2}), 3), (ClassLabel{8, 4}));
  EXPECT_FALSE(majority(labels({8, 2, 3}), 3));
  EXPECT_EQ(majority(labels({5}), 1), (ClassLabel{5, 4}));
  EXPECT_THROW(majority(labels({}), 3), ValidationError);
}

TEST(Mas, MajorityMatchesOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(7));
    std::vector<ClassLabel> window;
    std::vector<int> raw;
    for (int i = 0; i < k; ++i) {
      const int v = static_cast<int>(rng.below(3));
      window.push_back({v, 4});
      raw.push_back(v);
    }
    const auto got = majority(window, k);
    const auto expect = oracle::majority(raw, k);
    ASSERT_EQ(got.has_value(), expect.has_value());
    if (got) {
      EXPECT_EQ(got->value, *expect);
    }
  }
}

TEST(Mas, OverrideRecordsCorrectiveSampleAndHolds) {
  ControllerState s = state_with(Mode::kAutomation, "0000");
  s.prediction_window = labels({8, 8});
  s = handle_event(s, frame(10.0, 1)).state;
  const Transition t = handle_event(s, press(10.5, 2));
  EXPECT_EQ(format_bits(t.state.switches), "0100");
  EXPECT_EQ(format_bits(t.state.controls), "0100");
  const auto samples = effects_of<RecordSample>(t.effects);
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].label.value, 4);
  EXPECT_EQ(samples[0].source, SampleSource::kOverride);
  EXPECT_EQ(samples[0].frame->frame_id, 1u);
  EXPECT_TRUE(t.state.prediction_window.empty());
  EXPECT_EQ(t.state.override_until, 15.5);

  // Automation stays quiet until the hold expires.
  const Transition held = handle_event(t.state, frame(12.0, 2));
  EXPECT_TRUE(effects_of<RequestPrediction>(held.effects).empty());
  const Transition late = handle_event(held.state, ready(13.0, 8));
  EXPECT_TRUE(late.state.prediction_window.empty());
  const Transition resumed = handle_event(late.state, frame(16.0, 3));
  EXPECT_EQ(effects_of<RequestPrediction>(resumed.effects).size(), 1u);
}

TEST(Mas, OverrideWithoutFrameLogs) {
  const Transition t = handle_event(state_with(Mode::kAutomation, "0000"), press(1.0, 1));
  EXPECT_TRUE(effects_of<RecordSample>(t.effects).empty());
  EXPECT_EQ(effects_of<EmitControl>(t.effects).size(), 1u);
  EXPECT_EQ(effects_of<LogEntry>(t.effects).size(), 1u);
}

TEST(Mas, ModeChanges) {
  ControllerState s = state_with(Mode::kAutomation, "0011");
  s.controls = parse_control_bits("1000");
  s.prediction_window = labels({8, 8, 8});
  s.degraded = true;
  const Transition m = handle_event(s, mode(1.0, Mode::kManualNoTraining));
  EXPECT_EQ(m.effects, std::vector<Effect>{EmitControl{parse_control_bits("0011")}});
  EXPECT_FALSE(m.state.degraded);
  EXPECT_TRUE(m.state.prediction_window.empty());

  // Entering a manual mode always emits, even if nothing changed.
  const Transition m2 = handle_event(m.state, mode(2.0, Mode::kManualWithTraining));
  EXPECT_EQ(m2.effects, std::vector<Effect>{EmitControl{parse_control_bits("0011")}});

  const Transition a = handle_event(m2.state, mode(3.0, Mode::kAutomation));
  EXPECT_TRUE(effects_of<EmitControl>(a.effects).empty());
  EXPECT_TRUE(a.state.prediction_window.empty());
  EXPECT_EQ(a.state.mode, Mode::kAutomation);

  const Transition same = handle_event(a.state, mode(4.0, Mode::kAutomation));
  EXPECT_EQ(effects_of<LogEntry>(same.effects).size(), 1u);
  EXPECT_EQ(same.effects.size(), 1u);
}

TEST(Mas, ManualModesDiscardPredictions) {
  for (Mode m : {Mode::kManualNoTraining, Mode::kManualWithTraining}) {
    const Transition t = handle_event(state_with(m, "0000"), ready(1.0, 8));
    EXPECT_EQ(effects_of<LogEntry>(t.effects).size(), 1u);
    EXPECT_EQ(t.effects.size(), 1u);
    EXPECT_TRUE(t.state.prediction_window.empty());
  }
}

TEST(Mas, FailureSetsDegradedAndHoldsControls) {
  ControllerState s = state_with(Mode::kAutomation, "0000");
  s.controls = parse_control_bits("1000");
  const Transition t = handle_event(s, failed(1.0));
  EXPECT_TRUE(t.state.degraded);
  EXPECT_EQ(format_bits(t.state.controls), "1000");
  EXPECT_TRUE(effects_of<EmitControl>(t.effects).empty());
  const Transition back = handle_event(t.state, ready(2.0, 8));
  EXPECT_FALSE(back.state.degraded);

  const Transition manual = handle_event(state_with(Mode::kManualNoTraining, "0000"), failed(1.0));
  EXPECT_FALSE(manual.state.degraded);
}

TEST(Mas, RejectsBadEvents) {
  const ControllerState s = state_with(Mode::kAutomation, "0000", 5.0);
  EXPECT_THROW(handle_event(s, press(4.0, 1)), StaleEventError);
  EXPECT_NO_THROW(handle_event(s, press(5.0, 1)));
  EXPECT_THROW(handle_event(s, press(std::numeric_limits<double>::quiet_NaN(), 1)), ValidationError);
  EXPECT_THROW(handle_event(s, press(6.0, 0)), ValidationError);
  EXPECT_THROW(handle_event(s, press(6.0, 5)), ValidationError);
  EXPECT_THROW(handle_event(s, ready(6.0, 3, 3)), ValidationError);
  EXPECT_THROW(handle_event(s, Event{6.0, FrameCaptured{nullptr}}), ValidationError);
  MasConfig bad;
  bad.majority_k = 0;
  EXPECT_THROW(ControllerState::initial(bad), ValidationError);
  bad = MasConfig{};
  bad.settle_delay = -1.0;
  EXPECT_THROW(ControllerState::initial(bad), ValidationError);
}

TEST(Mas, ModeNames) {
  for (Mode m : {Mode::kManualNoTraining, Mode::kManualWithTraining, Mode::kAutomation}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_mode("MANUAL_WITH_TRAINING"), Mode::kManualWithTraining);
  EXPECT_THROW(parse_mode("auto"), ValidationError);
}

TEST(MasProperties, RandomSequences) {
  const masprop::SuiteResult r = masprop::run_suite(20240607, 10000);
  ASSERT_TRUE(r.violation.empty()) << r.violation;
  EXPECT_EQ(r.sequences, 10000);
  // The generator exercises every branch often enough to matter.
  EXPECT_GT(r.manual_only, 1000);
  EXPECT_GT(r.samples, 10000u);
  EXPECT_GT(r.emits, 10000u);
}
