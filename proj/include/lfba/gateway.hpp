#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lfba/dataset.hpp"
#include "lfba/event_log.hpp"
#include "lfba/mas.hpp"
#include "lfba/predictor.hpp"
#include "lfba/scene_sim.hpp"

namespace httplib {
class Server;
}

namespace lfba {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  double frame_period = 1.0;  // simulated seconds per frame
  double tick_rate = 1.0;     // simulated seconds per real second
  bool start_paused = false;
  MasConfig mas;
  GeneratorConfig generator;
  TrainConfig training;
  std::string scene = "A00";
  int run = 1;
  std::optional<RemoteEndpoint> external_predictor;
  // Used instead of model_path when set.
  std::optional<PredictorModel> model;
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> dataset_path;
  std::optional<std::filesystem::path> event_log_path;

  void validate() const;
};

struct LastPrediction {
  std::uint64_t frame_id = 0;
  ClassLabel label;
  std::vector<double> probs;
};

// Immutable point-in-time view published after every transition.
struct Snapshot {
  std::uint64_t version = 0;
  double sim_time = 0.0;
  Mode mode = Mode::kManualNoTraining;
  SwitchVector switches;
  ControlVector controls;
  bool degraded = false;
  std::vector<ClassLabel> prediction_window;
  double settle_until = 0.0;
  std::string scene;
  int run = 1;
  FramePtr frame;
  std::optional<LastPrediction> last_prediction;
  std::size_t dataset_size = 0;
  bool model_loaded = false;
  std::size_t model_train_samples = 0;
  bool paused = false;
  double rate = 1.0;
  double frame_period = 1.0;
  std::string predictor;  // "local" or the endpoint URL
};

nlohmann::json snapshot_to_json(const Snapshot& s);

struct TrainOutcome {
  std::vector<double> loss_trace;
  std::size_t samples = 0;
};

struct ClockUpdate {
  std::optional<bool> paused;
  std::optional<double> rate;
  // Simulated seconds to step forward immediately.
  std::optional<double> advance;
};

// Ordered, replayable record of everything the gateway broadcasts.
class Broadcaster {
 public:
  struct Entry {
    std::uint64_t id;
    std::string kind;
    std::string data;  // {"timestamp", "kind", "payload"}
  };

  explicit Broadcaster(std::size_t capacity = 8192) : capacity_(capacity) {}

  void publish(double timestamp, const std::string& kind, nlohmann::json payload);

  // Entries with id > after, waiting up to `timeout` for the first one.
  std::vector<Entry> wait_after(std::uint64_t after, std::chrono::milliseconds timeout);
  std::uint64_t last_id() const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Entry> entries_;
  std::size_t capacity_;
  std::uint64_t next_id_ = 1;
  bool closed_ = false;
};

class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Starts the event loop and the HTTP listener. Throws Error when the
  // address cannot be bound.
  void start();
  // Event loop only; the API is reachable through the methods below.
  void start_headless();
  void stop();
  bool running() const { return running_; }
  int port() const { return port_; }

  std::shared_ptr<const Snapshot> snapshot() const;
  Broadcaster& events() { return events_; }

  // Each call is applied on the loop and returns once it is visible.
  std::shared_ptr<const Snapshot> press(int switch_index);
  std::shared_ptr<const Snapshot> set_mode(Mode mode);
  std::shared_ptr<const Snapshot> set_scene(const std::string& scene, int run);
  std::shared_ptr<const Snapshot> set_clock(const ClockUpdate& update);
  TrainOutcome retrain(bool exclude_overrides = false);

 private:
  using Clock = std::chrono::steady_clock;

  template <typename F>
  auto on_loop(F&& fn) -> decltype(fn());

  void loop();
  void predictor_worker();
  void install_routes();

  double sim_now() const;
  void rebase_clock();
  void catch_up();
  void capture_frame(double t);
  void apply(Event event);
  void execute(const Effect& effect, double now);
  void publish_snapshot();

  GatewayConfig config_;

  // Loop-owned state.
  ControllerState state_;
  Dataset dataset_;
  std::optional<PredictorModel> model_;
  std::size_t model_train_samples_ = 0;
  std::string scene_;
  int run_ = 1;
  // Frame k is captured at simulated time k * frame_period.
  std::uint64_t next_frame_id_ = 0;
  double sim_base_ = 0.0;
  Clock::time_point real_base_;
  bool paused_ = false;
  double rate_ = 1.0;
  std::optional<LastPrediction> last_prediction_;
  std::deque<Event> local_events_;
  std::unique_ptr<EventLogWriter> log_writer_;
  std::unique_ptr<std::ofstream> dataset_out_;
  std::string last_state_key_;
  std::uint64_t version_ = 0;

  // Task queue feeding the loop.
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::atomic<bool> running_ = false;

  // Remote predictor mailbox; only the newest pending frame is kept.
  std::mutex pred_mu_;
  std::condition_variable pred_cv_;
  FramePtr pred_pending_;
  bool pred_stop_ = false;

  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  Broadcaster events_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
  std::thread loop_thread_;
  std::thread pred_thread_;
  std::thread http_thread_;
};

}  // namespace lfba
