#include "lfba/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <httplib.h>

#include "lfba/error.hpp"

namespace lfba {

using nlohmann::json;
using namespace std::chrono_literals;

void GatewayConfig::validate() const {
  if (!(std::isfinite(frame_period) && frame_period > 0.0)) {
    throw ValidationError("frame_period must be > 0");
  }
  if (!(std::isfinite(tick_rate) && tick_rate > 0.0)) {
    throw ValidationError("tick_rate must be > 0");
  }
  if (port < 0 || port > 65535) throw ValidationError("port must be in 0..65535");
  mas.validate();
  generator.validate();
  training.validate();
  find_scene(scene);
  RunId{run};
}

json snapshot_to_json(const Snapshot& s) {
  json window = json::array();
  for (const ClassLabel& y : s.prediction_window) window.push_back(y.value);
  json last = nullptr;
  if (s.last_prediction) {
    last = json{{"frame_id", s.last_prediction->frame_id},
                {"label", s.last_prediction->label.value},
                {"label_bits", format_label(s.last_prediction->label)},
                {"probs", s.last_prediction->probs}};
  }
  return json{
      {"version", s.version},
      {"sim_time", s.sim_time},
      {"mode", to_string(s.mode)},
      {"switches", format_bits(s.switches)},
      {"controls", format_bits(s.controls)},
      {"degraded", s.degraded},
      {"prediction_window", std::move(window)},
      {"settle_until", s.settle_until},
      {"scene", s.scene},
      {"run", s.run},
      {"frame_id", s.frame ? json(s.frame->frame_id) : json(nullptr)},
      {"last_prediction", std::move(last)},
      {"dataset_size", s.dataset_size},
      {"model", {{"loaded", s.model_loaded}, {"train_samples", s.model_train_samples}}},
      {"clock", {{"paused", s.paused}, {"rate", s.rate}, {"frame_period", s.frame_period}}},
      {"predictor", s.predictor},
  };
}

// ---------------------------------------------------------------------------
// Broadcaster

void Broadcaster::publish(double timestamp, const std::string& kind, json payload) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    json j{{"timestamp", timestamp}, {"kind", kind}, {"payload", std::move(payload)}};
    entries_.push_back({next_id_++, kind, j.dump()});
    if (entries_.size() > capacity_) entries_.pop_front();
  }
  cv_.notify_all();
}

std::vector<Broadcaster::Entry> Broadcaster::wait_after(std::uint64_t after,
                                                        std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return closed_ || next_id_ - 1 > after; });
  std::vector<Entry> out;
  for (const Entry& e : entries_) {
    if (e.id > after) out.push_back(e);
  }
  return out;
}

std::uint64_t Broadcaster::last_id() const {
  std::lock_guard lk(mu_);
  return next_id_ - 1;
}

void Broadcaster::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Broadcaster::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)), dataset_(config_.mas.n, kFeatureDim) {
  config_.validate();
  state_ = ControllerState::initial(config_.mas);
  scene_ = config_.scene;
  run_ = config_.run;
  paused_ = config_.start_paused;
  rate_ = config_.tick_rate;

  if (config_.model) {
    model_ = config_.model;
  } else if (config_.model_path && std::filesystem::exists(*config_.model_path)) {
    model_ = load_model(*config_.model_path);
  }
  if (model_ && (model_->n() != config_.mas.n || model_->feature_dim() != kFeatureDim)) {
    throw ValidationError("model shape (n=" + std::to_string(model_->n()) + ", d=" +
                          std::to_string(model_->feature_dim()) + ") does not fit the gateway");
  }

  if (config_.dataset_path) {
    const auto& path = *config_.dataset_path;
    if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
      dataset_ = load_dataset(path);
      if (dataset_.n() != config_.mas.n || dataset_.d() != kFeatureDim) {
        throw ValidationError("dataset " + path.string() + " does not match the gateway shape");
      }
    } else {
      save_dataset(dataset_, path);
    }
    dataset_out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
    if (!*dataset_out_) throw Error("cannot append to " + path.string());
  }
  if (config_.event_log_path) {
    log_writer_ = std::make_unique<EventLogWriter>(*config_.event_log_path, config_.mas);
  }
  server_ = std::make_unique<httplib::Server>();
  publish_snapshot();
}

Gateway::~Gateway() { stop(); }

void Gateway::start_headless() {
  if (running_) return;
  real_base_ = Clock::now();
  {
    std::lock_guard lk(mu_);
    stopping_ = false;
    running_ = true;
  }
  loop_thread_ = std::thread([this] { loop(); });
  if (config_.external_predictor) pred_thread_ = std::thread([this] { predictor_worker(); });
}

void Gateway::start() {
  install_routes();
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
    if (port_ < 0) throw Error("cannot bind " + config_.host);
  } else {
    if (!server_->bind_to_port(config_.host, config_.port)) {
      throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    port_ = config_.port;
  }
  start_headless();
  http_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void Gateway::stop() {
  events_.close();
  if (server_) server_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (loop_thread_.joinable()) loop_thread_.join();
  {
    std::lock_guard lk(pred_mu_);
    pred_stop_ = true;
  }
  pred_cv_.notify_all();
  if (pred_thread_.joinable()) pred_thread_.join();
  running_ = false;
}

std::shared_ptr<const Snapshot> Gateway::snapshot() const {
  std::lock_guard lk(snap_mu_);
  return snapshot_;
}

template <typename F>
auto Gateway::on_loop(F&& fn) -> decltype(fn()) {
  using R = decltype(fn());
  auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
  auto result = task->get_future();
  {
    std::lock_guard lk(mu_);
    if (!running_ || stopping_) throw Error("gateway is not running");
    tasks_.emplace_back([task] { (*task)(); });
  }
  cv_.notify_all();
  try {
    return result.get();
  } catch (const std::future_error&) {
    throw Error("gateway stopped before the request was applied");
  }
}

std::shared_ptr<const Snapshot> Gateway::press(int switch_index) {
  if (switch_index < 1 || switch_index > config_.mas.n) {
    throw ValidationError("switch index " + std::to_string(switch_index) + " outside 1.." +
                          std::to_string(config_.mas.n));
  }
  return on_loop([this, switch_index] {
    apply(Event{std::max(sim_now(), state_.last_timestamp), SwitchPressed{switch_index}});
    return snapshot();
  });
}

std::shared_ptr<const Snapshot> Gateway::set_mode(Mode mode) {
  return on_loop([this, mode] {
    apply(Event{std::max(sim_now(), state_.last_timestamp), ModeChanged{mode}});
    return snapshot();
  });
}

std::shared_ptr<const Snapshot> Gateway::set_scene(const std::string& scene, int run) {
  const std::string id = find_scene(scene).id;
  RunId{run};
  return on_loop([this, id, run] {
    scene_ = id;
    run_ = run;
    events_.publish(sim_now(), "scene", json{{"scene", id}, {"run", run}});
    publish_snapshot();
    return snapshot();
  });
}

std::shared_ptr<const Snapshot> Gateway::set_clock(const ClockUpdate& update) {
  if (update.rate && !(std::isfinite(*update.rate) && *update.rate > 0.0)) {
    throw ValidationError("rate must be > 0");
  }
  if (update.advance && !(std::isfinite(*update.advance) && *update.advance >= 0.0)) {
    throw ValidationError("advance must be >= 0");
  }
  return on_loop([this, update] {
    rebase_clock();
    if (update.paused) paused_ = *update.paused;
    if (update.rate) rate_ = *update.rate;
    if (update.advance) {
      sim_base_ += *update.advance;
      catch_up();
    }
    publish_snapshot();
    return snapshot();
  });
}

TrainOutcome Gateway::retrain(bool exclude_overrides) {
  return on_loop([this, exclude_overrides] {
    std::vector<SampleSource> excluded{SampleSource::kAutomation};
    if (exclude_overrides) excluded.push_back(SampleSource::kOverride);
    const Dataset ds = dataset_.without_sources(excluded);
    if (ds.size() == 0) throw StateError("no stored samples to train on");
    TrainResult r = train(ds, config_.training);
    model_ = std::move(r.model);
    model_train_samples_ = ds.size();
    if (config_.model_path) save_model(*model_, *config_.model_path);
    events_.publish(sim_now(), "trained",
                    json{{"samples", ds.size()}, {"final_loss", r.loss_trace.back()}});
    publish_snapshot();
    return TrainOutcome{std::move(r.loss_trace), ds.size()};
  });
}

// ---------------------------------------------------------------------------
// Loop

double Gateway::sim_now() const {
  if (paused_) return sim_base_;
  const std::chrono::duration<double> real = Clock::now() - real_base_;
  return sim_base_ + rate_ * real.count();
}

void Gateway::rebase_clock() {
  sim_base_ = sim_now();
  real_base_ = Clock::now();
}

void Gateway::catch_up() {
  const double t = sim_now();
  const double period = config_.frame_period;
  // A long stall would otherwise replay thousands of frames at once.
  constexpr double kMaxBacklog = 1000.0;
  if (t / period - static_cast<double>(next_frame_id_) > kMaxBacklog) {
    const auto skip_to = static_cast<std::uint64_t>(std::floor(t / period));
    events_.publish(t, "log",
                    json{{"message", "skipped " + std::to_string(skip_to - next_frame_id_) +
                                         " frames after a clock jump"}});
    next_frame_id_ = skip_to;
  }
  while (static_cast<double>(next_frame_id_) * period <= t) {
    capture_frame(static_cast<double>(next_frame_id_) * period);
    ++next_frame_id_;
  }
}

void Gateway::capture_frame(double t) {
  const std::uint64_t id = next_frame_id_;
  Rng rng = frame_stream(config_.generator, scene_, RunId{run_}, id);
  SceneFrame frame = render_frame(scene_, RunId{run_}, config_.generator, rng);
  frame.timestamp = t;
  frame.frame_id = id;
  events_.publish(t, "frame", json{{"frame_id", id}, {"scene", scene_}, {"run", run_}});
  apply(make_frame_event(std::move(frame)));
}

void Gateway::apply(Event event) {
  local_events_.push_back(std::move(event));
  while (!local_events_.empty()) {
    Event ev = std::move(local_events_.front());
    local_events_.pop_front();
    Transition tr = handle_event(state_, ev);
    if (log_writer_) log_writer_->append(ev, tr.effects);
    state_ = std::move(tr.state);
    if (const auto* p = std::get_if<PredictionReady>(&ev.body)) {
      last_prediction_ = LastPrediction{p->frame_id, p->prediction.argmax, p->prediction.probs};
      events_.publish(ev.timestamp, "prediction",
                      json{{"frame_id", p->frame_id},
                           {"label_bits", format_label(p->prediction.argmax)}});
    }
    for (const Effect& fx : tr.effects) execute(fx, ev.timestamp);
    publish_snapshot();
  }
}

void Gateway::execute(const Effect& effect, double now) {
  if (const auto* e = std::get_if<EmitControl>(&effect)) {
    events_.publish(now, "emit_control", json{{"controls", format_bits(e->controls)}});
  } else if (const auto* e = std::get_if<RecordSample>(&effect)) {
    const SceneFrame& f = *e->frame;
    SampleRecord record = make_record(f.features, e->label, f.run, f.timestamp, e->source, f.scene);
    if (dataset_out_) *dataset_out_ << record_to_json_line(record) << '\n' << std::flush;
    dataset_.append(std::move(record));
    events_.publish(now, "record_sample",
                    json{{"frame_id", f.frame_id},
                         {"label_bits", format_label(e->label)},
                         {"source", to_string(e->source)}});
  } else if (const auto* e = std::get_if<RequestPrediction>(&effect)) {
    if (config_.external_predictor) {
      std::lock_guard lk(pred_mu_);
      if (pred_pending_) {
        events_.publish(now, "log",
                        json{{"message", "predictor busy, dropped frame " +
                                             std::to_string(pred_pending_->frame_id)}});
      }
      pred_pending_ = e->frame;
      pred_cv_.notify_all();
    } else if (model_) {
      local_events_.push_back(
          Event{now, PredictionReady{predict(*model_, e->frame->features), e->frame->frame_id}});
    } else {
      local_events_.push_back(Event{now, PredictionFailed{"no trained model"}});
    }
  } else if (const auto* e = std::get_if<LogEntry>(&effect)) {
    events_.publish(now, "log", json{{"message", e->message}});
  }
}

void Gateway::publish_snapshot() {
  auto s = std::make_shared<Snapshot>();
  s->version = ++version_;
  s->sim_time = running_ ? sim_now() : sim_base_;
  s->mode = state_.mode;
  s->switches = state_.switches;
  s->controls = state_.controls;
  s->degraded = state_.degraded;
  s->prediction_window = state_.prediction_window;
  s->settle_until = state_.settle_until;
  s->scene = scene_;
  s->run = run_;
  s->frame = state_.last_frame;
  s->last_prediction = last_prediction_;
  s->dataset_size = dataset_.size();
  s->model_loaded = model_.has_value();
  s->model_train_samples = model_train_samples_;
  s->paused = paused_;
  s->rate = rate_;
  s->frame_period = config_.frame_period;
  s->predictor = config_.external_predictor ? config_.external_predictor->url : "local";

  const std::string key = to_string(s->mode) + format_bits(s->switches) +
                          format_bits(s->controls) + (s->degraded ? "D" : "-") + s->scene +
                          std::to_string(s->run) + (s->paused ? "P" : "-") +
                          std::to_string(s->rate) + (s->model_loaded ? "M" : "-");
  if (key != last_state_key_) {
    last_state_key_ = key;
    events_.publish(s->sim_time, "state", snapshot_to_json(*s));
  }
  std::lock_guard lk(snap_mu_);
  snapshot_ = std::move(s);
}

void Gateway::loop() {
  std::unique_lock lk(mu_);
  while (!stopping_) {
    auto deadline = Clock::now() + 250ms;
    if (!paused_) {
      const double ahead = static_cast<double>(next_frame_id_) * config_.frame_period - sim_base_;
      const auto due = real_base_ + std::chrono::duration_cast<Clock::duration>(
                                        std::chrono::duration<double>(ahead / rate_));
      deadline = std::min(deadline, due);
    }
    cv_.wait_until(lk, deadline, [&] { return stopping_ || !tasks_.empty(); });
    if (stopping_) break;
    auto batch = std::move(tasks_);
    tasks_.clear();
    lk.unlock();
    auto guarded = [this](auto&& step) {
      try {
        step();
      } catch (const std::exception& e) {
        events_.publish(sim_base_, "log", json{{"message", std::string("loop error: ") + e.what()}});
      }
    };
    guarded([this] { catch_up(); });
    for (auto& task : batch) {
      guarded([this] { catch_up(); });
      guarded(task);
    }
    lk.lock();
  }
  // Dropping the remaining tasks breaks their promises, which wakes callers.
  tasks_.clear();
}

void Gateway::predictor_worker() {
  const int n = config_.mas.n;
  while (true) {
    FramePtr frame;
    {
      std::unique_lock lk(pred_mu_);
      pred_cv_.wait(lk, [&] { return pred_stop_ || pred_pending_; });
      if (pred_stop_) return;
      frame = std::exchange(pred_pending_, nullptr);
    }
    Event ev;
    try {
      ev.body = PredictionReady{remote_predict(*config_.external_predictor, *frame, n),
                                frame->frame_id};
    } catch (const std::exception& e) {
      ev.body = PredictionFailed{e.what()};
    }
    std::lock_guard lk(mu_);
    if (stopping_) return;
    tasks_.emplace_back([this, ev = std::move(ev)]() mutable {
      ev.timestamp = std::max(sim_now(), state_.last_timestamp);
      apply(std::move(ev));
    });
    cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

template <typename F>
void respond(httplib::Response& res, F&& fn) {
  auto fail = [&](int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  };
  try {
    res.set_content(fn().dump(), "application/json");
  } catch (const json::exception& e) {
    fail(400, std::string("bad JSON: ") + e.what());
  } catch (const ValidationError& e) {
    fail(400, e.what());
  } catch (const StateError& e) {
    fail(409, e.what());
  } catch (const Error& e) {
    fail(503, e.what());
  } catch (const std::exception& e) {
    fail(500, e.what());
  }
}

}  // namespace

void Gateway::install_routes() {
  auto& svr = *server_;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  svr.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return snapshot_to_json(*snapshot()); });
  });

  svr.Post(R"(/switch/(\d+)/press)", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const int index = std::stoi(req.matches[1].str());
      return snapshot_to_json(*press(index));
    });
  });

  svr.Post("/mode", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const json body = body_json(req);
      return snapshot_to_json(*set_mode(parse_mode(body.at("mode").get<std::string>())));
    });
  });

  svr.Post("/scene", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const json body = body_json(req);
      const int run = body.contains("run") ? body.at("run").get<int>() : snapshot()->run;
      return snapshot_to_json(*set_scene(body.at("scene").get<std::string>(), run));
    });
  });

  svr.Post("/train", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const json body = body_json(req);
      const bool exclude = body.value("exclude_overrides", false);
      TrainOutcome out = retrain(exclude);
      return json{{"samples", out.samples}, {"loss_trace", out.loss_trace}};
    });
  });

  svr.Post("/clock", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const json body = body_json(req);
      ClockUpdate u;
      if (body.contains("paused")) u.paused = body.at("paused").get<bool>();
      if (body.contains("rate")) u.rate = body.at("rate").get<double>();
      if (body.contains("advance")) u.advance = body.at("advance").get<double>();
      return snapshot_to_json(*set_clock(u));
    });
  });

  svr.Get("/frame", [this](const httplib::Request&, httplib::Response& res) {
    const auto snap = snapshot();
    if (!snap->frame || snap->frame->image.empty()) {
      res.status = 404;
      res.set_content(json{{"error", "no frame captured yet"}}.dump(), "application/json");
      return;
    }
    res.set_header("X-Frame-Id", std::to_string(snap->frame->frame_id));
    res.set_content(encode_pgm(snap->frame->image), "image/x-portable-graymap");
  });

  svr.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t after = events_.last_id();
    try {
      if (req.has_param("since")) {
        after = std::stoull(req.get_param_value("since"));
      } else if (req.has_header("Last-Event-ID")) {
        after = std::stoull(req.get_header_value("Last-Event-ID"));
      }
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(json{{"error", "bad event id"}}.dump(), "application/json");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    auto cursor = std::make_shared<std::uint64_t>(after);
    res.set_chunked_content_provider(
        "text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
          const auto batch = events_.wait_after(*cursor, 500ms);
          if (batch.empty()) {
            if (events_.closed()) {
              sink.done();
              return true;
            }
            static const std::string kKeepAlive = ": keepalive\n\n";
            return sink.write(kKeepAlive.data(), kKeepAlive.size());
          }
          for (const auto& e : batch) {
            const std::string chunk = "id: " + std::to_string(e.id) + "\nevent: " + e.kind +
                                      "\ndata: " + e.data + "\n\n";
            if (!sink.write(chunk.data(), chunk.size())) return false;
            *cursor = e.id;
          }
          return true;
        });
  });
}

}  // namespace lfba
