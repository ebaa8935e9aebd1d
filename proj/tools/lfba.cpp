// Command line front end: synthetic data, offline training and evaluation,
// the live gateway, and replay of recorded event logs.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lfba/dataset.hpp"
#include "lfba/error.hpp"
#include "lfba/eval.hpp"
#include "lfba/event_log.hpp"
#include "lfba/gateway.hpp"
#include "lfba/predictor.hpp"
#include "lfba/scene_sim.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// Every option also reads LFBA_<NAME> from the environment; flags win.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  std::string env = "LFBA_";
  for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return app->add_option("--" + name, value, help)->envname(env)->capture_default_str();
}

struct TrainFlags {
  lfba::TrainConfig cfg;
  bool raw = false;

  void add(CLI::App* app) {
    opt(app, "lr", cfg.learning_rate, "learning rate");
    opt(app, "momentum", cfg.momentum, "SGD momentum");
    opt(app, "batch", cfg.batch_size, "mini-batch size");
    opt(app, "epochs", cfg.epochs, "training epochs");
    opt(app, "train-seed", cfg.seed, "shuffle seed for training");
    app->add_flag("--raw", raw, "optimize on raw features instead of standardized ones");
  }

  lfba::TrainConfig get() const {
    lfba::TrainConfig c = cfg;
    c.standardize = !raw;
    c.validate();
    return c;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw lfba::Error("cannot open " + path + " for writing");
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lfba::Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logic-free building automation: learn light settings from wall switches"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic scene corpus");
  std::string gen_out = "data.ndjson";
  int gen_runs = lfba::kDefaultRuns;
  double gen_scale = lfba::kDefaultScale;
  lfba::GeneratorConfig gen_cfg;
  bool gen_quiet = false;
  opt(gen, "out", gen_out, "output dataset file");
  opt(gen, "runs", gen_runs, "collection runs (clothing variants)");
  opt(gen, "scale", gen_scale, "fraction of the catalog shot counts to generate");
  opt(gen, "seed", gen_cfg.seed, "generator seed");
  opt(gen, "noise", gen_cfg.pixel_noise_sigma, "pixel noise sigma");
  opt(gen, "run-effect", gen_cfg.run_effect_strength, "clothing modulation strength");
  opt(gen, "jitter", gen_cfg.class_jitter, "occupant position jitter in pixels");
  gen->add_flag("-q,--quiet", gen_quiet, "do not print the dataset profile");

  // train
  auto* tr = app.add_subcommand("train", "train the linear predictor on a dataset");
  std::string tr_data = "data.ndjson";
  std::string tr_out = "model.bin";
  bool tr_exclude_overrides = false;
  TrainFlags tr_flags;
  opt(tr, "data", tr_data, "dataset file");
  opt(tr, "model", tr_out, "checkpoint to write");
  tr->add_flag("--exclude-overrides", tr_exclude_overrides, "skip samples from automation overrides");
  tr_flags.add(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "run the merge-split and/or cross-run protocol");
  std::string ev_data = "data.ndjson";
  std::string ev_regime = "both";
  double ev_fraction = 0.8;
  std::uint64_t ev_split_seed = 0;
  std::string ev_absent = "exclude";
  std::string ev_json;
  std::string ev_out;
  TrainFlags ev_flags;
  opt(ev, "data", ev_data, "dataset file");
  opt(ev, "regime", ev_regime, "merge, cross-run or both")
      ->check(CLI::IsMember({"merge", "cross-run", "both"}));
  opt(ev, "train-fraction", ev_fraction, "train share for merge-split");
  opt(ev, "split-seed", ev_split_seed, "shuffle seed for merge-split");
  opt(ev, "absent-classes", ev_absent, "B-Acc treatment of classes missing from a fold")
      ->check(CLI::IsMember({"exclude", "zero"}));
  opt(ev, "json", ev_json, "also write machine-readable report lines here");
  opt(ev, "report", ev_out, "also write the text report here");
  ev_flags.add(ev);

  // serve
  auto* sv = app.add_subcommand("serve", "run the gateway HTTP API");
  lfba::GatewayConfig sv_cfg;
  std::string sv_model = "model.bin";
  std::string sv_data;
  std::string sv_log;
  std::string sv_predictor;
  int sv_timeout_ms = 2000;
  opt(sv, "host", sv_cfg.host, "listen address");
  opt(sv, "port", sv_cfg.port, "listen port (0 picks one)");
  opt(sv, "frame-period", sv_cfg.frame_period, "simulated seconds per frame");
  opt(sv, "rate", sv_cfg.tick_rate, "simulated seconds per real second");
  sv->add_flag("--paused", sv_cfg.start_paused, "start with the clock paused");
  opt(sv, "switches", sv_cfg.mas.n, "number of wall switches");
  opt(sv, "settle-delay", sv_cfg.mas.settle_delay, "seconds after a press before frames are recorded");
  opt(sv, "majority-k", sv_cfg.mas.majority_k, "prediction votes before automation acts");
  opt(sv, "seed", sv_cfg.generator.seed, "scene generator seed");
  opt(sv, "scene", sv_cfg.scene, "initial occupant scene");
  opt(sv, "run", sv_cfg.run, "initial run (clothing)");
  opt(sv, "model", sv_model, "checkpoint loaded at start and written by /train");
  opt(sv, "data", sv_data, "dataset file that recorded samples are appended to");
  opt(sv, "event-log", sv_log, "write a replayable event log here");
  opt(sv, "predictor-url", sv_predictor, "external predictor endpoint");
  opt(sv, "predictor-timeout-ms", sv_timeout_ms, "external predictor timeout");
  TrainFlags sv_flags;
  sv_flags.add(sv);

  // replay
  auto* rp = app.add_subcommand("replay", "re-run an event log and compare the effects");
  std::string rp_log;
  rp->add_option("log", rp_log, "event log file")->required();

  // report
  auto* rep = app.add_subcommand("report", "render a dataset profile or saved eval reports");
  std::string rep_data;
  std::string rep_results;
  opt(rep, "data", rep_data, "dataset file to profile");
  opt(rep, "results", rep_results, "report lines written by eval --json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const lfba::Dataset ds = lfba::generate_dataset(gen_runs, gen_scale, gen_cfg);
      lfba::save_dataset(ds, gen_out);
      if (!gen_quiet) std::cout << lfba::render_profile(lfba::profile(ds));
      std::cerr << "wrote " << ds.size() << " samples to " << gen_out << '\n';
    } else if (*tr) {
      lfba::Dataset ds = lfba::load_dataset(tr_data);
      std::vector<lfba::SampleSource> excluded{lfba::SampleSource::kAutomation};
      if (tr_exclude_overrides) excluded.push_back(lfba::SampleSource::kOverride);
      ds = ds.without_sources(excluded);
      const lfba::TrainResult r = lfba::train(ds, tr_flags.get());
      for (std::size_t e = 0; e < r.loss_trace.size(); ++e) {
        std::printf("epoch %2zu  loss %.6f\n", e + 1, r.loss_trace[e]);
      }
      lfba::save_model(r.model, tr_out);
      std::cerr << "trained on " << ds.size() << " samples, wrote " << tr_out << '\n';
    } else if (*ev) {
      const lfba::Dataset ds = lfba::load_dataset(ev_data);
      const auto policy = ev_absent == "zero" ? lfba::AbsentClassPolicy::kZero
                                              : lfba::AbsentClassPolicy::kExclude;
      const lfba::TrainConfig cfg = ev_flags.get();
      std::string text;
      std::string lines;
      std::optional<lfba::EvalReport> merge;
      std::optional<lfba::EvalReport> cross;
      if (ev_regime != "cross-run") {
        merge = lfba::run_merge_split(ds, cfg, ev_fraction, ev_split_seed, policy);
        text += lfba::emit_report(*merge) + "\n";
        lines += lfba::report_to_json_lines(*merge);
      }
      if (ev_regime != "merge") {
        cross = lfba::run_cross_run(ds, cfg, policy);
        text += lfba::emit_report(*cross) + "\n";
        lines += lfba::report_to_json_lines(*cross);
      }
      if (merge && cross) text += lfba::emit_comparison("linear-softmax", *merge, *cross);
      std::cout << text;
      if (!ev_json.empty()) write_file(ev_json, lines);
      if (!ev_out.empty()) write_file(ev_out, text);
    } else if (*sv) {
      sv_cfg.training = sv_flags.get();
      sv_cfg.model_path = sv_model;
      if (!sv_data.empty()) sv_cfg.dataset_path = sv_data;
      if (!sv_log.empty()) sv_cfg.event_log_path = sv_log;
      if (!sv_predictor.empty()) {
        sv_cfg.external_predictor =
            lfba::RemoteEndpoint{sv_predictor, std::chrono::milliseconds(sv_timeout_ms)};
      }
      lfba::Gateway gw(sv_cfg);
      gw.start();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << sv_cfg.host << ':' << gw.port() << '\n';
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      gw.stop();
    } else if (*rp) {
      const lfba::EventLog log = lfba::load_event_log(rp_log);
      const lfba::ReplayResult r = lfba::replay(log);
      std::cout << "events " << r.events << ", effects " << r.effects << '\n';
      if (!r.ok()) {
        std::cout << "MISMATCH " << *r.mismatch << '\n';
        return 1;
      }
      std::cout << "replay identical\n";
    } else if (*rep) {
      if (rep_data.empty() && rep_results.empty()) {
        std::cerr << "report: give --data and/or --results\n";
        return 2;
      }
      if (!rep_data.empty()) {
        std::cout << lfba::render_profile(lfba::profile(lfba::load_dataset(rep_data)));
      }
      if (!rep_results.empty()) {
        for (const auto& r : lfba::reports_from_json_lines(read_file(rep_results))) {
          std::cout << '\n' << lfba::emit_report(r);
        }
      }
    }
  } catch (const lfba::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
