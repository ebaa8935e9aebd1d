#include <httplib.h>

#include <json.hpp>

#include "lfba/error.hpp"
#include "lfba/predictor.hpp"
#include "lfba/scene_sim.hpp"

namespace lfba {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw ValidationError("predictor endpoint must be an http:// URL: " + url);
  }
  const auto slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

Prediction remote_predict(const RemoteEndpoint& endpoint, const SceneFrame& frame, int n) {
  const SplitUrl target = split_url(endpoint.url);
  httplib::Client client(target.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const nlohmann::json body{{"features", frame.features}, {"n", n}};
  auto res = client.Post(target.path, body.dump(), "application/json");
  if (!res) {
    throw PredictorUnavailable("predictor " + endpoint.url +
                               " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw PredictorUnavailable("predictor " + endpoint.url + " answered HTTP " +
                               std::to_string(res->status));
  }

  std::vector<double> probs;
  try {
    const auto j = nlohmann::json::parse(res->body);
    probs = j.at("probs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed predictor response: ") + e.what());
  }
  return make_prediction(std::move(probs), n, 1e-6);
}

}  // namespace lfba
