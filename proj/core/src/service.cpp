#include "foodtrack/service.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>
#include <json.hpp>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

using json = nlohmann::json;

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), kJson);
}

std::optional<double> query_number(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const std::string text = req.get_param_value(key);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ValueError(std::string("query parameter '") + key + "' is not a number: '" + text + "'");
  }
  return v;
}

bool query_flag(const httplib::Request& req, const char* key, bool fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValueError(std::string("query parameter '") + key + "' must be true or false");
}

NutritionSource query_source(const httplib::Request& req) {
  if (!req.has_param("source")) return NutritionSource::local;
  const std::string v = req.get_param_value("source");
  if (v == "local") return NutritionSource::local;
  if (v == "remote") return NutritionSource::remote;
  throw ValueError("query parameter 'source' must be local or remote");
}

}  // namespace

struct DetectionService::Impl {
  std::shared_ptr<const Pipeline> pipeline;
  httplib::Server server;
};

DetectionService::DetectionService(std::shared_ptr<const Pipeline> pipeline, ServiceOptions options)
    : impl_(std::make_unique<Impl>()), options_(std::move(options)) {
  if (!pipeline) throw ValueError("DetectionService: pipeline is null");
  impl_->pipeline = std::move(pipeline);
  const Pipeline& p = *impl_->pipeline;
  httplib::Server& server = impl_->server;

  const int threads = options_.threads > 0
                          ? options_.threads
                          : std::max(2, static_cast<int>(std::thread::hardware_concurrency()));
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  server.set_payload_max_length(p.config().max_body_bytes);
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  const std::size_t cap = p.config().max_body_bytes;
  server.set_error_handler([cap](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send_error(res, 413, "request body exceeds the " + std::to_string(cap) + " byte limit");
    } else if (res.status == 404) {
      send_error(res, 404, "no such endpoint");
    } else {
      send_error(res, res.status, httplib::status_message(res.status));
    }
  });

  server.Get("/v1/health", [&p](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"model_checksum", p.weights_checksum()}}.dump(), kJson);
  });

  server.Get("/v1/labels", [&p](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"labels", p.labels()}}.dump(), kJson);
  });

  server.Options("/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Post("/v1/detect", [&p](const httplib::Request& req, httplib::Response& res) {
    DetectOptions options;
    bool timing = true;
    try {
      options.conf_threshold = query_number(req, "conf_threshold");
      options.nms_threshold = query_number(req, "nms_threshold");
      options.source = query_source(req);
      timing = query_flag(req, "timing", true);
    } catch (const ValueError& e) {
      return send_error(res, 400, e.what());
    }

    const std::string* body = &req.body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) return send_error(res, 400, "multipart body lacks an 'image' field");
      body = &req.files.find("image")->second.content;
    }
    if (body->empty()) return send_error(res, 400, "request body is empty; send an image");

    try {
      const auto* bytes = reinterpret_cast<const std::uint8_t*>(body->data());
      const DetectResponse response = p.detect_image({bytes, body->size()}, options);
      res.set_content(to_json(response, timing), kJson);
    } catch (const FormatError& e) {
      send_error(res, 415, std::string("undecodable image: ") + e.what());
    } catch (const ValueError& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
}

DetectionService::~DetectionService() { stop(); }

int DetectionService::bind() {
  if (port_ >= 0) return port_;
  if (options_.port == 0) {
    port_ = impl_->server.bind_to_any_port(options_.host);
  } else if (impl_->server.bind_to_port(options_.host, options_.port)) {
    port_ = options_.port;
  }
  if (port_ < 0) {
    throw Error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return port_;
}

void DetectionService::run() {
  bind();
  impl_->server.listen_after_bind();
}

int DetectionService::start() {
  bind();
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void DetectionService::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace foodtrack
