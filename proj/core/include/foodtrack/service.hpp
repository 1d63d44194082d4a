#pragma once

#include <memory>
#include <string>
#include <thread>

#include "foodtrack/pipeline.hpp"

namespace foodtrack {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int threads = 0;  // 0: hardware concurrency (at least 2)
};

// /v1 JSON endpoints over a shared pipeline:
//   GET  /v1/health  -> {"status":"ok","model_checksum":...}
//   GET  /v1/labels  -> {"labels":[...]}
//   POST /v1/detect  -> DetectResponse JSON; raw image body or multipart
//                       field "image"; query conf_threshold, nms_threshold,
//                       source=local|remote, timing=true|false
// Bodies over the configured max_body_bytes get 413 with a JSON diagnostic.
class DetectionService {
 public:
  DetectionService(std::shared_ptr<const Pipeline> pipeline, ServiceOptions options);
  ~DetectionService();

  DetectionService(const DetectionService&) = delete;
  DetectionService& operator=(const DetectionService&) = delete;

  // Binds the socket and returns the bound port. Throws Error on failure.
  int bind();

  // Serves until stop(). bind() is called first when needed.
  void run();

  // run() on a background thread; returns once the socket is bound.
  int start();
  void stop();

  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ServiceOptions options_;
  int port_ = -1;
  std::thread thread_;
};

}  // namespace foodtrack
