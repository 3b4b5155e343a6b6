#pragma once

// JSON-over-HTTP front of the review store, consumed by the browser UI.
//
//   GET  /api/batches                       batch list with progress
//   GET  /api/batches/{id}/next-task        {"task": ReviewTask|null, "progress": ...}
//   POST /api/candidates/{id}/decision      {verdict, annotator, reason?} -> 200 | 409
//   GET  /api/real/{class}?page=&page_size= paginated real-image feed
//   GET  /images/real/{image_id}.png        real crops
//   GET  /images/batches/{batch}/images/... candidate images

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "synthaug/dataset/curation.hpp"
#include "synthaug/verification/review_store.hpp"

namespace synthaug::verification {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  // 0 binds an ephemeral port.
  int port = 8080;
  // Real images browsable in the explorer and used to resolve reference URLs.
  std::vector<dataset::ImageRecord> real_records;
  int default_page_size = 24;
  // Optional directory with a built single-page UI mounted at "/".
  std::filesystem::path static_dir;
};

class VerificationService {
 public:
  VerificationService(ReviewStore& store, ServiceConfig config);
  ~VerificationService();
  VerificationService(const VerificationService&) = delete;
  VerificationService& operator=(const VerificationService&) = delete;

  // Binds the socket and returns the bound port.
  int bind();
  // Serves until stop(); call bind() first.
  void serve();
  // bind() plus serve() on a background thread. Returns the port.
  int start_background();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace synthaug::verification
