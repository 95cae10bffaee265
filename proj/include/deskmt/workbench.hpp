#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "deskmt/pipeline.hpp"

namespace deskmt {

struct WorkbenchConfig {
  std::filesystem::path state_dir;
  /// Serving checkpoint on first start; later starts resume from state_dir.
  std::filesystem::path base_checkpoint;
  std::filesystem::path prep_dir;
  /// Held-out in-domain pairs scored before and after every adaptation job.
  ParallelCorpus probe;
  /// Directory served at "/"; a built-in page is used when empty or missing.
  std::filesystem::path static_dir;
  std::size_t max_body_bytes = 1 << 20;
  std::size_t default_min_pairs = 50;
  int default_extra_epochs = 1;
  DecodeOptions decode;
  /// Called by the job thread when a job starts running. Tests use it to
  /// hold a job open or to make it fail by throwing.
  std::function<void(int job_id)> job_hook;
};

/// An API failure with its HTTP status.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Post-editing loop state: documents, segments, adaptation jobs and the
/// serving checkpoint. Every mutation is appended to state_dir/events.jsonl
/// before it is acknowledged; construction replays that log.
///
/// All methods return JSON text and throw ApiError on client errors.
class Workbench {
 public:
  explicit Workbench(WorkbenchConfig config);
  ~Workbench();
  Workbench(const Workbench&) = delete;
  Workbench& operator=(const Workbench&) = delete;

  std::string create_document(const std::string& body, const std::string& content_type);
  std::string get_document(int id) const;
  std::string get_segment(int id) const;
  std::string translate_segment(int id);
  std::string postedit_segment(int id, const std::string& body);
  std::string pending() const;
  std::string create_job(const std::string& body);
  std::string get_job(int id) const;
  std::string status() const;

  /// Blocks until no job is queued or running.
  void wait_idle() const;

  const WorkbenchConfig& config() const { return config_; }

 private:
  struct State;
  WorkbenchConfig config_;
  std::unique_ptr<State> state_;
};

/// HTTP front end for a Workbench.
class WorkbenchServer {
 public:
  explicit WorkbenchServer(Workbench& bench);
  ~WorkbenchServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace deskmt
