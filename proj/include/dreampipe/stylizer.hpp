#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dreampipe/protocol.hpp"

namespace dreampipe {

// A failure worth retrying: lost connection, 5xx, or a transient error code.
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& what) : Error(ErrorKind::Backend, what) {}
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};  // doubles after each failure
};

struct BackendConfig {
  std::string type = "mock";  // mock | http | process
  std::string endpoint;       // http: e.g. http://127.0.0.1:8600
  std::vector<std::string> command;  // process: argv of the backend executable
  double timeout_s = 600.0;
  RetryPolicy retry;
};

// Any generate/align/inpaint/upscale backend. stylize() validates the request,
// retries transient failures, and checks the response against the dimension
// contract. Safe to share across threads; calls are serialized.
class Stylizer {
 public:
  explicit Stylizer(RetryPolicy retry = {}) : retry_(retry) {}
  virtual ~Stylizer() = default;
  Stylizer(const Stylizer&) = delete;
  Stylizer& operator=(const Stylizer&) = delete;

  StylizeResponse stylize(const StylizeRequest& request);
  // stylize() and decode the RGB result.
  Image8 stylize_image(const StylizeRequest& request);

  virtual std::string name() const = 0;
  int retry_count() const noexcept { return retries_.load(); }
  int call_count() const noexcept { return calls_.load(); }

 protected:
  // One attempt; throw TransientError to request a retry.
  virtual StylizeResponse call(const StylizeRequest& request);
  // Transport for remote backends: one request document in, one reply out.
  virtual std::string exchange(const std::string& request_json);

 private:
  RetryPolicy retry_;
  std::mutex mutex_;
  std::atomic<int> retries_{0};
  std::atomic<int> calls_{0};
};

class MockStylizer : public Stylizer {
 public:
  using Stylizer::Stylizer;
  std::string name() const override { return "mock"; }

 protected:
  StylizeResponse call(const StylizeRequest& request) override;
};

// POST {endpoint}/stylize with the request document as the body.
class HttpStylizer : public Stylizer {
 public:
  HttpStylizer(std::string endpoint, double timeout_s, RetryPolicy retry = {});
  std::string name() const override { return "http:" + endpoint_; }

 protected:
  std::string exchange(const std::string& request_json) override;

 private:
  std::string endpoint_;
  double timeout_s_;
};

// Long-lived child process speaking newline-delimited JSON on stdin/stdout:
// one request line in, one reply line out. Restarted after a crash.
class ProcessStylizer : public Stylizer {
 public:
  ProcessStylizer(std::vector<std::string> argv, double timeout_s, RetryPolicy retry = {});
  ~ProcessStylizer() override;
  std::string name() const override;

 protected:
  std::string exchange(const std::string& request_json) override;

 private:
  void start();
  void stop() noexcept;

  std::vector<std::string> argv_;
  double timeout_s_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

std::unique_ptr<Stylizer> make_stylizer(const BackendConfig& config);

// Server side: turns one request document into one reply document. Failures
// become error documents, never exceptions.
using ReplyHandler = std::function<std::string(const std::string&)>;

// Mock handler; the first `fail_first` requests get a transient error reply.
ReplyHandler mock_reply_handler(int fail_first = 0);

// Reads request lines until EOF, writing one reply line per request.
void serve_stdio(std::istream& in, std::ostream& out, const ReplyHandler& handler);
// HTTP front end serving POST /stylize.
class StylizeHttpServer {
 public:
  explicit StylizeHttpServer(ReplyHandler handler);
  ~StylizeHttpServer();
  // Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dreampipe
