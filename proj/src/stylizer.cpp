#include "dreampipe/stylizer.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "dreampipe/mock_backend.hpp"

namespace dreampipe {

StylizeResponse Stylizer::stylize(const StylizeRequest& request) {
  validate_request(request);
  std::lock_guard<std::mutex> lock(mutex_);
  ++calls_;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      StylizeResponse resp = call(request);
      validate_response(request, resp);
      return resp;
    } catch (const TransientError& e) {
      if (attempt >= retry_.attempts)
        fail(ErrorKind::Backend, name() + ": " + to_string(request.kind) + " failed after " +
                                     std::to_string(attempt) + " attempts: " + e.what());
      ++retries_;
      spdlog::warn("{}: transient failure on attempt {}/{} ({}); retrying in {} ms", name(),
                   attempt, retry_.attempts, e.what(), backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

Image8 Stylizer::stylize_image(const StylizeRequest& request) {
  return stylize(request).image.decode_image();
}

StylizeResponse Stylizer::call(const StylizeRequest& request) {
  const std::string reply = exchange(serialize_request(request));
  ParsedReply parsed;
  try {
    parsed = parse_reply(reply);
  } catch (const Error& e) {
    throw TransientError(std::string("unreadable reply: ") + e.what());
  }
  if (parsed.error) {
    const std::string msg = "backend error " + parsed.error->code + ": " + parsed.error->message;
    if (parsed.error->transient()) throw TransientError(msg);
    fail(ErrorKind::Backend, name() + ": " + msg);
  }
  return *parsed.response;
}

std::string Stylizer::exchange(const std::string&) {
  fail(ErrorKind::Backend, name() + " has no transport");
}

StylizeResponse MockStylizer::call(const StylizeRequest& request) { return mock_backend(request); }

// ---------------------------------------------------------------- http

HttpStylizer::HttpStylizer(std::string endpoint, double timeout_s, RetryPolicy retry)
    : Stylizer(retry), endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  require(!endpoint_.empty(), ErrorKind::Config, "http backend needs an endpoint");
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

std::string HttpStylizer::exchange(const std::string& request_json) {
  httplib::Client client(endpoint_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - secs) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post("/stylize", request_json, "application/json");
  if (!res) throw TransientError("http transport: " + httplib::to_string(res.error()));
  if (res->status >= 500) {
    if (res->status == 503 || res->status == 504 || res->status == 502)
      throw TransientError("http status " + std::to_string(res->status));
  }
  if (res->status != 200 && res->body.empty())
    fail(ErrorKind::Backend, "http status " + std::to_string(res->status));
  return res->body;
}

// ---------------------------------------------------------------- process

ProcessStylizer::ProcessStylizer(std::vector<std::string> argv, double timeout_s,
                                 RetryPolicy retry)
    : Stylizer(retry), argv_(std::move(argv)), timeout_s_(timeout_s) {
  require(!argv_.empty(), ErrorKind::Config, "process backend needs a command");
}

ProcessStylizer::~ProcessStylizer() { stop(); }

std::string ProcessStylizer::name() const { return "process:" + argv_.front(); }

void ProcessStylizer::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) fail(ErrorKind::Backend, "pipe: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    fail(ErrorKind::Backend, "pipe: " + std::string(std::strerror(errno)));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) fail(ErrorKind::Backend, "fork: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
  spdlog::debug("started backend process {} (pid {})", argv_.front(), pid_);
}

void ProcessStylizer::stop() noexcept {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks the child to exit; give it a moment before killing.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ProcessStylizer::exchange(const std::string& request_json) {
  if (pid_ < 0) start();
  // A dead child surfaces as EPIPE here; the retry restarts it.
  static const bool ignore_sigpipe = [] {
    signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)ignore_sigpipe;

  std::string line = request_json;
  line.push_back('\n');
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string err = std::strerror(errno);
      stop();
      throw TransientError("write to backend process: " + err);
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s_));
  char chunk[1 << 16];
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      stop();
      throw TransientError("backend process timed out");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      throw TransientError("backend process closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Stylizer> make_stylizer(const BackendConfig& config) {
  require(config.retry.attempts >= 1, ErrorKind::Config, "backend retry attempts must be >= 1");
  require(config.timeout_s > 0.0, ErrorKind::Config, "backend timeout must be positive");
  if (config.type == "mock") return std::make_unique<MockStylizer>(config.retry);
  if (config.type == "http")
    return std::make_unique<HttpStylizer>(config.endpoint, config.timeout_s, config.retry);
  if (config.type == "process")
    return std::make_unique<ProcessStylizer>(config.command, config.timeout_s, config.retry);
  fail(ErrorKind::Config, "unknown backend type '" + config.type + "'");
}

// ---------------------------------------------------------------- server

ReplyHandler mock_reply_handler(int fail_first) {
  auto remaining = std::make_shared<std::atomic<int>>(fail_first);
  return [remaining](const std::string& body) -> std::string {
    if (remaining->fetch_sub(1) > 0)
      return serialize_error({"unavailable", "simulated transient failure"});
    try {
      return serialize_response(mock_backend(parse_request(body)));
    } catch (const Error& e) {
      return serialize_error({e.kind() == ErrorKind::Format ? "malformed" : "invalid", e.what()});
    } catch (const std::exception& e) {
      return serialize_error({"internal", e.what()});
    }
  };
}

void serve_stdio(std::istream& in, std::ostream& out, const ReplyHandler& handler) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handler(line) << '\n';
    out.flush();
  }
}

struct StylizeHttpServer::Impl {
  httplib::Server server;
  ReplyHandler handler;
};

StylizeHttpServer::StylizeHttpServer(ReplyHandler handler) : impl_(std::make_unique<Impl>()) {
  impl_->handler = std::move(handler);
  impl_->server.Post("/stylize", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(impl_->handler(req.body), "application/json");
  });
}

StylizeHttpServer::~StylizeHttpServer() { stop(); }

int StylizeHttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    require(bound > 0, ErrorKind::Backend, "could not bind " + host);
    return bound;
  }
  require(impl_->server.bind_to_port(host, port), ErrorKind::Backend,
          "could not bind " + host + ":" + std::to_string(port));
  return port;
}

void StylizeHttpServer::listen() { impl_->server.listen_after_bind(); }

void StylizeHttpServer::stop() { impl_->server.stop(); }

}  // namespace dreampipe
