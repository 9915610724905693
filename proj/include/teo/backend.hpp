#pragma once

// Generation backends standing in for the stage models.
//
// COMMAND wire protocol (UTF-8, one JSON object per line):
//   to the process:   {"id": string, "prompt": string}
//   from the process: {"id": string, "output": string}
// Responses may arrive in any order; they are matched by id.
//
// HTTP: POST {"prompt": string} to the endpoint, expect 200 with
// {"output": string}. Non-200 statuses and transport failures are retried
// with exponential backoff.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace teo {

enum class BackendKind { COMMAND, HTTP, GOLD, IDENTITY, EMPTY };

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::COMMAND: return "command";
    case BackendKind::HTTP: return "http";
    case BackendKind::GOLD: return "gold";
    case BackendKind::IDENTITY: return "identity";
    case BackendKind::EMPTY: return "empty";
  }
  return "empty";
}

inline BackendKind parse_backend_kind(std::string_view s) {
  if (s == "command") return BackendKind::COMMAND;
  if (s == "http") return BackendKind::HTTP;
  if (s == "gold") return BackendKind::GOLD;
  if (s == "identity") return BackendKind::IDENTITY;
  if (s == "empty") return BackendKind::EMPTY;
  throw std::invalid_argument("unknown backend kind: " + std::string(s));
}

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendSpec {
  BackendKind kind = BackendKind::EMPTY;
  std::string endpoint;  // shell command line (COMMAND) or URL (HTTP)
  std::chrono::milliseconds timeout{30000};
  unsigned retries = 2;
  std::chrono::milliseconds backoff{200};  // first retry delay, doubled each time
  std::size_t concurrency = 4;             // HTTP requests in flight

  void validate() const {
    if ((kind == BackendKind::COMMAND || kind == BackendKind::HTTP) && endpoint.empty())
      throw std::invalid_argument(std::string(to_string(kind)) + " backend needs an endpoint");
    if (timeout.count() <= 0) throw std::invalid_argument("backend timeout must be positive");
    if (concurrency == 0) throw std::invalid_argument("backend concurrency must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"kind", to_string(kind)},
            {"endpoint", endpoint},
            {"timeout_ms", timeout.count()},
            {"retries", retries},
            {"backoff_ms", backoff.count()},
            {"concurrency", concurrency}};
  }

  bool operator==(const BackendSpec&) const = default;
};

struct Prompt {
  std::string id;
  std::string text;
  std::string incomplete;  // echoed by IDENTITY
};

struct Generation {
  std::string id;
  std::optional<std::string> output;
  std::string error;  // set iff output is absent

  bool ok() const { return output.has_value(); }
};

namespace detail {

// A child running `sh -c command` with stdin and stdout connected to
// socket pairs, so writes after the child exits fail with EPIPE instead of
// raising SIGPIPE.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int to_child[2], from_child[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, to_child) != 0)
      throw BackendError("socketpair failed");
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BackendError("socketpair failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw BackendError("fork failed");
    }
    if (pid_ == 0) {
      ::setpgid(0, 0);  // so kill() also reaches whatever sh spawns
      ::dup2(to_child[1], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(to_child[1]);
    ::close(from_child[1]);
    write_fd_ = to_child[0];
    read_fd_ = from_child[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close_write();
    if (read_fd_ >= 0) ::close(read_fd_);
    reap();
  }

  bool write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::send(write_fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  void close_write() {
    if (write_fd_ >= 0) ::shutdown(write_fd_, SHUT_WR);
  }

  enum class ReadStatus { LINE, END, TIMEOUT };

  ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return ReadStatus::LINE;
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready == 0) return ReadStatus::TIMEOUT;
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        if (buffer_.empty()) return ReadStatus::END;
        line = std::move(buffer_);
        buffer_.clear();
        return ReadStatus::LINE;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void kill() {
    if (pid_ > 0) ::kill(-pid_, SIGKILL);
  }

 private:
  void reap() {
    if (pid_ <= 0) return;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) {
        pid_ = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (pid_ > 0) {
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
    if (write_fd_ >= 0) ::close(write_fd_);
    write_fd_ = -1;
  }

  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline UrlParts split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

/// A configured backend. GOLD answers from the per-id targets given here.
class Backend {
 public:
  explicit Backend(BackendSpec spec, std::map<std::string, std::string> gold = {})
      : spec_(std::move(spec)), gold_(std::move(gold)) {
    spec_.validate();
  }

  const BackendSpec& spec() const { return spec_; }

  /// One result per prompt, in prompt order. Per-prompt failures are
  /// recorded in the result; throws BackendError only when every prompt fails.
  std::vector<Generation> generate(const std::vector<Prompt>& prompts) const {
    std::vector<Generation> out;
    switch (spec_.kind) {
      case BackendKind::GOLD:
        for (const auto& p : prompts) {
          auto it = gold_.find(p.id);
          if (it == gold_.end())
            out.push_back({p.id, std::nullopt, "no gold target"});
          else
            out.push_back({p.id, it->second, {}});
        }
        break;
      case BackendKind::IDENTITY:
        for (const auto& p : prompts) out.push_back({p.id, p.incomplete, {}});
        break;
      case BackendKind::EMPTY:
        for (const auto& p : prompts) out.push_back({p.id, std::string{}, {}});
        break;
      case BackendKind::COMMAND:
        out = run_command(prompts);
        break;
      case BackendKind::HTTP:
        out = run_http(prompts);
        break;
    }
    if (!prompts.empty() && std::none_of(out.begin(), out.end(), [](const Generation& g) { return g.ok(); }))
      throw BackendError(std::string(to_string(spec_.kind)) + " backend failed on every prompt: " +
                         out.front().error);
    return out;
  }

 private:
  std::vector<Generation> run_command(const std::vector<Prompt>& prompts) const {
    std::vector<Generation> out;
    std::map<std::string, std::size_t> slot;
    for (const auto& p : prompts) {
      slot.emplace(p.id, out.size());
      out.push_back({p.id, std::nullopt, "no response"});
    }
    for (unsigned attempt = 0; attempt <= spec_.retries; ++attempt) {
      std::vector<const Prompt*> pending;
      for (const auto& p : prompts)
        if (!out[slot[p.id]].ok()) pending.push_back(&p);
      if (pending.empty()) break;
      command_round(pending, slot, out);
    }
    return out;
  }

  void command_round(const std::vector<const Prompt*>& pending,
                     const std::map<std::string, std::size_t>& slot,
                     std::vector<Generation>& out) const {
    detail::ChildProcess child(spec_.endpoint);
    std::thread writer([&] {
      for (const Prompt* p : pending) {
        const nlohmann::json msg{{"id", p->id}, {"prompt", p->text}};
        if (!child.write_all(msg.dump() + "\n")) break;
      }
      child.close_write();
    });

    std::size_t remaining = pending.size();
    std::string why = "process ended without a response";
    std::string line;
    while (remaining > 0) {
      const auto status = child.read_line(line, spec_.timeout);
      if (status == detail::ChildProcess::ReadStatus::TIMEOUT) {
        why = "timed out after " + std::to_string(spec_.timeout.count()) + " ms";
        child.kill();
        break;
      }
      if (status == detail::ChildProcess::ReadStatus::END) break;
      const auto msg = nlohmann::json::parse(line, nullptr, false);
      if (msg.is_discarded() || !msg.is_object() || !msg.contains("id") || !msg["id"].is_string()) {
        why = "malformed response line";
        continue;
      }
      auto it = slot.find(msg["id"].get<std::string>());
      if (it == slot.end() || out[it->second].ok()) continue;
      auto& g = out[it->second];
      if (!msg.contains("output") || !msg["output"].is_string()) {
        g.error = "malformed response: missing string \"output\"";
        continue;
      }
      g.output = msg["output"].get<std::string>();
      g.error.clear();
      --remaining;
    }
    if (remaining > 0) child.kill();
    writer.join();
    for (const Prompt* p : pending) {
      auto& g = out[slot.at(p->id)];
      if (!g.ok() && g.error == "no response") g.error = why;
    }
  }

  Generation http_one(const Prompt& p) const {
    const auto url = detail::split_url(spec_.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(spec_.timeout);
    client.set_read_timeout(spec_.timeout);
    client.set_write_timeout(spec_.timeout);
    const std::string body = nlohmann::json{{"prompt", p.text}}.dump();

    std::string error = "no attempt made";
    auto delay = spec_.backoff;
    for (unsigned attempt = 0; attempt <= spec_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      auto res = client.Post(url.path, body, "application/json");
      if (!res) {
        error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      const auto msg = nlohmann::json::parse(res->body, nullptr, false);
      if (msg.is_discarded() || !msg.is_object() || !msg.contains("output") || !msg["output"].is_string())
        return {p.id, std::nullopt, "malformed response body"};
      return {p.id, msg["output"].get<std::string>(), {}};
    }
    return {p.id, std::nullopt, error};
  }

  std::vector<Generation> run_http(const std::vector<Prompt>& prompts) const {
    std::vector<Generation> out(prompts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < prompts.size(); i = next++) out[i] = http_one(prompts[i]);
    };
    const std::size_t n = std::min(spec_.concurrency, prompts.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
  }

  BackendSpec spec_;
  std::map<std::string, std::string> gold_;
};

inline std::vector<Generation> generate(const Backend& backend, const std::vector<Prompt>& prompts) {
  return backend.generate(prompts);
}

}  // namespace teo
