#include "retriever/reasoner.hpp"

#include "retriever/errors.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <pthread.h>
#include <sys/wait.h>
#include <unistd.h>

namespace retriever {

using json = nlohmann::json;

ExternalReasoner::ExternalReasoner(std::string command, double timeout_s)
    : command_(std::move(command)), timeout_s_(timeout_s) {
  std::string tmpl = (std::filesystem::temp_directory_path() / "retriever-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw ProtocolError("cannot create sidecar directory: " + std::string(std::strerror(errno)));
  dir_ = tmpl;
  start();
}

ExternalReasoner::~ExternalReasoner() {
  stop();
  std::error_code ec;
  std::filesystem::remove_all(dir_, ec);
}

void ExternalReasoner::start() {
  std::signal(SIGPIPE, SIG_IGN);
  int in[2], out[2];
  if (pipe(in) != 0 || pipe(out) != 0) throw ProtocolError("pipe: " + std::string(std::strerror(errno)));
  // Signals stay blocked until the child has dropped the parent's handlers,
  // so an early kill cannot run them in the forked copy.
  sigset_t all, old;
  sigfillset(&all);
  pthread_sigmask(SIG_SETMASK, &all, &old);
  const pid_t pid = fork();
  if (pid == 0) {
    for (int sig = 1; sig < NSIG; ++sig) std::signal(sig, SIG_DFL);
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    setpgid(0, 0);  // own group, so stop() also reaches whatever the shell spawns
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    close(in[0]);
    close(in[1]);
    close(out[0]);
    close(out[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  if (pid > 0) setpgid(pid, pid);  // both sides, whichever runs first
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  if (pid < 0) throw ProtocolError("fork: " + std::string(std::strerror(errno)));
  close(in[0]);
  close(out[1]);
  fcntl(in[1], F_SETFD, FD_CLOEXEC);
  fcntl(out[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in[1];
  from_child_ = out[0];
}

void ExternalReasoner::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(-pid_, SIGTERM);
    kill(pid_, SIGTERM);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string ExternalReasoner::exchange(const std::string& line) {
  if (pid_ < 0) throw ProtocolError("reasoner process is not running");
  const std::string msg = line + "\n";
  std::size_t sent = 0;
  while (sent < msg.size()) {
    const ssize_t n = write(to_child_, msg.data() + sent, msg.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("write to reasoner failed: " + std::string(std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }

  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(timeout_s_);
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = left > 0 ? poll(&pfd, 1, static_cast<int>(left)) : 0;
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw ProtocolError("poll: " + std::string(std::strerror(errno)));
    if (r == 0) {
      // A late answer would pair with the next request; start over instead.
      stop();
      start();
      throw ProtocolError("reasoner timed out");
    }
    char buf[4096];
    const ssize_t n = read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ProtocolError("reasoner closed its output");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

ReasonerResponse ExternalReasoner::respond(const ReasonerRequest& req) {
  const long id = next_id_++;
  const json payload = request_to_json(req, dir_, "r" + std::to_string(raster_serial_++));
  const json msg = {{"id", id}, {"variant", std::string(variant_name(req))}, {"payload", payload}};
  const std::string reply = exchange(msg.dump());

  json j;
  try {
    j = json::parse(reply);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("reasoner sent invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || j.at("id") != id) throw ProtocolError("reasoner reply has wrong id");
  if (j.contains("error")) throw ReasonerError("reasoner error: " + j.at("error").dump());
  if (!j.contains("result")) throw SchemaError("reasoner reply has no result");
  return response_from_json(req, j.at("result"));
}

}  // namespace retriever
