#pragma once

// External objective bridge: a pool of child processes speaking a line
// protocol over stdin/stdout (POSIX only).
//
//   parent -> child   HELLO <N>\n             child -> parent   READY\n
//   parent -> child   EVAL <N> <bitstring>\n  child -> parent   VAL <real>\n
//   parent -> child   BYE\n

#include <pbo/objectives.hpp>
#include <pbo/types.hpp>

#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace pbo {

struct BridgeError : ObjectiveError {
  using ObjectiveError::ObjectiveError;
};
/// The child wrote something other than the expected line.
struct BridgeProtocolError : BridgeError {
  BridgeProtocolError(const std::string& what, std::string line)
      : BridgeError(what + ": '" + line + "'"), offending_line(std::move(line)) {}
  std::string offending_line;
};
/// The child closed its pipes or terminated.
struct BridgeExitError : BridgeError {
  using BridgeError::BridgeError;
};
/// The child returned NaN or an infinity.
struct BridgeValueError : BridgeError {
  using BridgeError::BridgeError;
};

struct BridgeConfig {
  std::vector<std::string> command;  // argv; command[0] is looked up on PATH
  std::size_t dimension = 0;
  std::size_t workers = 1;
};

/// One child process.
class BridgeProcess {
 public:
  BridgeProcess(const std::vector<std::string>& command, std::size_t dimension)
      : dimension_(dimension) {
    if (command.empty()) throw ConfigError("bridge command is empty");
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw BridgeExitError("pipe: " + std::string(std::strerror(errno)));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BridgeExitError("pipe: " + std::string(std::strerror(errno)));
    }
    std::vector<char*> argv;
    for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    pid_ = ::fork();
    if (pid_ < 0) throw BridgeExitError("fork: " + std::string(std::strerror(errno)));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];

    send("HELLO " + std::to_string(dimension_) + "\n");
    const std::string reply = receive();
    if (reply != "READY") throw BridgeProtocolError("bridge handshake expected READY", reply);
  }

  BridgeProcess(const BridgeProcess&) = delete;
  BridgeProcess& operator=(const BridgeProcess&) = delete;

  ~BridgeProcess() {
    if (write_fd_ >= 0) {
      const char bye[] = "BYE\n";
      [[maybe_unused]] auto n = ::write(write_fd_, bye, sizeof(bye) - 1);
      ::close(write_fd_);
    }
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  double evaluate(const Design& d) {
    if (d.size() != dimension_)
      throw DomainError("bridge expects designs of length " + std::to_string(dimension_));
    send("EVAL " + std::to_string(dimension_) + " " + to_bitstring(d) + "\n");
    const std::string line = receive();
    if (line.rfind("VAL ", 0) != 0 || line.size() == 4)
      throw BridgeProtocolError("bridge response is not 'VAL <real>'", line);
    const std::string number = line.substr(4);
    if (number.find_first_of(" \t") != std::string::npos)
      throw BridgeProtocolError("bridge response is not 'VAL <real>'", line);
    char* end = nullptr;
    errno = 0;
    const double value = std::strtod(number.c_str(), &end);
    if (end != number.c_str() + number.size())
      throw BridgeProtocolError("bridge response value is not a real number", line);
    if (!std::isfinite(value)) throw BridgeValueError("bridge returned a non-finite value: '" + line + "'");
    return value;
  }

 private:
  std::string exit_description() {
    if (pid_ <= 0) return "bridge process is gone";
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, 0);
    if (r == pid_) {
      pid_ = -1;
      if (WIFEXITED(status)) return "bridge process exited with status " + std::to_string(WEXITSTATUS(status));
      if (WIFSIGNALED(status)) return "bridge process killed by signal " + std::to_string(WTERMSIG(status));
    }
    return "bridge process closed its output";
  }

  void send(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::write(write_fd_, s.data() + off, s.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        ::close(write_fd_);
        write_fd_ = -1;
        throw BridgeExitError(exit_description());
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string receive() {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        if (write_fd_ >= 0) {
          ::close(write_fd_);
          write_fd_ = -1;
        }
        throw BridgeExitError(exit_description());
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::size_t dimension_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

/// Fixed set of worker processes; each request borrows an idle worker.
class BridgePool {
 public:
  explicit BridgePool(const BridgeConfig& config) : dimension_(config.dimension) {
    const std::size_t n = std::max<std::size_t>(1, config.workers);
    for (std::size_t i = 0; i < n; ++i) {
      workers_.push_back(std::make_unique<BridgeProcess>(config.command, config.dimension));
      idle_.push_back(i);
    }
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return workers_.size(); }

  double evaluate(const Design& d) {
    std::size_t slot;
    {
      std::unique_lock lock(mutex_);
      ready_.wait(lock, [&] { return !idle_.empty(); });
      slot = idle_.back();
      idle_.pop_back();
    }
    struct Release {
      BridgePool* pool;
      std::size_t slot;
      ~Release() {
        {
          std::lock_guard lock(pool->mutex_);
          pool->idle_.push_back(slot);
        }
        pool->ready_.notify_one();
      }
    } release{this, slot};
    return workers_[slot]->evaluate(d);
  }

 private:
  std::size_t dimension_;
  std::vector<std::unique_ptr<BridgeProcess>> workers_;
  std::vector<std::size_t> idle_;
  std::mutex mutex_;
  std::condition_variable ready_;
};

inline Objective external_objective(const BridgeConfig& config) {
  auto pool = std::make_shared<BridgePool>(config);
  return Objective("external", config.dimension,
                   [pool](const Design& d) { return pool->evaluate(d); });
}

}  // namespace pbo
