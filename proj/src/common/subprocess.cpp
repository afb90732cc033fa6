#include "benchsynth/common/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "benchsynth/common/errors.hpp"

namespace benchsynth {

Subprocess Subprocess::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw UsageError("empty command");
  int to_child[2];
  int from_child[2];
  if (pipe2(to_child, O_CLOEXEC) != 0) throw ExternalError("pipe failed");
  if (pipe2(from_child, O_CLOEXEC) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    throw ExternalError("pipe failed");
  }
  // exec failure is reported back through this pipe
  int status_pipe[2];
  if (pipe2(status_pipe, O_CLOEXEC) != 0) throw ExternalError("pipe failed");

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = fork();
  if (pid < 0) throw ExternalError("fork failed");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    int err = errno;
    [[maybe_unused]] auto n = ::write(status_pipe[1], &err, sizeof(err));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  close(status_pipe[1]);
  int err = 0;
  auto got = ::read(status_pipe[0], &err, sizeof(err));
  close(status_pipe[0]);
  if (got == sizeof(err)) {
    close(to_child[1]);
    close(from_child[0]);
    waitpid(pid, nullptr, 0);
    throw ExternalError("cannot execute " + argv[0] + ": " + std::strerror(err));
  }
  Subprocess p;
  p.pid_ = pid;
  p.in_fd_ = to_child[1];
  p.out_fd_ = from_child[0];
  return p;
}

Subprocess::Subprocess(Subprocess&& other) noexcept { *this = std::move(other); }

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
  if (this != &other) {
    terminate();
    pid_ = std::exchange(other.pid_, -1);
    in_fd_ = std::exchange(other.in_fd_, -1);
    out_fd_ = std::exchange(other.out_fd_, -1);
    buffer_ = std::move(other.buffer_);
    eof_ = other.eof_;
  }
  return *this;
}

Subprocess::~Subprocess() { terminate(); }

bool Subprocess::write(std::string_view data) {
  if (in_fd_ < 0) return false;
  // a dead reader must surface as a false return, not SIGPIPE
  static const bool ignored = [] {
    signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)ignored;
  while (!data.empty()) {
    auto n = ::write(in_fd_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

void Subprocess::close_stdin() {
  if (in_fd_ >= 0) {
    close(in_fd_);
    in_fd_ = -1;
  }
}

std::optional<std::string> Subprocess::read_line(std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout.value_or(std::chrono::milliseconds(0));
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (eof_ || out_fd_ < 0) {
      if (buffer_.empty()) return std::nullopt;
      return std::exchange(buffer_, {});
    }
    if (timeout) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("no output from child process before deadline");
      pollfd pfd{out_fd_, POLLIN, 0};
      const int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r == 0) continue;
    }
    char chunk[4096];
    auto n = ::read(out_fd_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      eof_ = true;
      continue;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string Subprocess::read_all() {
  std::string out = std::exchange(buffer_, {});
  while (!eof_ && out_fd_ >= 0) {
    char chunk[4096];
    auto n = ::read(out_fd_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(chunk, static_cast<std::size_t>(n));
  }
  eof_ = true;
  return out;
}

int Subprocess::wait() {
  close_stdin();
  if (out_fd_ >= 0) {
    close(out_fd_);
    out_fd_ = -1;
  }
  if (pid_ <= 0) return -1;
  int status = 0;
  while (waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

void Subprocess::terminate() {
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    wait();
  }
  close_stdin();
  if (out_fd_ >= 0) {
    close(out_fd_);
    out_fd_ = -1;
  }
}

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input) {
  auto proc = Subprocess::spawn(argv);
  std::string payload(input);
  std::thread writer([&proc, &payload] {
    proc.write(payload);
    proc.close_stdin();
  });
  ProcessResult result;
  result.output = proc.read_all();
  writer.join();
  result.exit_code = proc.wait();
  return result;
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : command) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_token) out.push_back(std::exchange(cur, {}));
      in_token = false;
    } else {
      cur.push_back(c);
      in_token = true;
    }
  }
  if (in_token) out.push_back(cur);
  return out;
}

}  // namespace benchsynth
