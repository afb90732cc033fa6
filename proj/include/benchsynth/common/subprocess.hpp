#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "benchsynth/common/errors.hpp"

namespace benchsynth {

class TimeoutError : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

// A child process with piped stdin/stdout; stderr is inherited. Killed and
// reaped on destruction if still running.
class Subprocess {
 public:
  static Subprocess spawn(const std::vector<std::string>& argv);

  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  ~Subprocess();

  // Returns false if the child closed its stdin.
  bool write(std::string_view data);
  void close_stdin();
  // One line without the trailing newline; nullopt at end of stream. With a
  // timeout, throws TimeoutError if no full line arrives in time.
  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout = {});
  std::string read_all();
  int wait();
  void terminate();
  bool running() const { return pid_ > 0; }

 private:
  Subprocess() = default;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

struct ProcessResult {
  int exit_code = -1;
  std::string output;
};

// Runs argv to completion, feeding `input` on stdin concurrently with
// draining stdout.
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input);

// Splits a command line on whitespace, honouring single and double quotes.
std::vector<std::string> split_command(std::string_view command);

}  // namespace benchsynth
