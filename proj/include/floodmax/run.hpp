#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

#include "floodmax/config.hpp"

namespace floodmax {

// Exit codes of run().
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // unexpected error
  kExitUsage = 2,    // bad command line or configuration
  kExitData = 3,     // unreadable or invalid input files
  kExitSampler = 4,  // numerical failure in the sampler, or every CV fold failed
  kExitBusy = 5,     // output directory locked by another run
};

class RunError : public std::runtime_error {
 public:
  RunError(int code, const std::string& kind, const std::string& message)
      : std::runtime_error(message), code(code), kind(kind) {}
  int code;
  std::string kind;
};

// Exclusive claim on an output directory through a lock file created with
// O_EXCL semantics. The directory is created if needed.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path file_;
};

// Runs one mode and writes its files into cfg.paths.output. Throws on error.
// `log` receives progress lines; pass nullptr for silence.
void execute(Mode mode, const RunConfig& cfg, std::ostream* log);

// execute() with errors turned into one structured line on `err`:
//   floodmax: error kind=<kind> [source=<file> line=<n>] message="..."
// Returns an ExitCode.
int run(Mode mode, const RunConfig& cfg, std::ostream* log, std::ostream& err);

}  // namespace floodmax
