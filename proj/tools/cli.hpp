#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace ppnet::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumerical = 3 };

struct Options;

// Parser with every subcommand and flag registered; exposed so tests can
// cross-check the help text against the registered options.
struct Parser {
  std::unique_ptr<CLI::App> app;
  std::unique_ptr<Options> opts;
  Parser();
  ~Parser();
};

// Full run: parse, dispatch, map errors to exit codes. Primary results go to
// out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppnet::cli
