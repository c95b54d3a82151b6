#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ppnet {

using WarningSink = std::function<void(const std::string&)>;

// Emit a non-fatal diagnostic. The default sink writes "warning: ..." to stderr.
void warn(const std::string& message);

// Replace the process-wide sink; returns the previous one. Passing an empty
// function restores the default.
WarningSink set_warning_sink(WarningSink sink);

// Captures warnings for the lifetime of the object (tests, batch tools).
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(const std::string& needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace ppnet
