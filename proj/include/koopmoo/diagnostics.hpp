#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace koopmoo {

// Non-fatal conditions (extrapolation, representability, clamped rates) are reported
// through warn(). By default the first occurrence of each distinct message is written
// to stderr; repeats are only counted.
void warn(std::string_view message);

std::size_t warning_count();

// Redirects warnings issued on any thread into a local buffer for the lifetime of the
// object. Captures nest; the innermost one receives the messages.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  std::vector<std::string> messages() const;
  bool contains(std::string_view fragment) const;

 private:
  friend void warn(std::string_view);
  std::vector<std::string> messages_;
  ScopedWarningCapture* previous_ = nullptr;
};

}  // namespace koopmoo
