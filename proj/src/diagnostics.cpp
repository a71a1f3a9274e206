#include "koopmoo/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <set>

namespace koopmoo {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

struct SinkState {
  ScopedWarningCapture* capture = nullptr;
  std::set<std::string, std::less<>> seen;
  std::size_t count = 0;
};

SinkState& sink() {
  static SinkState s;
  return s;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  auto& s = sink();
  ++s.count;
  if (s.capture != nullptr) {
    s.capture->messages_.emplace_back(message);
    return;
  }
  if (s.seen.find(message) == s.seen.end()) {
    s.seen.emplace(message);
    std::cerr << "[koopmoo] warning: " << message << '\n';
  }
}

std::size_t warning_count() {
  std::lock_guard lock(sink_mutex());
  return sink().count;
}

ScopedWarningCapture::ScopedWarningCapture() {
  std::lock_guard lock(sink_mutex());
  previous_ = sink().capture;
  sink().capture = this;
}

ScopedWarningCapture::~ScopedWarningCapture() {
  std::lock_guard lock(sink_mutex());
  sink().capture = previous_;
}

std::vector<std::string> ScopedWarningCapture::messages() const {
  std::lock_guard lock(sink_mutex());
  return messages_;
}

bool ScopedWarningCapture::contains(std::string_view fragment) const {
  std::lock_guard lock(sink_mutex());
  for (const auto& m : messages_) {
    if (m.find(fragment) != std::string::npos) return true;
  }
  return false;
}

}  // namespace koopmoo
