#include "saekit/log.hpp"

#include <iostream>
#include <mutex>

namespace saekit::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink;
  return sink;
}

}  // namespace

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) {
    current_sink()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_warning_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  current_sink() = std::move(sink);
}

void reset_warning_sink() {
  std::lock_guard lock(sink_mutex());
  current_sink() = nullptr;
}

}  // namespace saekit::log
