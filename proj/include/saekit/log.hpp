#ifndef SAEKIT_LOG_HPP
#define SAEKIT_LOG_HPP

#include <functional>
#include <string>

namespace saekit::log {

using Sink = std::function<void(const std::string&)>;

// Warnings go to stderr unless a sink is installed. The sink is process-wide;
// install it before starting worker threads.
void warn(const std::string& message);
void set_warning_sink(Sink sink);
void reset_warning_sink();

/// Installs a sink for the lifetime of the object and restores the default after.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink) { set_warning_sink(std::move(sink)); }
  ~ScopedSink() { reset_warning_sink(); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;
};

}  // namespace saekit::log

#endif  // SAEKIT_LOG_HPP
