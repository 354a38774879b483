#ifndef SAEKIT_CLI_HPP
#define SAEKIT_CLI_HPP

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace saekit::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConvergence = 3;  // max split R-hat above kRhatThreshold
inline constexpr int kExitInternal = 4;

inline constexpr double kRhatThreshold = 1.05;

/// Lowercase hex SHA-256 of a byte string and of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Parses and runs one command line,
///   saekit {direct|fit|benchmark|simulate|replay} [options],
/// writing progress to `err`. Returns the process exit code; never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The arguments recorded in a manifest, ready for run(). `out_dir`, when
/// nonempty, replaces the recorded --out.
std::vector<std::string> replay_arguments(const nlohmann::json& manifest,
                                          const std::string& out_dir = {});

}  // namespace saekit::cli

#endif  // SAEKIT_CLI_HPP
