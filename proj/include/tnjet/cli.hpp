#pragma once

// Command-line front end: train, eval, ptq-sweep, qmi, estimate, params,
// convert-check and synth subcommands.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tnjet {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one command. Exit codes: 0 success, 1 runtime failure, 2 usage error.
/// Failures print a single-line JSON error record on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace tnjet
