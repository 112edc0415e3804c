#pragma once

#include <string>

#include "json.hpp"

namespace lprisma {

// Formats a double with 12 significant digits ("%.12g").
std::string format_sig12(double v);

// Canonical JSON serialization: object keys sorted, floating point numbers
// rendered with 12 significant digits, UTF-8, no trailing newline.
std::string dump_canonical(const nlohmann::json& j);

// Writes content to path atomically (temp file in the same directory, then rename).
void atomic_write(const std::string& path, const std::string& content);

// Reads a whole file into a string. Throws lprisma::Error when unreadable.
std::string read_file(const std::string& path);

}  // namespace lprisma
