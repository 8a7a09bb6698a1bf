#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdsd/prob.hpp"

namespace mdsd {

/// Malformed input; carries the 1-based line number of the offending record.
class InputError : public Error {
 public:
  InputError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/**
 * Streaming reader for line-delimited logits records:
 *
 *   {"p_logits": [..], "q_logits": [..]}
 *
 * one JSON object per line, both arrays numeric, finite and of equal length.
 * Blank lines are skipped.
 */
class LogitsReader {
 public:
  explicit LogitsReader(const std::string& path);
  explicit LogitsReader(std::unique_ptr<std::istream> in);

  /// Next record, or nullopt at end of input. Throws InputError on a malformed line.
  std::optional<LogitsRecord> next();

  std::size_t line() const { return line_; }

 private:
  std::unique_ptr<std::istream> in_;
  std::size_t line_ = 0;
};

LogitsReader load_logits(const std::string& path);

/// Parses one record; `line` is only used for error messages.
LogitsRecord parse_logits_line(const std::string& text, std::size_t line);

}  // namespace mdsd
