#include "mdsd/logits_io.hpp"

#include <cmath>

#include "json.hpp"

namespace mdsd {

namespace {

std::vector<double> numeric_array(const nlohmann::json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw InputError(line, std::string("missing field \"") + field + "\"");
  if (!it->is_array()) throw InputError(line, std::string("field \"") + field + "\" is not an array");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw InputError(line, std::string("field \"") + field + "\" has a non-numeric entry");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InputError(line, std::string("field \"") + field + "\" has a non-finite value");
    out.push_back(d);
  }
  if (out.empty()) throw InputError(line, std::string("field \"") + field + "\" is empty");
  return out;
}

}  // namespace

LogitsRecord parse_logits_line(const std::string& text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw InputError(line, "record is not a JSON object");
  LogitsRecord r{numeric_array(obj, "p_logits", line), numeric_array(obj, "q_logits", line)};
  if (r.p_logits.size() != r.q_logits.size()) {
    throw InputError(line, "ragged lengths: p_logits has " + std::to_string(r.p_logits.size()) +
                               " entries, q_logits has " + std::to_string(r.q_logits.size()));
  }
  return r;
}

LogitsReader::LogitsReader(const std::string& path) : in_(std::make_unique<std::ifstream>(path)) {
  if (!*in_) throw Error("cannot open logits file: " + path);
}

LogitsReader::LogitsReader(std::unique_ptr<std::istream> in) : in_(std::move(in)) {}

std::optional<LogitsRecord> LogitsReader::next() {
  std::string text;
  while (std::getline(*in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    return parse_logits_line(text, line_);
  }
  return std::nullopt;
}

LogitsReader load_logits(const std::string& path) { return LogitsReader(path); }

}  // namespace mdsd
