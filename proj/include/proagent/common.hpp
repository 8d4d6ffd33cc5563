#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace proagent {

using json = nlohmann::json;

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file or record failed to parse. line() is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line), reason_(what) {}
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

// Configuration is inconsistent or references missing resources.
class ConfigError : public Error {
 public:
  using Error::Error;
};

using ArgMap = std::map<std::string, std::string>;

struct ToolCall {
  std::string name;
  ArgMap args;

  bool operator==(const ToolCall&) const = default;
};

inline json to_json(const ToolCall& call) {
  json args = json::object();
  for (const auto& [k, v] : call.args) args[k] = v;
  return json{{"name", call.name}, {"args", std::move(args)}};
}

// Name plus args with keys sorted and values verbatim.
inline std::string canonical_key(const ToolCall& call) {
  return call.name + to_json(call).at("args").dump();
}

// ---------------------------------------------------------------------------
// logging

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
inline LogSink& log_sink() {
  static LogSink sink = [](LogLevel level, const std::string& msg) {
    static constexpr const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= LogLevel::Warn) std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
  };
  return sink;
}
}  // namespace detail

// Replaces the process-wide log sink; returns the previous one.
inline LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(detail::log_mutex());
  return std::exchange(detail::log_sink(), std::move(sink));
}

inline void log(LogLevel level, const std::string& msg) {
  std::lock_guard lock(detail::log_mutex());
  if (detail::log_sink()) detail::log_sink()(level, msg);
}

inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }

// ---------------------------------------------------------------------------
// strings

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

template <typename Range>
std::string join(const Range& parts, std::string_view sep) {
  std::string out;
  bool first = true;
  for (const auto& p : parts) {
    if (!first) out += sep;
    out += p;
    first = false;
  }
  return out;
}

// Fixed-point rendering without locale surprises.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---------------------------------------------------------------------------
// line-delimited JSON

// Calls fn(object, line_number) for every non-blank line. Lines that are not
// JSON objects raise FormatError carrying the line number.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("malformed record", lineno);
    if (!j.is_object()) throw FormatError("record is not an object", lineno);
    fn(j, lineno);
  }
}

inline const json& require_key(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing key \"") + key + "\"", line);
  return *it;
}

inline std::string require_string(const json& j, const char* key, std::size_t line) {
  const json& v = require_key(j, key, line);
  if (!v.is_string()) throw FormatError(std::string("\"") + key + "\" must be a string", line);
  return v.get<std::string>();
}

inline double require_number(const json& j, const char* key, std::size_t line) {
  const json& v = require_key(j, key, line);
  if (!v.is_number()) throw FormatError(std::string("\"") + key + "\" must be a number", line);
  double d = v.get<double>();
  if (!std::isfinite(d)) throw FormatError(std::string("\"") + key + "\" must be finite", line);
  return d;
}

inline ArgMap parse_args(const json& j, std::size_t line) {
  ArgMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw FormatError("\"args\" must be an object", line);
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw FormatError("arg \"" + k + "\" must be a string", line);
    out[k] = v.get<std::string>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// deterministic randomness

// SplitMix64. Output is identical on every platform, unlike the
// implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return x % n;
  }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v.at(below(v.size()));
  }

 private:
  std::uint64_t state_;
};

}  // namespace proagent
