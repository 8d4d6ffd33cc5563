#pragma once

#include "proagent/common.hpp"

#include <memory>
#include <optional>
#include <set>

namespace proagent {

enum class ToolKind { Retrieval, Execution };

inline const char* to_string(ToolKind k) { return k == ToolKind::Retrieval ? "retrieval" : "execution"; }

struct ArgSpec {
  std::string key;
  bool required = false;
  std::string description;
};

struct ToolSpec {
  std::string name;
  ToolKind kind = ToolKind::Retrieval;
  std::string description;
  std::vector<ArgSpec> args;
};

class ToolRegistry {
 public:
  ToolRegistry() = default;

  void add(ToolSpec spec) {
    if (spec.name.empty()) throw Error("tool name must be non-empty");
    if (find(spec.name)) throw Error("duplicate tool \"" + spec.name + "\"");
    index_[spec.name] = specs_.size();
    specs_.push_back(std::move(spec));
  }

  const ToolSpec* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &specs_[it->second];
  }

  const std::vector<ToolSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }

 private:
  std::vector<ToolSpec> specs_;
  std::map<std::string, std::size_t> index_;
};

inline ToolRegistry load_registry(std::istream& in) {
  ToolRegistry reg;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    ToolSpec spec;
    spec.name = require_string(j, "name", line);
    if (spec.name.empty()) throw FormatError("tool name must be non-empty", line);
    if (reg.find(spec.name)) throw FormatError("duplicate tool \"" + spec.name + "\"", line);
    if (!j.contains("kind")) throw FormatError("missing kind", line);
    const std::string kind = require_string(j, "kind", line);
    if (kind == "retrieval")
      spec.kind = ToolKind::Retrieval;
    else if (kind == "execution")
      spec.kind = ToolKind::Execution;
    else
      throw FormatError("unknown kind", line);
    if (auto it = j.find("description"); it != j.end() && it->is_string()) spec.description = it->get<std::string>();
    if (auto it = j.find("args"); it != j.end()) {
      if (!it->is_array()) throw FormatError("\"args\" must be an array", line);
      std::set<std::string> seen;
      for (const auto& a : *it) {
        if (!a.is_object()) throw FormatError("arg specs must be objects", line);
        ArgSpec arg{require_string(a, "key", line), false, ""};
        if (auto r = a.find("required"); r != a.end()) {
          if (!r->is_boolean()) throw FormatError("\"required\" must be a boolean", line);
          arg.required = r->get<bool>();
        }
        if (auto d = a.find("description"); d != a.end() && d->is_string()) arg.description = d->get<std::string>();
        if (!seen.insert(arg.key).second) throw FormatError("duplicate arg \"" + arg.key + "\"", line);
        spec.args.push_back(std::move(arg));
      }
    }
    reg.add(std::move(spec));
  });
  return reg;
}

// One line per tool: name, kind, description, then its arguments.
inline std::string render_tool_manifest(const ToolRegistry& reg) {
  std::string out;
  for (const auto& s : reg.specs()) {
    out += "- " + s.name + " [" + to_string(s.kind) + "]: " + s.description;
    std::vector<std::string> args;
    for (const auto& a : s.args)
      args.push_back(a.key + " (" + (a.required ? "required" : "optional") + (a.description.empty() ? "" : ", " + a.description) + ")");
    out += " Args: " + (args.empty() ? std::string("none") : join(args, "; ")) + "\n";
  }
  return out;
}

struct ValidationResult {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Collects every violation. Unknown args are violations unless lenient.
inline ValidationResult validate_call(const ToolCall& call, const ToolRegistry& reg, bool strict = true) {
  ValidationResult r;
  const ToolSpec* spec = reg.find(call.name);
  if (!spec) {
    r.errors.push_back("unknown tool");
    return r;
  }
  std::set<std::string> known;
  for (const auto& a : spec->args) {
    known.insert(a.key);
    if (a.required && !call.args.count(a.key)) r.errors.push_back("missing required arg: " + a.key);
  }
  if (strict)
    for (const auto& [k, _] : call.args)
      if (!known.count(k)) r.errors.push_back("unknown arg: " + k);
  return r;
}

enum class ToolStatus { Ok, PendingConfirmation, Error };

inline const char* to_string(ToolStatus s) {
  switch (s) {
    case ToolStatus::Ok: return "ok";
    case ToolStatus::PendingConfirmation: return "pending_confirmation";
    case ToolStatus::Error: return "error";
  }
  return "error";
}

struct ToolResult {
  std::string name;
  ToolStatus status = ToolStatus::Error;
  std::string payload;
};

class ToolProvider {
 public:
  virtual ~ToolProvider() = default;
  virtual std::optional<std::string> lookup(const ToolCall& call) const = 0;
};

// Offline provider: exact (name, canonical args) match, then a per-tool default.
class FixtureProvider final : public ToolProvider {
 public:
  void add(const ToolCall& call, std::string payload) { exact_[canonical_key(call)] = std::move(payload); }
  void set_default(const std::string& tool, std::string payload) { defaults_[tool] = std::move(payload); }

  std::optional<std::string> lookup(const ToolCall& call) const override {
    if (auto it = exact_.find(canonical_key(call)); it != exact_.end()) return it->second;
    if (auto it = defaults_.find(call.name); it != defaults_.end()) return it->second;
    return std::nullopt;
  }

  std::size_t size() const { return exact_.size() + defaults_.size(); }

 private:
  std::map<std::string, std::string> exact_;
  std::map<std::string, std::string> defaults_;
};

inline std::shared_ptr<FixtureProvider> load_fixtures(std::istream& in) {
  auto p = std::make_shared<FixtureProvider>();
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    const std::string tool = require_string(j, "tool", line);
    if (j.contains("default")) {
      p->set_default(tool, require_string(j, "default", line));
      return;
    }
    ToolCall call{tool, j.contains("args") ? parse_args(j.at("args"), line) : ArgMap{}};
    p->add(call, require_string(j, "payload", line));
  });
  return p;
}

// Per-tool providers with a catch-all fallback.
class ProviderSet {
 public:
  void add(const std::string& tool, std::shared_ptr<const ToolProvider> p) { by_tool_[tool] = std::move(p); }
  void set_fallback(std::shared_ptr<const ToolProvider> p) { fallback_ = std::move(p); }

  const ToolProvider* resolve(const std::string& tool) const {
    if (auto it = by_tool_.find(tool); it != by_tool_.end()) return it->second.get();
    return fallback_.get();
  }

 private:
  std::map<std::string, std::shared_ptr<const ToolProvider>> by_tool_;
  std::shared_ptr<const ToolProvider> fallback_;
};

// Retrieval tools run against their provider. Execution tools are never run
// automatically; they come back pending user confirmation.
inline ToolResult execute(const ToolCall& call, const ToolRegistry& reg, const ProviderSet& providers, bool strict = true) {
  const ValidationResult v = validate_call(call, reg, strict);
  if (!v.ok()) return {call.name, ToolStatus::Error, join(v.errors, "; ")};
  const ToolSpec& spec = *reg.find(call.name);
  if (spec.kind == ToolKind::Execution)
    return {call.name, ToolStatus::PendingConfirmation, "confirm " + canonical_key(call)};
  const ToolProvider* p = providers.resolve(call.name);
  if (!p) return {call.name, ToolStatus::Error, "no provider"};
  if (auto payload = p->lookup(call)) return {call.name, ToolStatus::Ok, *payload};
  return {call.name, ToolStatus::Error, "no fixture for " + canonical_key(call)};
}

}  // namespace proagent
