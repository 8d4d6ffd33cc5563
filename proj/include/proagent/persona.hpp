#pragma once

#include "proagent/context.hpp"
#include "proagent/embedder.hpp"

#include <numeric>

namespace proagent {

inline const std::vector<std::string>& default_scenarios() {
  static const std::vector<std::string> names = {"shopping", "travel", "chitchat", "work", "health",
                                                 "outdoors", "cooking", "leisure", "others"};
  return names;
}

inline constexpr const char* kFallbackScenario = "others";
inline constexpr std::size_t kDefaultTopK = 30;

// Closed set of scenario names. Defaults to the nine built-in categories.
class ScenarioSet {
 public:
  ScenarioSet() : names_(default_scenarios().begin(), default_scenarios().end()) {}
  explicit ScenarioSet(std::set<std::string> names) : names_(std::move(names)) {}

  bool contains(const std::string& s) const { return names_.count(s) > 0; }
  const std::set<std::string>& names() const { return names_; }

 private:
  std::set<std::string> names_;
};

struct Persona {
  std::string id;
  std::string scenario;
  std::string text;

  bool operator==(const Persona&) const = default;
};

struct BankEntry {
  std::set<std::string> objects;
  std::string scenario;
};

inline std::vector<BankEntry> load_bank(std::istream& in, const ScenarioSet& scenarios = {}) {
  std::vector<BankEntry> bank;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    BankEntry e;
    const json& objs = require_key(j, "objects", line);
    if (!objs.is_array()) throw FormatError("\"objects\" must be an array", line);
    for (const auto& o : objs) {
      if (!o.is_string()) throw FormatError("object labels must be strings", line);
      std::string label = to_lower(trim(o.get<std::string>()));
      if (!label.empty()) e.objects.insert(std::move(label));
    }
    if (e.objects.empty()) throw FormatError("bank entry needs at least one object", line);
    e.scenario = require_string(j, "scenario", line);
    if (!scenarios.contains(e.scenario)) throw FormatError("unknown scenario \"" + e.scenario + "\"", line);
    bank.push_back(std::move(e));
  });
  return bank;
}

// Personas grouped by scenario; group order is file order.
class PersonaStore {
 public:
  PersonaStore() = default;

  void add(Persona p) {
    if (p.text.empty()) throw Error("persona text must be non-empty");
    by_scenario_[p.scenario].push_back(std::move(p));
  }

  std::vector<Persona> retrieve(const std::string& scenario) const {
    auto it = by_scenario_.find(scenario);
    return it == by_scenario_.end() ? std::vector<Persona>{} : it->second;
  }

  std::vector<Persona> all() const {
    std::vector<Persona> out;
    for (const auto& [_, group] : by_scenario_) out.insert(out.end(), group.begin(), group.end());
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, g] : by_scenario_) n += g.size();
    return n;
  }

  const std::map<std::string, std::vector<Persona>>& groups() const { return by_scenario_; }

 private:
  std::map<std::string, std::vector<Persona>> by_scenario_;
};

inline PersonaStore load_personas(std::istream& in, const ScenarioSet& scenarios = {}) {
  PersonaStore store;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    Persona p{require_string(j, "id", line), require_string(j, "scenario", line), require_string(j, "text", line)};
    if (!scenarios.contains(p.scenario)) throw FormatError("unknown scenario \"" + p.scenario + "\"", line);
    if (p.text.empty()) throw FormatError("persona text must be non-empty", line);
    store.add(std::move(p));
  });
  return store;
}

inline std::vector<Persona> retrieve_personas(const std::string& scenario, const PersonaStore& store) {
  return store.retrieve(scenario);
}

// One "- text" line per persona, newline-terminated.
inline std::string render_personas(std::span<const Persona> personas) {
  std::string out;
  for (const auto& p : personas) out += "- " + p.text + "\n";
  return out;
}

// Labels in lexicographic order, single-space separated.
inline std::string object_set_to_text(const std::set<std::string>& objects) { return join(objects, " "); }

namespace detail {
// Similarities compared at 1e-12 resolution so ties do not depend on
// floating-point summation order.
inline double snap(double x) { return std::round(x * 1e12) / 1e12; }
}  // namespace detail

struct ScenarioPrediction {
  std::string scenario;
  std::vector<std::size_t> top;  // indices of the retrieved entries, best first
  std::vector<double> similarities;  // per bank entry
};

// Embeds the entries once; reusable across queries.
class ScenarioPredictor {
 public:
  ScenarioPredictor(std::vector<BankEntry> bank, std::shared_ptr<const Embedder> embedder, std::size_t k = kDefaultTopK,
                    std::string fallback = kFallbackScenario)
      : bank_(std::move(bank)), embedder_(std::move(embedder)), k_(k), fallback_(std::move(fallback)) {
    if (k_ == 0) throw std::invalid_argument("k must be positive");
    entry_embeddings_.reserve(bank_.size());
    for (const auto& e : bank_) entry_embeddings_.push_back(embedder_->embed(object_set_to_text(e.objects)));
  }

  ScenarioPrediction predict(const CoarseVisualContext& c) const {
    if (bank_.empty()) throw Error("empty bank");
    ScenarioPrediction out;
    if (c.objects.empty()) {
      out.scenario = fallback_;
      return out;
    }
    const Embedding q = embedder_->embed(object_set_to_text(c.objects));
    out.similarities.reserve(bank_.size());
    for (const auto& e : entry_embeddings_) out.similarities.push_back(detail::snap(cosine_similarity(q, e)));

    std::vector<std::size_t> idx(bank_.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t m = std::min(k_, bank_.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), [&](std::size_t a, std::size_t b) {
      if (out.similarities[a] != out.similarities[b]) return out.similarities[a] > out.similarities[b];
      return a < b;
    });
    idx.resize(m);
    out.top = idx;

    struct Tally {
      std::size_t count = 0;
      double sum = 0;
    };
    std::map<std::string, Tally> tally;
    for (std::size_t i : idx) {
      auto& t = tally[bank_[i].scenario];
      ++t.count;
      t.sum += out.similarities[i];
    }
    // std::map iterates names in lexicographic order, so strict comparisons
    // keep the lexicographically first name on a full tie.
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    double best_mean = 0;
    for (const auto& [name, t] : tally) {
      const double mean = detail::snap(t.sum / static_cast<double>(t.count));
      if (!best || t.count > best_count || (t.count == best_count && mean > best_mean)) {
        best = &name;
        best_count = t.count;
        best_mean = mean;
      }
    }
    out.scenario = *best;
    return out;
  }

  const std::vector<BankEntry>& bank() const { return bank_; }
  std::size_t k() const { return k_; }

 private:
  std::vector<BankEntry> bank_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<Embedding> entry_embeddings_;
  std::size_t k_;
  std::string fallback_;
};

inline std::string predict_scenario(const CoarseVisualContext& c, const std::vector<BankEntry>& bank, std::size_t k,
                                    const Embedder& embedder) {
  if (bank.empty()) throw Error("empty bank");
  // Non-owning alias; the predictor does not outlive this call.
  std::shared_ptr<const Embedder> alias(std::shared_ptr<const Embedder>{}, &embedder);
  return ScenarioPredictor(bank, alias, k).predict(c).scenario;
}

}  // namespace proagent
