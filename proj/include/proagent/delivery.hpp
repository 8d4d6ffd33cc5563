#pragma once

#include "proagent/embedder.hpp"

#include <memory>
#include <optional>
#include <span>

namespace proagent {

enum class DeliveryMode { Window, Consecutive };

struct DeliveryConfig {
  double sim_threshold = 0.5;
  double window_s = 300.0;
  DeliveryMode mode = DeliveryMode::Window;

  void validate() const {
    if (!(sim_threshold >= 0 && sim_threshold <= 1)) throw ConfigError("delivery.sim_threshold must be in [0,1]");
    if (!(window_s > 0)) throw ConfigError("delivery.window_s must be > 0");
  }
};

struct DeliveryRecord {
  double t = 0;
  std::string assistance;
  bool delivered = false;
  std::optional<double> similarity_to_prev;
  std::optional<std::string> suppressed_reason;
};

// Delivers unless the candidate is at least sim_threshold similar to a
// delivery inside the window. Consecutive mode compares only against the
// most recent delivery in the window.
inline DeliveryRecord gate(const std::string& candidate, std::span<const DeliveryRecord> history, double now,
                           const DeliveryConfig& cfg, const Embedder& embedder) {
  DeliveryRecord rec{now, candidate, true, std::nullopt, std::nullopt};
  const Embedding cand = embedder.embed(candidate);
  const DeliveryRecord* closest = nullptr;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (!it->delivered || now - it->t > cfg.window_s || it->t > now) continue;
    const double sim = std::clamp(cosine_similarity(cand, embedder.embed(it->assistance)), 0.0, 1.0);
    if (!rec.similarity_to_prev || sim > *rec.similarity_to_prev) {
      rec.similarity_to_prev = sim;
      closest = &*it;
    }
    if (cfg.mode == DeliveryMode::Consecutive) break;
  }
  if (rec.similarity_to_prev && *rec.similarity_to_prev >= cfg.sim_threshold) {
    rec.delivered = false;
    rec.suppressed_reason = "similarity " + format_fixed(*rec.similarity_to_prev, 3) + " to delivery at t=" +
                            format_fixed(closest->t, 3) + " within " + format_fixed(cfg.window_s, 0) + " s";
  }
  return rec;
}

// Owns the delivery history; offer() is called in delivery order.
class DeliveryGate {
 public:
  DeliveryGate(DeliveryConfig cfg, std::shared_ptr<const Embedder> embedder) : cfg_(cfg), embedder_(std::move(embedder)) {
    cfg_.validate();
  }

  const DeliveryRecord& offer(const std::string& candidate, double now) {
    history_.push_back(gate(candidate, history_, now, cfg_, *embedder_));
    return history_.back();
  }

  const std::vector<DeliveryRecord>& history() const { return history_; }

  // What the user actually saw.
  std::vector<DeliveryRecord> delivered() const {
    std::vector<DeliveryRecord> out;
    std::copy_if(history_.begin(), history_.end(), std::back_inserter(out), [](const auto& r) { return r.delivered; });
    return out;
  }

 private:
  DeliveryConfig cfg_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<DeliveryRecord> history_;
};

}  // namespace proagent
