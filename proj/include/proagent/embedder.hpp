#pragma once

#include "proagent/common.hpp"

#include <variant>

namespace proagent {

using DenseVector = std::vector<double>;
using SparseVector = std::map<std::string, double>;  // token -> weight

// Unit-norm embedding, or the zero vector for empty input.
class Embedding {
 public:
  Embedding() = default;
  Embedding(DenseVector v) : data_(std::move(v)) {}
  Embedding(SparseVector v) : data_(std::move(v)) {}

  bool is_sparse() const { return std::holds_alternative<SparseVector>(data_); }
  const DenseVector& dense() const { return std::get<DenseVector>(data_); }
  const SparseVector& sparse() const { return std::get<SparseVector>(data_); }

  double norm() const {
    double s = 0;
    std::visit(
        [&](const auto& v) {
          for (const auto& x : v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, SparseVector>)
              s += x.second * x.second;
            else
              s += x * x;
          }
        },
        data_);
    return std::sqrt(s);
  }

  Embedding normalized() const {
    const double n = norm();
    if (n == 0) return *this;
    Embedding out = *this;
    std::visit(
        [&](auto& v) {
          for (auto& x : v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, SparseVector>)
              x.second /= n;
            else
              x /= n;
          }
        },
        out.data_);
    return out;
  }

 private:
  std::variant<DenseVector, SparseVector> data_ = SparseVector{};
};

// Cosine similarity; 0 when either side is the zero vector.
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  double dot = 0;
  if (a.is_sparse() && b.is_sparse()) {
    const auto& x = a.sparse();
    const auto& y = b.sparse();
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
      if (i->first < j->first)
        ++i;
      else if (j->first < i->first)
        ++j;
      else
        dot += (i++)->second * (j++)->second;
    }
  } else if (!a.is_sparse() && !b.is_sparse()) {
    const auto& x = a.dense();
    const auto& y = b.dense();
    if (x.size() != y.size()) throw Error("embedding dimension mismatch");
    for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
  } else {
    throw Error("cannot compare sparse and dense embeddings");
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
};

// Exact bag-of-words over lowercased whitespace tokens, L2-normalized.
class BagOfWordsEmbedder final : public Embedder {
 public:
  Embedding embed(std::string_view text) const override {
    SparseVector counts;
    for (auto& tok : split_whitespace(to_lower(text))) counts[tok] += 1.0;
    return Embedding(std::move(counts)).normalized();
  }
};

}  // namespace proagent
