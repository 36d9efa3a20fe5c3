#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "plagdet/embedding_store.hpp"
#include "plagdet/types.hpp"

namespace plagdet {

namespace detail {

template <typename T, typename U>
double dot(std::span<const T> u, std::span<const U> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return s;
}

template <typename T>
double norm(std::span<const T> u) {
  return std::sqrt(dot(u, u));
}

}  // namespace detail

/// u.v / (|u| |v|), accumulated in double.
template <typename T, typename U>
double cosine_similarity(std::span<const T> u, std::span<const U> v) {
  if (u.size() != v.size())
    throw UsageError("cosine_similarity: dim mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  const double nu = detail::norm(u);
  const double nv = detail::norm(v);
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
  return std::clamp(detail::dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline double cosine_similarity(const std::vector<float>& u, const std::vector<float>& v) {
  return cosine_similarity(std::span<const float>(u), std::span<const float>(v));
}

struct RankedEntry {
  std::string db_id;
  double score = 0.0;
  std::size_t db_index = 0;  // row in the database that was ranked

  bool operator==(const RankedEntry&) const = default;
};

/// Database items in descending score order; equal scores by ascending id.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  bool operator==(const RankedList&) const = default;
};

/// Exhaustive cosine ranking of every database row against `query`.
template <typename T>
RankedList rank(std::span<const T> query, const Dataset& db, std::string query_id = {}) {
  if (db.empty()) throw UsageError("rank: empty database");
  if (query.size() != db.dim())
    throw UsageError("rank: query dim " + std::to_string(query.size()) + " != database dim " +
                     std::to_string(db.dim()));
  const double qn = detail::norm(query);
  if (qn == 0.0) throw DomainError("rank: zero-norm query");

  RankedList out;
  out.query_id = std::move(query_id);
  out.entries.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    auto row = db.vector(i);
    const double rn = detail::norm(row);
    if (rn == 0.0) throw DomainError("rank: zero-norm database row " + std::to_string(i));
    const double s = std::clamp(detail::dot(query, row) / (qn * rn), -1.0, 1.0);
    out.entries.push_back({db.record(i).id, s, i});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.db_id < b.db_id;
  });
  return out;
}

inline RankedList rank(const std::vector<float>& query, const Dataset& db, std::string query_id = {}) {
  return rank(std::span<const float>(query), db, std::move(query_id));
}

inline RankedList top_k(const RankedList& rl, std::size_t k) {
  if (k == 0) throw UsageError("top_k: k must be >= 1");
  RankedList out;
  out.query_id = rl.query_id;
  const auto n = std::min(k, rl.entries.size());
  out.entries.assign(rl.entries.begin(), rl.entries.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace plagdet
