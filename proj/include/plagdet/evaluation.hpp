#pragma once

#include <array>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plagdet/embedding_store.hpp"
#include "plagdet/retrieval.hpp"
#include "plagdet/types.hpp"

namespace plagdet {

/// Which database items count as relevant for a query, by query label.
///
///   plagiarized query -> van_gogh items
///   van_gogh query    -> van_gogh items
///   other query       -> other items
///
/// Plagiarized database items (present only when include_plagiarized_in_db)
/// are negatives for every query unless `plagiarized_matches_van_gogh` is set,
/// in which case they also count as positives for van_gogh/plagiarized queries.
struct PositivePolicy {
  bool include_plagiarized_in_db = false;
  bool plagiarized_matches_van_gogh = false;

  LabelSet database_labels() const {
    LabelSet s{Label::van_gogh, Label::other};
    if (include_plagiarized_in_db) s.insert(Label::plagiarized);
    return s;
  }

  bool is_positive(Label query, Label item) const {
    switch (query) {
      case Label::van_gogh:
      case Label::plagiarized:
        return item == Label::van_gogh ||
               (plagiarized_matches_van_gogh && item == Label::plagiarized);
      case Label::other:
        return item == Label::other;
    }
    return false;
  }
};

inline std::vector<bool> positives_for(Label query_label, const Dataset& db,
                                       const PositivePolicy& policy) {
  if (db.empty()) throw UsageError("positives_for: empty database");
  std::vector<bool> mask(db.size());
  for (std::size_t i = 0; i < db.size(); ++i)
    mask[i] = policy.is_positive(query_label, db.record(i).label);
  return mask;
}

/// Raised when a query has no relevant items; such queries are excluded from mAP.
class NoPositivesError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct PrPoint {
  std::size_t k = 0;
  double precision = 0.0;
  double delta_recall = 0.0;
};

struct APResult {
  std::string query_id;
  double ap = 0.0;
  std::vector<PrPoint> pr_points;
};

/// AP = sum_k P(k) dR(k) over the full ranking. `positives` is aligned with
/// the ranked entries (mask[k] says whether rank k+1 is relevant).
inline APResult average_precision(const RankedList& rl, const std::vector<bool>& positives) {
  if (positives.size() != rl.entries.size())
    throw UsageError("average_precision: mask length " + std::to_string(positives.size()) +
                     " != ranking length " + std::to_string(rl.entries.size()));
  std::size_t n_pos = 0;
  for (bool b : positives) n_pos += b ? 1 : 0;
  if (n_pos == 0)
    throw NoPositivesError("average_precision: query '" + rl.query_id + "' has no positives");

  APResult out;
  out.query_id = rl.query_id;
  out.pr_points.reserve(positives.size());
  const double step = 1.0 / static_cast<double>(n_pos);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const std::size_t k = i + 1;
    hits += positives[i] ? 1 : 0;
    const double precision = static_cast<double>(hits) / static_cast<double>(k);
    const double dr = positives[i] ? step : 0.0;
    out.ap += precision * dr;
    out.pr_points.push_back({k, precision, dr});
  }
  return out;
}

/// Mask aligned with rank order, from a mask aligned with database rows.
inline std::vector<bool> mask_in_rank_order(const RankedList& rl, const std::vector<bool>& db_mask) {
  std::vector<bool> out(rl.entries.size());
  for (std::size_t i = 0; i < rl.entries.size(); ++i) out[i] = db_mask.at(rl.entries[i].db_index);
  return out;
}

inline double mean_ap(std::span<const APResult> results) {
  if (results.empty()) throw UsageError("mean_ap: no AP results");
  double s = 0.0;
  for (const auto& r : results) s += r.ap;
  return s / static_cast<double>(results.size());
}

// ---------------------------------------------------------------------------
// Accuracy breakdown
// ---------------------------------------------------------------------------

struct Prediction {
  Label truth = Label::van_gogh;
  BinaryLabel predicted = BinaryLabel::authentic;
};

struct AccuracyBreakdown {
  std::optional<double> van_gogh, plagiarized, other;  // absent when the group is empty
  double overall = 0.0;
  std::array<std::size_t, 3> group_sizes{};  // indexed by Label

  std::optional<double> for_label(Label l) const {
    switch (l) {
      case Label::van_gogh: return van_gogh;
      case Label::plagiarized: return plagiarized;
      case Label::other: return other;
    }
    return std::nullopt;
  }
};

inline AccuracyBreakdown accuracy_breakdown(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw UsageError("accuracy_breakdown: no predictions");
  std::array<std::size_t, 3> total{}, correct{};
  for (const auto& p : predictions) {
    const auto g = static_cast<std::size_t>(p.truth);
    total[g] += 1;
    correct[g] += to_binary(p.truth) == p.predicted ? 1 : 0;
  }
  AccuracyBreakdown out;
  out.group_sizes = total;
  auto group = [&](Label l) -> std::optional<double> {
    const auto g = static_cast<std::size_t>(l);
    if (total[g] == 0) return std::nullopt;
    return static_cast<double>(correct[g]) / static_cast<double>(total[g]);
  };
  out.van_gogh = group(Label::van_gogh);
  out.plagiarized = group(Label::plagiarized);
  out.other = group(Label::other);
  out.overall = static_cast<double>(correct[0] + correct[1] + correct[2]) /
                static_cast<double>(predictions.size());
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string method;
  AccuracyBreakdown accuracy;
  std::optional<double> map;  // absent when no query had positives
  std::vector<APResult> per_query;
  std::vector<std::string> excluded_queries;  // no positives in the database
};

inline std::string format_percent(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
  return buf;
}

inline std::string markdown_table_header() {
  return "| method | Van Gogh | Plagiarized | Other | Accuracy | mAP |\n"
         "|---|---|---|---|---|---|\n";
}

inline std::string markdown_row(const EvalReport& r) {
  return "| " + r.method + " | " + format_percent(r.accuracy.van_gogh) + " | " +
         format_percent(r.accuracy.plagiarized) + " | " + format_percent(r.accuracy.other) +
         " | " + format_percent(r.accuracy.overall) + " | " + format_percent(r.map) + " |\n";
}

inline std::string markdown_table(std::span<const EvalReport> rows) {
  std::string out = markdown_table_header();
  for (const auto& r : rows) out += markdown_row(r);
  return out;
}

inline nlohmann::ordered_json to_json(const EvalReport& r, bool with_pr_points = false) {
  auto opt = [](std::optional<double> v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["accuracy_van_gogh"] = opt(r.accuracy.van_gogh);
  j["accuracy_plagiarized"] = opt(r.accuracy.plagiarized);
  j["accuracy_other"] = opt(r.accuracy.other);
  j["accuracy_overall"] = r.accuracy.overall;
  j["map"] = opt(r.map);
  j["group_sizes"] = {{"van_gogh", r.accuracy.group_sizes[0]},
                      {"other", r.accuracy.group_sizes[1]},
                      {"plagiarized", r.accuracy.group_sizes[2]}};
  j["excluded_queries"] = r.excluded_queries;
  auto per_query = nlohmann::ordered_json::array();
  for (const auto& q : r.per_query) {
    nlohmann::ordered_json e;
    e["query_id"] = q.query_id;
    e["ap"] = q.ap;
    if (with_pr_points) {
      auto pts = nlohmann::ordered_json::array();
      for (const auto& p : q.pr_points) pts.push_back({p.k, p.precision, p.delta_recall});
      e["pr_points"] = pts;
    }
    per_query.push_back(e);
  }
  j["per_query"] = per_query;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  try {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.accuracy.van_gogh = opt("accuracy_van_gogh");
    r.accuracy.plagiarized = opt("accuracy_plagiarized");
    r.accuracy.other = opt("accuracy_other");
    r.accuracy.overall = j.at("accuracy_overall").get<double>();
    r.map = opt("map");
    if (j.contains("group_sizes")) {
      const auto& g = j.at("group_sizes");
      r.accuracy.group_sizes = {g.value("van_gogh", std::size_t{0}), g.value("other", std::size_t{0}),
                                g.value("plagiarized", std::size_t{0})};
    }
    if (j.contains("excluded_queries"))
      r.excluded_queries = j.at("excluded_queries").get<std::vector<std::string>>();
    if (j.contains("per_query"))
      for (const auto& q : j.at("per_query"))
        r.per_query.push_back({q.at("query_id").get<std::string>(), q.at("ap").get<double>(), {}});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("eval report: ") + e.what());
  }
}

}  // namespace plagdet
