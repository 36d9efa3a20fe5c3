#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plagdet/classifier.hpp"
#include "plagdet/embedding_store.hpp"
#include "plagdet/evaluation.hpp"
#include "plagdet/metric_learning.hpp"
#include "plagdet/retrieval.hpp"

// End-to-end flows: train split is the retrieval database and reference set,
// val split calibrates, test split supplies the queries.

namespace plagdet {

struct EvalOptions {
  PositivePolicy policy;
  ScoreStatistic statistic;
  LabelSet reference = {Label::van_gogh, Label::other};
};

struct RetrievalResult {
  std::vector<APResult> per_query;
  std::vector<std::string> excluded;
  std::optional<double> map;
};

/// AP of every test query against the train-split database.
inline RetrievalResult evaluate_retrieval(const Dataset& ds, const PositivePolicy& policy) {
  const Dataset db = subset(ds, Split::train, policy.database_labels());
  if (db.empty()) throw ValidationError("retrieval database (train split) is empty");
  RetrievalResult out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& q = ds.record(i);
    if (q.split != Split::test) continue;
    const auto rl = rank(ds.vector(i), db, q.id);
    const auto mask = mask_in_rank_order(rl, positives_for(q.label, db, policy));
    try {
      out.per_query.push_back(average_precision(rl, mask));
    } catch (const NoPositivesError&) {
      out.excluded.push_back(q.id);
    }
  }
  if (!out.per_query.empty()) out.map = mean_ap(out.per_query);
  return out;
}

inline std::vector<LabeledScore> threshold_scores(const Dataset& ds, Split split,
                                                  const ThresholdModel& model) {
  const Dataset ref = subset(ds, model.reference_split, model.reference);
  if (ref.empty()) throw ValidationError("threshold reference set is empty");
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.record(i).split != split) continue;
    out.emplace_back(score_query(ds.vector(i), ref, model.statistic), to_binary(ds.record(i).label));
  }
  return out;
}

struct CalibratedThreshold {
  ThresholdModel model;
  double val_accuracy = 0.0;
};

/// Searches tau maximizing accuracy on the val split.
inline CalibratedThreshold calibrate_on_validation(const Dataset& ds, ScoreStatistic statistic,
                                                   LabelSet reference) {
  ThresholdModel model;
  model.statistic = statistic;
  model.reference = reference;
  auto scores = threshold_scores(ds, Split::val, model);
  if (scores.empty()) throw ValidationError("validation split is empty");
  const auto cal = calibrate_threshold(std::move(scores));
  model.tau = cal.tau;
  return {model, cal.accuracy};
}

/// Non-learned baseline: raw-embedding retrieval plus similarity threshold.
inline EvalReport evaluate_baseline(const Dataset& ds, const EvalOptions& opts,
                                    std::optional<ThresholdModel> threshold = std::nullopt) {
  if (!threshold) threshold = calibrate_on_validation(ds, opts.statistic, opts.reference).model;
  EvalReport report;
  report.method = "baseline";
  auto retrieval = evaluate_retrieval(ds, opts.policy);
  report.per_query = std::move(retrieval.per_query);
  report.excluded_queries = std::move(retrieval.excluded);
  report.map = retrieval.map;

  const Dataset ref = subset(ds, threshold->reference_split, threshold->reference);
  if (ref.empty()) throw ValidationError("threshold reference set is empty");
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.record(i).split != Split::test) continue;
    const double s = score_query(ds.vector(i), ref, threshold->statistic);
    preds.push_back({ds.record(i).label, classify_threshold(*threshold, s)});
  }
  if (preds.empty()) throw ValidationError("test split is empty");
  report.accuracy = accuracy_breakdown(preds);
  return report;
}

inline std::pair<EmbeddingSet, std::vector<BinaryLabel>> split_features(const Dataset& ds,
                                                                        Split split) {
  const Dataset part = subset(ds, split, LabelSet::all());
  std::vector<BinaryLabel> y;
  for (const auto& r : part.records()) y.push_back(to_binary(r.label));
  return {part.embeddings(), std::move(y)};
}

/// Grid-searched SVM on already-projected features (train fits, val selects).
inline SvmSelection train_svm_on_projected(const Dataset& projected, std::uint64_t seed) {
  auto [train_x, train_y] = split_features(projected, Split::train);
  auto [val_x, val_y] = split_features(projected, Split::val);
  return select_svm(train_x, train_y, val_x, val_y, seed);
}

/// Learning method: retrieval and SVM classification in the projected space.
inline EvalReport evaluate_learning(const Dataset& ds, const ProjectionHead& head,
                                    const SvmModel& svm, const EvalOptions& opts) {
  const Dataset projected = project(head, ds);
  EvalReport report;
  report.method = "learning";
  auto retrieval = evaluate_retrieval(projected, opts.policy);
  report.per_query = std::move(retrieval.per_query);
  report.excluded_queries = std::move(retrieval.excluded);
  report.map = retrieval.map;

  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    if (projected.record(i).split != Split::test) continue;
    preds.push_back({projected.record(i).label, svm_predict(svm, projected.vector(i))});
  }
  if (preds.empty()) throw ValidationError("test split is empty");
  report.accuracy = accuracy_breakdown(preds);
  return report;
}

}  // namespace plagdet
