#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plagdet/embedding_store.hpp"
#include "plagdet/retrieval.hpp"
#include "plagdet/types.hpp"

namespace plagdet {

// ---------------------------------------------------------------------------
// Similarity-threshold rule (non-learned baseline)
// ---------------------------------------------------------------------------

/// How a query's similarities to the reference set collapse into one score.
struct ScoreStatistic {
  enum class Kind { max_similarity, mean_top_k };
  Kind kind = Kind::max_similarity;
  std::size_t k = 1;

  static ScoreStatistic max_similarity() { return {}; }
  static ScoreStatistic mean_top_k(std::size_t k) {
    if (k < 1) throw UsageError("mean_top_k: k must be >= 1");
    return {Kind::mean_top_k, k};
  }

  bool operator==(const ScoreStatistic&) const = default;
};

struct ThresholdModel {
  double tau = 0.0;
  ScoreStatistic statistic;
  LabelSet reference = {Label::van_gogh, Label::other};
  Split reference_split = Split::train;

  bool operator==(const ThresholdModel&) const = default;
};

template <typename T>
double score_query(std::span<const T> query, const Dataset& ref_db, ScoreStatistic statistic) {
  if (ref_db.empty()) throw UsageError("score_query: empty reference set");
  if (query.size() != ref_db.dim())
    throw UsageError("score_query: query dim " + std::to_string(query.size()) +
                     " != reference dim " + std::to_string(ref_db.dim()));
  std::vector<double> sims;
  sims.reserve(ref_db.size());
  for (std::size_t i = 0; i < ref_db.size(); ++i)
    sims.push_back(cosine_similarity(query, ref_db.vector(i)));

  if (statistic.kind == ScoreStatistic::Kind::max_similarity)
    return *std::max_element(sims.begin(), sims.end());

  if (statistic.k < 1) throw UsageError("mean_top_k: k must be >= 1");
  const std::size_t k = std::min(statistic.k, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                    std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += sims[i];
  return s / static_cast<double>(k);
}

inline double score_query(const std::vector<float>& query, const Dataset& ref_db,
                          ScoreStatistic statistic) {
  return score_query(std::span<const float>(query), ref_db, statistic);
}

/// Plagiarized iff score < tau; a score equal to tau is authentic.
inline BinaryLabel classify_threshold(const ThresholdModel& model, double score) {
  return score < model.tau ? BinaryLabel::plagiarized : BinaryLabel::authentic;
}

struct Calibration {
  double tau = 0.0;
  double accuracy = 0.0;
};

using LabeledScore = std::pair<double, BinaryLabel>;

/// Fraction of `scores` classified correctly by the rule "plagiarized iff score < tau".
inline double threshold_accuracy(std::span<const LabeledScore> scores, double tau) {
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& [s, y] : scores) {
    const auto pred = s < tau ? BinaryLabel::plagiarized : BinaryLabel::authentic;
    correct += pred == y ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

/// Picks tau maximizing accuracy of "plagiarized iff score < tau".
///
/// Candidate cut points lie between adjacent distinct sorted scores, plus one
/// cut below the minimum and one above the maximum. Among interior cuts with
/// maximal accuracy the widest gap wins (lowest gap on ties) and tau is its
/// midpoint. An extreme cut is used only if it is strictly better than every
/// interior cut, with tau = min - 1 or max + 1.
inline Calibration calibrate_threshold(std::vector<LabeledScore> scores) {
  std::size_t n_plag = 0, n_auth = 0;
  for (const auto& [s, y] : scores) {
    if (!std::isfinite(s)) throw ValidationError("calibrate_threshold: non-finite score");
    (y == BinaryLabel::plagiarized ? n_plag : n_auth) += 1;
  }
  if (n_plag == 0 || n_auth == 0)
    throw ValidationError("calibrate_threshold: need at least one score of each class (got " +
                          std::to_string(n_auth) + " authentic, " + std::to_string(n_plag) +
                          " plagiarized)");

  std::sort(scores.begin(), scores.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.first < b.first; });
  const std::size_t n = scores.size();

  // correct(i) with the first i sorted scores predicted plagiarized.
  std::size_t plag_below = 0, auth_below = 0;
  const std::size_t correct_at_min = n_auth;
  std::size_t best_interior = 0;
  double best_gap = -1.0;
  double best_tau = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    (scores[i - 1].second == BinaryLabel::plagiarized ? plag_below : auth_below) += 1;
    const double lo = scores[i - 1].first, hi = scores[i].first;
    if (!(lo < hi)) continue;
    const std::size_t correct = plag_below + (n_auth - auth_below);
    const double gap = hi - lo;
    if (correct > best_interior || (correct == best_interior && gap > best_gap)) {
      best_interior = correct;
      best_gap = gap;
      best_tau = lo + gap / 2.0;
    }
  }
  const std::size_t correct_at_max = n_plag;

  Calibration out;
  const bool have_interior = best_gap >= 0.0;
  std::size_t best = have_interior ? best_interior : 0;
  out.tau = best_tau;
  if (!have_interior || correct_at_min > best) {
    best = correct_at_min;
    out.tau = scores.front().first - 1.0;
  }
  if (correct_at_max > best) {
    best = correct_at_max;
    out.tau = scores.back().first + 1.0;
  }
  out.accuracy = static_cast<double>(best) / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Linear SVM (learning method)
// ---------------------------------------------------------------------------

struct SvmModel {
  std::vector<double> w;
  double b = 0.0;
  double lambda = 1e-3;

  bool operator==(const SvmModel&) const = default;
};

/// +1 for authentic, -1 for plagiarized.
constexpr double svm_target(BinaryLabel y) { return y == BinaryLabel::authentic ? 1.0 : -1.0; }

template <typename T>
double svm_decision(const SvmModel& model, std::span<const T> x) {
  if (x.size() != model.w.size())
    throw UsageError("svm: feature dim " + std::to_string(x.size()) + " != model dim " +
                     std::to_string(model.w.size()));
  double s = model.b;
  for (std::size_t i = 0; i < x.size(); ++i) s += model.w[i] * static_cast<double>(x[i]);
  return s;
}

/// Authentic iff w.x + b >= 0.
template <typename T>
BinaryLabel svm_predict(const SvmModel& model, std::span<const T> x) {
  return svm_decision(model, x) >= 0.0 ? BinaryLabel::authentic : BinaryLabel::plagiarized;
}

inline BinaryLabel svm_predict(const SvmModel& model, const std::vector<double>& x) {
  return svm_predict(model, std::span<const double>(x));
}

/// lambda/2 |w|^2 + mean hinge(1 - y (w.x + b)).
inline double svm_objective(const SvmModel& model, const EmbeddingSet& features,
                            std::span<const BinaryLabel> labels) {
  double reg = 0.0;
  for (double v : model.w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.count(); ++i)
    hinge += std::max(0.0, 1.0 - svm_target(labels[i]) * svm_decision(model, features.row(i)));
  return 0.5 * model.lambda * reg + hinge / static_cast<double>(features.count());
}

/// Pegasos-style stochastic subgradient descent with step 1/(lambda t) and
/// projection of w onto the ball of radius 1/sqrt(lambda). The bias is
/// unregularized and follows the same step schedule. Each epoch visits every
/// sample once in a seeded shuffled order. `objective_log`, if given,
/// receives the objective at initialization and after each epoch.
inline SvmModel train_svm(const EmbeddingSet& features, std::span<const BinaryLabel> labels,
                          double lambda, std::size_t epochs, std::uint64_t seed,
                          std::vector<double>* objective_log = nullptr) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw UsageError("train_svm: lambda must be > 0");
  if (epochs < 1) throw UsageError("train_svm: epochs must be >= 1");
  if (labels.size() != features.count())
    throw UsageError("train_svm: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.count()) + " feature rows");
  const auto n_auth = std::count(labels.begin(), labels.end(), BinaryLabel::authentic);
  if (n_auth == 0 || n_auth == static_cast<std::ptrdiff_t>(labels.size()))
    throw ValidationError("train_svm: both authentic and plagiarized examples are required");

  SvmModel model;
  model.lambda = lambda;
  model.w.assign(features.dim(), 0.0);
  if (objective_log) objective_log->push_back(svm_objective(model, features, labels));

  std::vector<std::size_t> order(features.count());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  const double radius = 1.0 / std::sqrt(lambda);
  std::size_t t = 0;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto x = features.row(i);
      const double y = svm_target(labels[i]);
      const double margin = y * svm_decision(model, x);
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : model.w) v *= shrink;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < x.size(); ++j) model.w[j] += eta * y * static_cast<double>(x[j]);
        model.b += eta * y;
      }
      double norm2 = 0.0;
      for (double v : model.w) norm2 += v * v;
      const double norm = std::sqrt(norm2);
      if (norm > radius)
        for (auto& v : model.w) v *= radius / norm;
    }
    const bool finite = std::isfinite(model.b) &&
                        std::all_of(model.w.begin(), model.w.end(),
                                    [](double v) { return std::isfinite(v); });
    if (!finite)
      throw ValidationError("train_svm: non-finite weights after epoch " + std::to_string(epoch));
    if (objective_log) objective_log->push_back(svm_objective(model, features, labels));
  }
  return model;
}

inline double svm_accuracy(const SvmModel& model, const EmbeddingSet& features,
                           std::span<const BinaryLabel> labels) {
  if (features.count() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.count(); ++i)
    correct += svm_predict(model, features.row(i)) == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(features.count());
}

struct SvmGridPoint {
  double lambda = 0.0;
  std::size_t epochs = 0;
  double val_accuracy = 0.0;
};

struct SvmSelection {
  SvmModel model;
  std::size_t epochs = 0;
  double val_accuracy = 0.0;
  std::vector<SvmGridPoint> grid;
};

inline const std::vector<double> kSvmLambdaGrid = {1e-4, 1e-3, 1e-2, 1e-1};
inline const std::vector<std::size_t> kSvmEpochGrid = {100, 500};

/// Trains one SVM per (lambda, epochs) cell and keeps the best by validation
/// accuracy; ties go to the earlier cell in grid order.
inline SvmSelection select_svm(const EmbeddingSet& train_x, std::span<const BinaryLabel> train_y,
                               const EmbeddingSet& val_x, std::span<const BinaryLabel> val_y,
                               std::uint64_t seed,
                               const std::vector<double>& lambdas = kSvmLambdaGrid,
                               const std::vector<std::size_t>& epoch_grid = kSvmEpochGrid) {
  if (val_x.count() == 0) throw ValidationError("select_svm: empty validation set");
  SvmSelection best;
  bool have = false;
  for (double lambda : lambdas) {
    for (std::size_t epochs : epoch_grid) {
      auto model = train_svm(train_x, train_y, lambda, epochs, seed);
      const double acc = svm_accuracy(model, val_x, val_y);
      best.grid.push_back({lambda, epochs, acc});
      if (!have || acc > best.val_accuracy) {
        best.model = std::move(model);
        best.epochs = epochs;
        best.val_accuracy = acc;
        have = true;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// JSON persistence
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ThresholdModel& m) {
  nlohmann::ordered_json j;
  j["tau"] = m.tau;
  j["statistic"] =
      m.statistic.kind == ScoreStatistic::Kind::max_similarity ? "max_similarity" : "mean_top_k";
  j["k"] = m.statistic.k;
  auto labels = nlohmann::ordered_json::array();
  for (Label l : kAllLabels)
    if (m.reference.contains(l)) labels.push_back(std::string(to_string(l)));
  j["reference_labels"] = labels;
  j["reference_split"] = std::string(to_string(m.reference_split));
  return j;
}

inline ThresholdModel threshold_model_from_json(const nlohmann::json& j) {
  try {
    ThresholdModel m;
    m.tau = j.at("tau").get<double>();
    if (!std::isfinite(m.tau)) throw ValidationError("threshold model: tau must be finite");
    const auto stat = j.at("statistic").get<std::string>();
    const auto k = j.value("k", std::size_t{1});
    if (stat == "max_similarity")
      m.statistic = ScoreStatistic::max_similarity();
    else if (stat == "mean_top_k")
      m.statistic = ScoreStatistic::mean_top_k(k);
    else
      throw ValidationError("threshold model: unknown statistic '" + stat + "'");
    m.reference = {};
    for (const auto& l : j.at("reference_labels")) m.reference.insert(parse_label(l.get<std::string>()));
    m.reference_split = parse_split(j.value("reference_split", std::string("train")));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("threshold model: ") + e.what());
  }
}

inline nlohmann::ordered_json to_json(const SvmModel& m) {
  nlohmann::ordered_json j;
  j["w"] = m.w;
  j["b"] = m.b;
  j["lambda"] = m.lambda;
  return j;
}

inline SvmModel svm_model_from_json(const nlohmann::json& j) {
  try {
    SvmModel m;
    m.w = j.at("w").get<std::vector<double>>();
    m.b = j.at("b").get<double>();
    m.lambda = j.at("lambda").get<double>();
    if (m.w.empty()) throw ValidationError("svm model: empty weight vector");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("svm model: ") + e.what());
  }
}

}  // namespace plagdet
