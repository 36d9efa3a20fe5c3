#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "plagdet/binary_io.hpp"
#include "plagdet/embedding_store.hpp"
#include "plagdet/types.hpp"

namespace plagdet {

/// Record indices into a Dataset: anchor is authentic van_gogh, positive is any
/// other van_gogh or plagiarized item, negative is from another artist.
struct Triplet {
  std::size_t a = 0;
  std::size_t p = 0;
  std::size_t n = 0;

  bool operator==(const Triplet&) const = default;
};

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t iterations = 20000;
  std::size_t out_dim = 0;  // 0 means "same as input dim"
  std::uint64_t seed = 0;

  void validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) throw UsageError("margin must be > 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw UsageError("learning_rate must be > 0");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  }
};

/// Distance used by the triplet loss: squared Euclidean distance between the
/// L2-normalized vectors, i.e. 2 - 2 cos. Bounded in [0, 4].
struct Metric {
  enum class Kind { squared_euclidean_normalized };
  Kind kind = Kind::squared_euclidean_normalized;
};

/// Linear map R^in -> R^out, weights stored row-major (out x in).
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t in_dim, std::size_t out_dim, std::vector<double> weights)
      : in_dim_(in_dim), out_dim_(out_dim), weights_(std::move(weights)) {
    if (in_dim_ == 0 || out_dim_ == 0) throw UsageError("projection head dims must be positive");
    if (weights_.size() != in_dim_ * out_dim_)
      throw UsageError("projection head expects " + std::to_string(in_dim_ * out_dim_) +
                       " weights, got " + std::to_string(weights_.size()));
  }

  static ProjectionHead identity(std::size_t dim) {
    std::vector<double> w(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
    return ProjectionHead(dim, dim, std::move(w));
  }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }
  double at(std::size_t r, std::size_t c) const { return weights_[r * in_dim_ + c]; }

  template <typename T>
  std::vector<double> apply(std::span<const T> x) const {
    if (x.size() != in_dim_)
      throw UsageError("projection: input dim " + std::to_string(x.size()) + " != head in_dim " +
                       std::to_string(in_dim_));
    std::vector<double> z(out_dim_, 0.0);
    for (std::size_t r = 0; r < out_dim_; ++r) {
      const double* w = weights_.data() + r * in_dim_;
      double s = 0.0;
      for (std::size_t c = 0; c < in_dim_; ++c) s += w[c] * static_cast<double>(x[c]);
      z[r] = s;
    }
    return z;
  }

  bool all_finite() const {
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); });
  }

  bool operator==(const ProjectionHead&) const = default;

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::vector<double> weights_;
};

/// Identity when out_dim == in_dim, otherwise seeded Gaussian rows with sigma 1/sqrt(in_dim).
inline ProjectionHead initial_head(std::size_t in_dim, const TrainConfig& cfg) {
  const std::size_t out_dim = cfg.out_dim == 0 ? in_dim : cfg.out_dim;
  if (out_dim == in_dim) return ProjectionHead::identity(in_dim);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  std::vector<double> w(out_dim * in_dim);
  for (auto& v : w) v = gauss(rng);
  return ProjectionHead(in_dim, out_dim, std::move(w));
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline double triplet_hinge(double d_ap, double d_an, double margin) {
  return std::max(0.0, d_ap - d_an + margin);
}

namespace detail {

template <typename T>
std::vector<double> normalized(std::span<const T> x) {
  double n2 = 0.0;
  for (auto v : x) n2 += static_cast<double>(v) * static_cast<double>(v);
  const double n = std::sqrt(n2);
  if (n == 0.0) throw DomainError("metric: zero-norm vector cannot be normalized");
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = static_cast<double>(x[i]) / n;
  return u;
}

inline double squared_distance(const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

template <typename T>
double distance(std::span<const T> x, std::span<const T> y, Metric = {}) {
  if (x.size() != y.size()) throw UsageError("distance: dim mismatch");
  return detail::squared_distance(detail::normalized(x), detail::normalized(y));
}

/// max(0, d(a,p) - d(a,n) + margin).
template <typename T>
double triplet_loss(std::span<const T> a, std::span<const T> p, std::span<const T> n,
                    Metric metric, double margin) {
  if (a.size() != p.size() || a.size() != n.size())
    throw UsageError("triplet_loss: dim mismatch");
  return triplet_hinge(distance(a, p, metric), distance(a, n, metric), margin);
}

inline double triplet_loss(const std::vector<double>& a, const std::vector<double>& p,
                           const std::vector<double>& n, Metric metric, double margin) {
  using S = std::span<const double>;
  return triplet_loss(S(a), S(p), S(n), metric, margin);
}

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as ProjectionHead::weights()
};

namespace detail {

// Gradient of u = z/|z| pulled back to z: (I - u u^T) g / |z|.
inline std::vector<double> backprop_normalize(const std::vector<double>& u, double z_norm,
                                              const std::vector<double>& g) {
  double ug = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) ug += u[i] * g[i];
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = (g[i] - u[i] * ug) / z_norm;
  return out;
}

template <typename T>
void add_outer(std::vector<double>& grad, const std::vector<double>& gz, std::span<const T> x,
               double scale) {
  const std::size_t in = x.size();
  for (std::size_t r = 0; r < gz.size(); ++r) {
    const double g = gz[r] * scale;
    if (g == 0.0) continue;
    double* row = grad.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) row[c] += g * static_cast<double>(x[c]);
  }
}

inline double norm_of(const std::vector<double>& z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

/// Adds scale * dL/dW of one triplet into `grad`; returns the triplet loss.
template <typename T>
double accumulate_triplet_gradient(const ProjectionHead& head, std::span<const T> a,
                                   std::span<const T> p, std::span<const T> n, double margin,
                                   double scale, std::vector<double>& grad) {
  if (a.size() != p.size() || a.size() != n.size())
    throw UsageError("loss_gradient: dim mismatch");
  const auto za = head.apply(a), zp = head.apply(p), zn = head.apply(n);
  const double na = norm_of(za), np = norm_of(zp), nn = norm_of(zn);
  if (na == 0.0 || np == 0.0 || nn == 0.0)
    throw DomainError("loss_gradient: projected vector has zero norm");
  // |z|^2 overflowed; report it as a non-finite loss rather than normalizing to zero
  if (!std::isfinite(na) || !std::isfinite(np) || !std::isfinite(nn))
    return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ua(za.size()), up(zp.size()), un(zn.size());
  for (std::size_t i = 0; i < za.size(); ++i) {
    ua[i] = za[i] / na;
    up[i] = zp[i] / np;
    un[i] = zn[i] / nn;
  }
  const double loss = triplet_hinge(squared_distance(ua, up), squared_distance(ua, un), margin);
  if (loss <= 0.0) return 0.0;

  // L = |ua-up|^2 - |ua-un|^2 + margin = 2 ua.un - 2 ua.up + margin (unit vectors)
  std::vector<double> g_ua(ua.size()), g_up(ua.size()), g_un(ua.size());
  for (std::size_t i = 0; i < ua.size(); ++i) {
    g_ua[i] = 2.0 * (un[i] - up[i]);
    g_up[i] = -2.0 * ua[i];
    g_un[i] = 2.0 * ua[i];
  }
  add_outer(grad, backprop_normalize(ua, na, g_ua), a, scale);
  add_outer(grad, backprop_normalize(up, np, g_up), p, scale);
  add_outer(grad, backprop_normalize(un, nn, g_un), n, scale);
  return loss;
}

}  // namespace detail

/// Triplet loss of the projected vectors and its gradient w.r.t. the head
/// weights. The gradient is exactly zero where the hinge is inactive.
template <typename T>
LossAndGradient loss_gradient(const ProjectionHead& head, std::span<const T> a,
                              std::span<const T> p, std::span<const T> n, Metric,
                              double margin) {
  LossAndGradient out;
  out.gradient.assign(head.weights().size(), 0.0);
  out.loss = detail::accumulate_triplet_gradient(head, a, p, n, margin, 1.0, out.gradient);
  return out;
}

inline LossAndGradient loss_gradient(const ProjectionHead& head, const std::vector<double>& a,
                                     const std::vector<double>& p, const std::vector<double>& n,
                                     Metric metric, double margin) {
  using S = std::span<const double>;
  return loss_gradient(head, S(a), S(p), S(n), metric, margin);
}

// ---------------------------------------------------------------------------
// Triplet sampling
// ---------------------------------------------------------------------------

/// Uniform sampler over valid (a, p, n) combinations within one split.
class TripletSampler {
 public:
  explicit TripletSampler(const Dataset& ds, Split split = Split::train) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& r = ds.record(i);
      if (r.split != split) continue;
      if (r.label == Label::van_gogh) anchors_.push_back(i);
      if (r.label == Label::van_gogh || r.label == Label::plagiarized) positives_.push_back(i);
      if (r.label == Label::other) negatives_.push_back(i);
    }
    const std::string where = " in " + std::string(to_string(split)) + " split";
    if (anchors_.empty()) throw ValidationError("no anchors: no van_gogh items" + where);
    if (positives_.size() < 2)
      throw ValidationError("no positives: need >= 2 van_gogh/plagiarized items" + where);
    if (negatives_.empty()) throw ValidationError("no negatives: no other-artist items" + where);
  }

  template <typename Rng>
  Triplet operator()(Rng& rng) const {
    Triplet t;
    t.a = anchors_[pick(rng, anchors_.size())];
    // Anchors are a subset of positives, so there are always size-1 choices for p.
    auto j = pick(rng, positives_.size() - 1);
    if (positives_[j] == t.a) j = positives_.size() - 1;
    t.p = positives_[j];
    t.n = negatives_[pick(rng, negatives_.size())];
    return t;
  }

 private:
  template <typename Rng>
  static std::size_t pick(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  std::vector<std::size_t> anchors_, positives_, negatives_;
};

inline std::vector<Triplet> sample_triplets(const Dataset& ds, std::size_t count,
                                            std::uint64_t seed, Split split = Split::train) {
  TripletSampler sampler(ds, split);
  std::mt19937_64 rng(seed);
  std::vector<Triplet> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler(rng));
  return out;
}

/// Mean triplet loss of `triplets` under `head`.
inline double mean_triplet_loss(const ProjectionHead& head, const Dataset& ds,
                                std::span<const Triplet> triplets, double margin) {
  if (triplets.empty()) throw UsageError("mean_triplet_loss: no triplets");
  double total = 0.0;
  for (const auto& t : triplets) {
    const auto za = head.apply(ds.vector(t.a));
    const auto zp = head.apply(ds.vector(t.p));
    const auto zn = head.apply(ds.vector(t.n));
    using S = std::span<const double>;
    total += triplet_loss(S(za), S(zp), S(zn), Metric{}, margin);
  }
  return total / static_cast<double>(triplets.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingLogEntry {
  std::size_t iteration = 0;
  double loss = 0.0;

  bool operator==(const TrainingLogEntry&) const = default;
};

using TrainingLog = std::vector<TrainingLogEntry>;

/// Mini-batch gradient descent on the mean batch triplet loss. Every step
/// draws `batch_size` fresh triplets from the train split. The log records the
/// batch loss measured before each update.
inline ProjectionHead train_projection(const Dataset& ds, const TrainConfig& cfg,
                                       TrainingLog* log = nullptr) {
  cfg.validate();
  if (ds.empty()) throw ValidationError("train_projection: empty dataset");
  TripletSampler sampler(ds, Split::train);
  ProjectionHead head = initial_head(ds.dim(), cfg);

  // Separate stream from initialization so that out_dim does not shift the triplets.
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<double> grad(head.weights().size());
  const double scale = 1.0 / static_cast<double>(cfg.batch_size);
  if (log) log->reserve(log->size() + cfg.iterations);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Triplet t = sampler(rng);
      batch_loss += detail::accumulate_triplet_gradient(head, ds.vector(t.a), ds.vector(t.p),
                                                        ds.vector(t.n), cfg.margin, scale, grad);
    }
    batch_loss *= scale;
    if (!std::isfinite(batch_loss))
      throw ValidationError("training diverged: non-finite loss at iteration " +
                            std::to_string(it));
    if (log) log->push_back({it, batch_loss});

    auto& w = head.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * grad[i];
    if (!head.all_finite())
      throw ValidationError("training diverged: non-finite weight after iteration " +
                            std::to_string(it));
  }
  return head;
}

/// Row-wise application of the head. Output rows are rounded to f32.
inline EmbeddingSet project(const ProjectionHead& head, const EmbeddingSet& emb) {
  if (emb.dim() != head.in_dim())
    throw UsageError("project: embedding dim " + std::to_string(emb.dim()) + " != head in_dim " +
                     std::to_string(head.in_dim()));
  std::vector<float> out;
  out.reserve(emb.count() * head.out_dim());
  for (std::size_t i = 0; i < emb.count(); ++i) {
    for (double v : head.apply(emb.row(i))) out.push_back(static_cast<float>(v));
  }
  return EmbeddingSet(head.out_dim(), std::move(out));
}

inline Dataset project(const ProjectionHead& head, const Dataset& ds) {
  return ds.with_embeddings(project(head, ds.embeddings()));
}

// ---------------------------------------------------------------------------
// Persistence: "PHED" | version u32 | in_dim u32 | out_dim u32 | out*in f32, LE
// ---------------------------------------------------------------------------

inline constexpr std::string_view kHeadMagic = "PHED";
inline constexpr std::uint32_t kHeadVersion = 1;

inline void save_head(const ProjectionHead& head, const std::string& path) {
  std::vector<char> out;
  out.insert(out.end(), kHeadMagic.begin(), kHeadMagic.end());
  detail::put_u32(out, kHeadVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(head.in_dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(head.out_dim()));
  for (double w : head.weights()) detail::put_f32(out, static_cast<float>(w));
  detail::write_file(path, out);
}

inline ProjectionHead load_head(const std::string& path) {
  auto bytes = detail::read_file(path);
  if (bytes.size() < 16) throw ValidationError("'" + path + "': truncated head header");
  if (!detail::has_magic(bytes, kHeadMagic))
    throw ValidationError("'" + path + "': bad magic, expected PHED");
  const auto version = detail::get_u32(bytes, 4);
  if (version != kHeadVersion)
    throw ValidationError("'" + path + "': unsupported head version " + std::to_string(version));
  const std::uint64_t in_dim = detail::get_u32(bytes, 8);
  const std::uint64_t out_dim = detail::get_u32(bytes, 12);
  if (in_dim == 0 || out_dim == 0) throw ValidationError("'" + path + "': zero head dimension");
  if (bytes.size() != 16 + in_dim * out_dim * 4)
    throw ValidationError("'" + path + "': size does not match in_dim=" + std::to_string(in_dim) +
                          " out_dim=" + std::to_string(out_dim));
  std::vector<double> w(in_dim * out_dim);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = detail::get_f32(bytes, 16 + 4 * i);
    if (!std::isfinite(w[i]))
      throw ValidationError("'" + path + "': non-finite weight at index " + std::to_string(i));
  }
  return ProjectionHead(in_dim, out_dim, std::move(w));
}

/// Returns the head with every weight rounded through f32, i.e. what
/// save_head followed by load_head produces.
inline ProjectionHead round_to_f32(ProjectionHead head) {
  for (auto& w : head.weights()) w = static_cast<double>(static_cast<float>(w));
  return head;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string training_log_csv(const TrainingLog& log) {
  std::string out = "iteration,loss\n";
  for (const auto& e : log) {
    out += std::to_string(e.iteration);
    out += ',';
    out += format_double(e.loss);
    out += '\n';
  }
  return out;
}

}  // namespace plagdet
