#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "plagdet/embedding_store.hpp"
#include "plagdet/types.hpp"

namespace plagdet::synthetic {

/// Isotropic Gaussian for one label, with per-split item counts.
struct LabelCluster {
  std::vector<double> mean;
  double sigma = 1.0;
  std::array<std::size_t, 3> counts{};  // indexed by Split
};

enum class Mode {
  separable,
  // van_gogh is drawn from two sub-means A/B split along `split_axis`;
  // plagiarized sits `plagiarized_offset` sigmas from A along `offset_axis`.
  split_cluster,
};

struct ClusterSpec {
  std::size_t dim = 0;
  std::array<LabelCluster, 3> clusters;  // indexed by Label
  Mode mode = Mode::separable;
  std::uint64_t seed = 0;

  // split_cluster geometry, in units of the respective cluster sigma
  double sub_separation = 8.0;
  double plagiarized_offset = 1.0;
  std::size_t split_axis = 1;
  std::size_t offset_axis = 2;

  LabelCluster& cluster(Label l) { return clusters[static_cast<std::size_t>(l)]; }
  const LabelCluster& cluster(Label l) const { return clusters[static_cast<std::size_t>(l)]; }

  void validate() const {
    if (dim == 0) throw ValidationError("cluster spec: dim must be positive");
    for (Label l : kAllLabels) {
      const auto& c = cluster(l);
      const std::string name(to_string(l));
      if (c.mean.size() != dim)
        throw ValidationError("cluster spec: mean of '" + name + "' has dim " +
                              std::to_string(c.mean.size()) + ", expected " + std::to_string(dim));
      if (!(c.sigma > 0.0) || !std::isfinite(c.sigma))
        throw ValidationError("cluster spec: sigma of '" + name + "' must be > 0");
      if (c.counts[static_cast<std::size_t>(Split::train)] == 0)
        throw ValidationError("cluster spec: '" + name + "' needs at least one train item");
    }
    if (mode == Mode::split_cluster) {
      if (split_axis >= dim || offset_axis >= dim)
        throw ValidationError("cluster spec: split/offset axis out of range");
      if (!(sub_separation > 0.0)) throw ValidationError("cluster spec: sub_separation must be > 0");
    }
  }
};

inline std::string item_id(Label l, Split s, std::size_t i) {
  static constexpr const char* kPrefix[] = {"vg", "other", "plag"};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%s_%04zu", kPrefix[static_cast<std::size_t>(l)],
                std::string(to_string(s)).c_str(), i);
  return buf;
}

/// Records are emitted label-major (van_gogh, other, plagiarized), then split
/// (train, val, test). In split_cluster mode van_gogh items alternate A, B, A, ...
inline Dataset generate(const ClusterSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto& vg = spec.cluster(Label::van_gogh);
  std::vector<double> sub_a = vg.mean, sub_b = vg.mean;
  std::vector<double> plag_mean = spec.cluster(Label::plagiarized).mean;
  if (spec.mode == Mode::split_cluster) {
    const double half = 0.5 * spec.sub_separation * vg.sigma;
    sub_a[spec.split_axis] += half;
    sub_b[spec.split_axis] -= half;
    plag_mean = sub_a;
    plag_mean[spec.offset_axis] +=
        spec.plagiarized_offset * spec.cluster(Label::plagiarized).sigma;
  }

  std::vector<ImageRecord> records;
  std::vector<float> values;
  for (Label l : kAllLabels) {
    const auto& c = spec.cluster(l);
    for (Split s : kAllSplits) {
      for (std::size_t i = 0; i < c.counts[static_cast<std::size_t>(s)]; ++i) {
        const std::vector<double>* mean = &c.mean;
        if (spec.mode == Mode::split_cluster) {
          if (l == Label::van_gogh) mean = (i % 2 == 0) ? &sub_a : &sub_b;
          if (l == Label::plagiarized) mean = &plag_mean;
        }
        for (std::size_t d = 0; d < spec.dim; ++d)
          values.push_back(static_cast<float>((*mean)[d] + c.sigma * gauss(rng)));
        auto id = item_id(l, s, i);
        records.push_back({id, l, s, "synthetic/" + id + ".png"});
      }
    }
  }
  return Dataset(std::move(records), EmbeddingSet(spec.dim, std::move(values)));
}

inline constexpr std::array<std::size_t, 3> kDefaultCounts = {300, 100, 100};

inline std::vector<double> axis_vector(std::size_t dim, std::size_t axis, double length) {
  std::vector<double> v(dim, 0.0);
  v[axis] = length;
  return v;
}

/// Three well-separated clusters: every pair of means is more than 10 sigma
/// apart, and plagiarized sits closer to van_gogh than to other.
inline ClusterSpec separable_spec(std::uint64_t seed, std::size_t dim = 16,
                                  std::array<std::size_t, 3> counts = kDefaultCounts) {
  ClusterSpec spec;
  spec.dim = dim;
  spec.mode = Mode::separable;
  spec.seed = seed;
  spec.cluster(Label::van_gogh) = {axis_vector(dim, 0, 10.0), 1.0, counts};
  spec.cluster(Label::other) = {axis_vector(dim, 1, 10.0), 1.0, counts};
  auto plag = axis_vector(dim, 0, 10.0);
  plag[2] = 10.5;
  spec.cluster(Label::plagiarized) = {plag, 1.0, counts};
  return spec;
}

/// Hard regime for raw cosine retrieval. All means share a 6 sigma offset
/// along axis 0; van_gogh splits 8 sigma along axis 1 and other sits 8 sigma
/// out along axis 3. In cosine terms the other-artist mean (cos 0.50 to A) is
/// closer to each van_gogh sub-mean than the opposite sub-mean is (cos 0.38),
/// so a van_gogh query sees the wrong artist before half of its positives.
inline ClusterSpec split_cluster_spec(std::uint64_t seed, std::size_t dim = 16,
                                      std::array<std::size_t, 3> counts = kDefaultCounts) {
  ClusterSpec spec;
  spec.dim = dim;
  spec.mode = Mode::split_cluster;
  spec.seed = seed;
  spec.sub_separation = 8.0;
  spec.plagiarized_offset = 1.0;
  spec.split_axis = 1;
  spec.offset_axis = 2;
  spec.cluster(Label::van_gogh) = {axis_vector(dim, 0, 6.0), 1.0, counts};
  auto other = axis_vector(dim, 0, 6.0);
  other[3] = 8.0;
  spec.cluster(Label::other) = {other, 1.0, counts};
  spec.cluster(Label::plagiarized) = {axis_vector(dim, 0, 6.0), 1.0, counts};
  return spec;
}

}  // namespace plagdet::synthetic
