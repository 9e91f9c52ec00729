#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "muxdet/grid.hpp"

namespace muxdet {

// Per-channel classification metrics. Ratios with an empty denominator are
// reported as absent rather than 0.
struct ChannelMetrics {
  std::size_t v = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<Real> accuracy, sensitivity, specificity;
  std::optional<Real> auroc;
  std::optional<Real> ks;
};

// Labels: true = fake. Predicted fake iff score > threshold (ties -> real).
ChannelMetrics confusion(const std::vector<Real>& scores,
                         const std::vector<bool>& labels,
                         Real threshold = 0.0);

// Mann-Whitney form: P(random fake score > random real score), ties 1/2.
// Throws on single-class input.
Real auroc(const std::vector<Real>& scores, const std::vector<bool>& labels);

// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
Real ks_distance(const std::vector<Real>& real_scores,
                 const std::vector<Real>& fake_scores);

struct Aggregate {
  Real mean = 0.0, stddev = 0.0;  // population std across channels
};

struct ChannelReport {
  std::vector<ChannelMetrics> channels;
  Aggregate accuracy, sensitivity, specificity, ks;
  // AUROC stays per channel only; aggregating across independent
  // classifiers is not meaningful.
};

ChannelReport channel_report(
    const std::vector<std::vector<Real>>& scores_per_channel,
    const std::vector<std::vector<bool>>& labels_per_channel);

struct DistributionTables {
  std::vector<Real> bin_edges;                 // bins+1 edges
  std::vector<std::size_t> real_counts, fake_counts;
  std::vector<Real> cdf_points;                // pooled sample points, sorted
  std::vector<Real> real_cdf, fake_cdf;        // right-continuous ECDFs
};

DistributionTables export_distributions(const std::vector<Real>& real_scores,
                                        const std::vector<Real>& fake_scores,
                                        std::size_t bins);

}  // namespace muxdet
