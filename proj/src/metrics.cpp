#include "muxdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace muxdet {
namespace {

std::vector<Real> sorted(std::vector<Real> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Right-continuous ECDF of a sorted sample at x: #(s <= x)/n.
Real ecdf(const std::vector<Real>& sorted_sample, Real x) {
  const auto it = std::upper_bound(sorted_sample.begin(), sorted_sample.end(), x);
  return static_cast<Real>(it - sorted_sample.begin()) /
         static_cast<Real>(sorted_sample.size());
}

Aggregate aggregate(const std::vector<std::optional<Real>>& values) {
  std::vector<Real> present;
  for (const auto& v : values)
    if (v) present.push_back(*v);
  Aggregate a;
  if (present.empty()) return a;
  for (Real v : present) a.mean += v;
  a.mean /= static_cast<Real>(present.size());
  for (Real v : present) a.stddev += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(a.stddev / static_cast<Real>(present.size()));
  return a;
}

}  // namespace

ChannelMetrics confusion(const std::vector<Real>& scores,
                         const std::vector<bool>& labels, Real threshold) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("confusion: length mismatch");
  if (scores.empty()) throw std::invalid_argument("confusion: empty input");
  ChannelMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred_fake = scores[i] > threshold;
    if (labels[i])
      pred_fake ? ++m.tp : ++m.fn;
    else
      pred_fake ? ++m.fp : ++m.tn;
  }
  const std::size_t total = m.tp + m.tn + m.fp + m.fn;
  m.accuracy = static_cast<Real>(m.tp + m.tn) / static_cast<Real>(total);
  if (m.tp + m.fn > 0)
    m.sensitivity = static_cast<Real>(m.tp) / static_cast<Real>(m.tp + m.fn);
  if (m.tn + m.fp > 0)
    m.specificity = static_cast<Real>(m.tn) / static_cast<Real>(m.tn + m.fp);
  return m;
}

Real auroc(const std::vector<Real>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auroc: length mismatch");
  std::vector<Real> fake, real;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] ? fake : real).push_back(scores[i]);
  if (fake.empty() || real.empty())
    throw std::invalid_argument("auroc: needs both classes");
  std::sort(real.begin(), real.end());
  // For each fake score: #real strictly below + half of ties.
  Real wins = 0.0;
  for (Real f : fake) {
    const auto lo = std::lower_bound(real.begin(), real.end(), f);
    const auto hi = std::upper_bound(real.begin(), real.end(), f);
    wins += static_cast<Real>(lo - real.begin()) +
            0.5 * static_cast<Real>(hi - lo);
  }
  return wins / (static_cast<Real>(fake.size()) * static_cast<Real>(real.size()));
}

Real ks_distance(const std::vector<Real>& real_scores,
                 const std::vector<Real>& fake_scores) {
  if (real_scores.empty() || fake_scores.empty())
    throw std::invalid_argument("ks_distance: empty sample");
  const std::vector<Real> r = sorted(real_scores);
  const std::vector<Real> f = sorted(fake_scores);
  Real d = 0.0;
  for (const std::vector<Real>* pool : {&r, &f})
    for (Real x : *pool) d = std::max(d, std::abs(ecdf(r, x) - ecdf(f, x)));
  return d;
}

ChannelReport channel_report(
    const std::vector<std::vector<Real>>& scores_per_channel,
    const std::vector<std::vector<bool>>& labels_per_channel) {
  if (scores_per_channel.size() != labels_per_channel.size())
    throw std::invalid_argument("channel_report: channel count mismatch");
  ChannelReport rep;
  std::vector<std::optional<Real>> acc, sens, spec, ks;
  for (std::size_t v = 0; v < scores_per_channel.size(); ++v) {
    ChannelMetrics m =
        confusion(scores_per_channel[v], labels_per_channel[v]);
    m.v = v;
    std::vector<Real> real_s, fake_s;
    for (std::size_t i = 0; i < scores_per_channel[v].size(); ++i)
      (labels_per_channel[v][i] ? fake_s : real_s)
          .push_back(scores_per_channel[v][i]);
    if (!real_s.empty() && !fake_s.empty()) {
      m.auroc = auroc(scores_per_channel[v], labels_per_channel[v]);
      m.ks = ks_distance(real_s, fake_s);
    }
    acc.push_back(m.accuracy);
    sens.push_back(m.sensitivity);
    spec.push_back(m.specificity);
    ks.push_back(m.ks);
    rep.channels.push_back(std::move(m));
  }
  rep.accuracy = aggregate(acc);
  rep.sensitivity = aggregate(sens);
  rep.specificity = aggregate(spec);
  rep.ks = aggregate(ks);
  return rep;
}

DistributionTables export_distributions(const std::vector<Real>& real_scores,
                                        const std::vector<Real>& fake_scores,
                                        std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("export_distributions: bins >= 2");
  DistributionTables t;
  Real lo = 1e300, hi = -1e300;
  for (const std::vector<Real>* s : {&real_scores, &fake_scores})
    for (Real x : *s) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (real_scores.empty() && fake_scores.empty()) {
    lo = -1.0;
    hi = 1.0;
  }
  if (hi <= lo) hi = lo + 1.0;
  for (std::size_t i = 0; i <= bins; ++i)
    t.bin_edges.push_back(lo + (hi - lo) * static_cast<Real>(i) /
                                   static_cast<Real>(bins));
  t.real_counts.assign(bins, 0);
  t.fake_counts.assign(bins, 0);
  auto bin_of = [&](Real x) {
    auto b = static_cast<std::size_t>(
        std::floor((x - lo) / (hi - lo) * static_cast<Real>(bins)));
    return std::min(b, bins - 1);
  };
  for (Real x : real_scores) ++t.real_counts[bin_of(x)];
  for (Real x : fake_scores) ++t.fake_counts[bin_of(x)];

  const std::vector<Real> r = sorted(real_scores);
  const std::vector<Real> f = sorted(fake_scores);
  for (const std::vector<Real>* pool : {&r, &f})
    t.cdf_points.insert(t.cdf_points.end(), pool->begin(), pool->end());
  std::sort(t.cdf_points.begin(), t.cdf_points.end());
  for (Real x : t.cdf_points) {
    t.real_cdf.push_back(r.empty() ? 0.0 : ecdf(r, x));
    t.fake_cdf.push_back(f.empty() ? 0.0 : ecdf(f, x));
  }
  return t;
}

}  // namespace muxdet
