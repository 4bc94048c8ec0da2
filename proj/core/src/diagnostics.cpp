#include "sae/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "sae/error.hpp"

namespace sae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Chains = std::vector<std::vector<double>>;

// Each chain halved (middle draw dropped for odd lengths), all truncated to
// the shortest chain.
Chains split(const std::vector<ChainView>& chains) {
  if (chains.empty()) throw ValidationError("diagnostics: no chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  const std::size_t half = n / 2;
  if (half < 2) throw ValidationError("diagnostics: chains too short to split");
  Chains out;
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + (n - half), c.begin() + n);
  }
  return out;
}

double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x, double m) {
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// Classic potential scale reduction on already-split chains.
double psrf(const Chains& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    const double m = mean(c);
    means.push_back(m);
    w += sample_variance(c, m);
  }
  w /= static_cast<double>(chains.size());
  const double grand = mean(means);
  double b_over_n = 0.0;
  for (double m : means) b_over_n += (m - grand) * (m - grand);
  b_over_n /= static_cast<double>(means.size() - 1);
  if (w <= 0.0) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : kNaN;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

// Normal scores of pooled fractional ranks (average rank for ties).
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t k = 0; k < chains[c].size(); ++k)
      pooled.emplace_back(chains[c][k], c * chains[c].size() + k);
  std::sort(pooled.begin(), pooled.end());
  const double total = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  const boost::math::normal standard;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    const double score = boost::math::quantile(standard, (rank - 0.375) / (total + 0.25));
    for (std::size_t k = i; k < j; ++k) z[pooled[k].second] = score;
    i = j;
  }
  Chains out = chains;
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t k = 0; k < out[c].size(); ++k) out[c][k] = z[c * out[c].size() + k];
  return out;
}

double median_of(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const std::size_t mid = all.size() / 2;
  std::nth_element(all.begin(), all.begin() + mid, all.end());
  double hi = all[mid];
  if (all.size() % 2 == 1) return hi;
  double lo = *std::max_element(all.begin(), all.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

bool ScalarDiagnostics::converged() const {
  return !constant && std::isfinite(rhat) && rhat <= kRhatThreshold && std::isfinite(ess) &&
         ess >= kMinEffectiveSampleSize;
}

double split_rhat(const std::vector<ChainView>& chains) {
  const Chains halves = split(chains);
  const double bulk = psrf(rank_normalize(halves));

  const double med = median_of(halves);
  Chains folded = halves;
  for (auto& c : folded)
    for (auto& v : c) v = std::abs(v - med);
  const double tail = psrf(rank_normalize(folded));

  if (std::isnan(bulk)) return kNaN;
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

double effective_sample_size(const std::vector<ChainView>& chains) {
  const Chains halves = split(chains);
  const std::size_t m = halves.size();
  const std::size_t n = halves.front().size();

  std::vector<double> means(m), variances(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(halves[c]);
    variances[c] = sample_variance(halves[c], means[c]);
  }
  const double w = mean(variances);
  if (!(w > 0.0)) return kNaN;
  double var_plus = w * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
  if (m > 1) var_plus += sample_variance(means, mean(means));

  // Mean over chains of the biased autocovariance at `lag`.
  auto acov_mean = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = halves[c];
      double s = 0.0;
      for (std::size_t k = 0; k + lag < n; ++k) s += (x[k] - means[c]) * (x[k + lag] - means[c]);
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (w - acov_mean(lag)) / var_plus; };

  std::vector<double> r(n + 1, 0.0);
  r[0] = 1.0;
  double even = 1.0;
  double odd = rho(1);
  r[1] = odd;
  std::size_t t = 1;
  while (t + 5 < n && even + odd > 0.0) {
    even = rho(t + 1);
    odd = rho(t + 2);
    if (even + odd >= 0.0) {
      r[t + 1] = even;
      r[t + 2] = odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (even > 0.0 && max_t + 1 <= n) r[max_t + 1] = even;

  // Initial monotone sequence over the pair sums.
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (r[k + 1] + r[k + 2] > r[k - 1] + r[k]) {
      r[k + 1] = 0.5 * (r[k - 1] + r[k]);
      r[k + 2] = r[k + 1];
    }
  }

  double sum = 0.0;
  for (std::size_t k = 0; k <= max_t; ++k) sum += r[k];
  const double total = static_cast<double>(m * n);
  double tau = -1.0 + 2.0 * sum + (max_t + 1 <= n ? r[max_t + 1] : 0.0);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

ScalarDiagnostics diagnose(const std::vector<ChainView>& chains) {
  ScalarDiagnostics d;
  d.rhat = split_rhat(chains);
  d.ess = effective_sample_size(chains);
  d.constant = std::isnan(d.rhat);
  return d;
}

}  // namespace sae
