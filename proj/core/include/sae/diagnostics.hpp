#pragma once

#include <span>
#include <string>
#include <vector>

namespace sae {

inline constexpr double kRhatThreshold = 1.05;
inline constexpr double kMinEffectiveSampleSize = 100.0;

/// Convergence summary for one scalar quantity across chains.
struct ScalarDiagnostics {
  double rhat = 1.0;  // NaN when every draw is identical
  double ess = 0.0;   // NaN when within-chain variance is zero
  bool constant = false;

  bool converged() const;
};

using ChainView = std::span<const double>;

/// Rank-normalized split R-hat: the larger of the bulk and folded
/// statistics. +inf when chains are internally constant but disagree, NaN
/// when every draw is identical.
double split_rhat(const std::vector<ChainView>& chains);

/// Effective sample size of the mean over split chains, with the
/// autocorrelation sum truncated at the first negative pair of lags and
/// forced monotone.
double effective_sample_size(const std::vector<ChainView>& chains);

ScalarDiagnostics diagnose(const std::vector<ChainView>& chains);

}  // namespace sae
