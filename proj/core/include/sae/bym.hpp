#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sae/diagnostics.hpp"
#include "sae/direct_estimation.hpp"
#include "sae/metadata.hpp"
#include "sae/spatial_graph.hpp"

namespace sae {

inline double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Inverse-gamma (shape, rate) hyperpriors on the two variance components.
struct Hyperpriors {
  double iid_shape = 0.5;
  double iid_rate = 0.0005;
  double spatial_shape = 0.5;
  double spatial_rate = 0.0005;
};

/// Area-level model: Y_i ~ N(theta_i, V_i), theta_i = b0 + e_i + S_i,
/// e_i ~ N(0, s2_iid), S ~ ICAR(s2_spatial); flat prior on b0.
struct BymModelSpec {
  std::vector<DirectEstimate> estimates;  // in precision node order
  IcarPrecision precision;
  Hyperpriors priors;
  /// Hold a variance component at a known value instead of sampling it.
  std::optional<double> fixed_iid_variance;
  std::optional<double> fixed_spatial_variance;

  /// Aligns estimates to the graph's node order. Throws ConsistencyError
  /// when the region sets differ.
  static BymModelSpec build(std::vector<DirectEstimate> estimates, const AdjacencyGraph& graph,
                            Hyperpriors priors = {});

  void validate() const;
  std::size_t active_count() const;
};

struct McmcConfig {
  std::size_t chains = 4;
  std::size_t iterations = 10000;  // including burn-in
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 20200101;
  bool parallel = true;

  std::size_t retained_per_chain() const;
  void validate() const;
};

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

/// Mean, median, sd (n - 1 denominator) and linear-interpolation quantiles.
Summary summarize(std::span<const double> draws);

/// Applies expit draw by draw, then summarizes.
Summary summarize_prevalence(std::span<const double> theta_draws);

/// Retained draws of one chain. Matrices are draws x regions.
struct ChainDraws {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd spatial;
  std::vector<double> intercept;
  std::vector<double> iid_variance;
  std::vector<double> spatial_variance;
};

struct RegionPosterior {
  std::string region_id;
  Summary theta;
  Summary prevalence;
  ScalarDiagnostics diagnostics;
};

struct BymPosterior {
  std::vector<RegionPosterior> regions;  // precision node order
  std::vector<ChainDraws> chains;
  Summary intercept, iid_variance, spatial_variance;
  ScalarDiagnostics intercept_diagnostics, iid_diagnostics, spatial_diagnostics;
  bool converged = true;
  std::vector<std::string> convergence_issues;
  Hyperpriors priors;

  /// Pooled draws of theta for one region, chain after chain.
  std::vector<double> theta_draws(std::size_t region) const;
};

/// Gibbs sampler over (b0, e, S, s2_iid, s2_spatial). Chains use
/// independent streams derived from (seed, chain index), so results do not
/// depend on whether chains run concurrently.
BymPosterior gibbs_fit(const BymModelSpec& spec, const McmcConfig& config);

/// One row of the posterior CSV.
struct PosteriorRow {
  std::string region_id;
  double prev_mean = 0, prev_median = 0, prev_sd = 0, prev_q025 = 0, prev_q975 = 0;
  double theta_mean = 0, theta_sd = 0;
  double direct_p = 0, direct_se = 0;
  std::size_t n = 0;
  Degeneracy degenerate = Degeneracy::none;
  double rhat_theta = 0, ess_theta = 0;
};

std::vector<PosteriorRow> posterior_table(const BymModelSpec& spec, const BymPosterior& posterior);

void write_posterior_csv(std::ostream& out, const std::vector<PosteriorRow>& rows,
                         const BymPosterior& posterior, const ArtifactMetadata* meta = nullptr);
std::vector<PosteriorRow> read_posterior_csv(std::istream& in);

/// chain,iteration,intercept,iid_variance,spatial_variance
void write_trace_csv(std::ostream& out, const BymPosterior& posterior,
                     const ArtifactMetadata* meta = nullptr);

}  // namespace sae
