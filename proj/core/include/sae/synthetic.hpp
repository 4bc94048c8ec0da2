#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sae/data_model.hpp"
#include "sae/metadata.hpp"

namespace sae {

/// Multistage sampling plan used by the survey generator.
struct SamplingScenario {
  std::size_t clusters_per_region = 20;
  std::size_t households_per_cluster = 25;
  /// Oversampling factor of the high-risk stratum within each cluster; 1
  /// gives equal inclusion probabilities.
  double weight_dispersion = 1.0;
  double cluster_sd = 0.3;  // logit scale
  double high_risk_fraction = 0.2;
  double high_risk_log_odds_ratio = 1.5;
  /// When set, each region's sample size is drawn log-uniformly in this
  /// range (the extremes are always attained) and clusters_per_region is
  /// derived from households_per_cluster.
  std::optional<std::pair<std::size_t, std::size_t>> region_size_range;
};

struct SyntheticTruth {
  std::vector<RegionBoundary> regions;
  std::map<std::string, double> true_prevalence;
  SamplingScenario scenario;
  std::uint64_t seed = 0;

  void validate() const;
};

/// rows x cols unit squares with ids "R_<row>_<col>". `group_breaks` lists
/// the 0-based columns where a new country group starts; groups are
/// labelled "C1", "C2", ...
std::vector<RegionBoundary> make_grid_regions(std::size_t rows, std::size_t cols,
                                              const std::vector<std::size_t>& group_breaks = {});

/// Zero-mean ICAR surface on the rook graph of `regions`, scaled so its
/// average marginal variance is spatial_sd^2; prevalence =
/// expit(base_logit + surface).
std::map<std::string, double> spatial_truth(const std::vector<RegionBoundary>& regions,
                                            double base_logit, double spatial_sd,
                                            std::uint64_t seed);

/// Draws clusters and individuals for every region of the truth. Records are
/// ordered by region, then cluster; weights are inverse inclusion
/// probabilities normalized to mean one.
SurveyDataset sample_survey(const SyntheticTruth& truth);

/// Key-value scenario file (`key = value`, '#' comments).
struct ScenarioConfig {
  std::size_t rows = 5;
  std::size_t cols = 9;
  std::vector<std::size_t> group_breaks;
  double base_logit = -2.2;
  double spatial_sd = 0.5;
  SamplingScenario sampling;
  std::uint64_t seed = 1;
  /// Keys this module does not own, left for the caller to interpret.
  std::map<std::string, std::string> extra;
  /// Exact text the config was parsed from (for hashing).
  std::string source;
};

ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Grid regions + spatial truth + sampling plan from a scenario.
SyntheticTruth make_truth(const ScenarioConfig& config);

/// `region_id,true_prevalence`
void write_truth_csv(std::ostream& out, const SyntheticTruth& truth,
                     const ArtifactMetadata* meta = nullptr);

}  // namespace sae
