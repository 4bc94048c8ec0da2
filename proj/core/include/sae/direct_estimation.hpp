#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sae/data_model.hpp"
#include "sae/metadata.hpp"

namespace sae {

enum class Degeneracy { none, all_zero, all_one, single_cluster };

std::string_view to_string(Degeneracy d);
Degeneracy parse_degeneracy(std::string_view s);

/// Design-based estimate for one region. Degenerate regions carry NaN in the
/// fields that cannot be computed (var_p for single_cluster, logit_y and
/// var_logit for every degeneracy).
struct DirectEstimate {
  std::string region_id;
  std::size_t n = 0;
  std::size_t m_clusters = 0;
  double p_hat = 0.0;
  double var_p = 0.0;
  double logit_y = 0.0;
  double var_logit = 0.0;
  Degeneracy degenerate = Degeneracy::none;

  /// Contributes a likelihood term to the smoothing model.
  bool usable() const noexcept { return degenerate == Degeneracy::none; }
  double standard_error() const;
};

/// Hajek ratio sum(w*y) / sum(w). Throws ValidationError on empty input.
double direct_prevalence(std::span<const IndividualRecord> records);

/// Ultimate-cluster linearized variance of the Hajek ratio. Clusters are
/// grouped by cluster_id (within stratum when strata are present). Returns
/// nullopt when the region has a single cluster.
std::optional<double> direct_variance(std::span<const IndividualRecord> records, double p_hat);

struct LogitScale {
  double logit_y = 0.0;
  double var_logit = 0.0;
};

/// Delta-method transform. Returns nullopt for p_hat outside (0, 1).
std::optional<LogitScale> logit_transform(double p_hat, double var_p);

DirectEstimate estimate_region(std::string region_id, std::span<const IndividualRecord> records);

/// One estimate per region, sorted by region_id. Degeneracies are flagged,
/// never thrown.
std::vector<DirectEstimate> estimate_all(const SurveyDataset& dataset);

/// `region_id,n,m_clusters,p_hat,var_p,logit_y,var_logit,degenerate`; NaN as NA.
void write_direct_csv(std::ostream& out, const std::vector<DirectEstimate>& estimates,
                      const ArtifactMetadata* meta = nullptr);
std::vector<DirectEstimate> read_direct_csv(std::istream& in);

}  // namespace sae
