#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sae/bym.hpp"
#include "sae/data_model.hpp"
#include "sae/direct_estimation.hpp"
#include "sae/metadata.hpp"

namespace sae {

enum class BreakStrategy { quantile, equal_interval };
enum class ScaleScope { global, per_group };

/// Sequential yellow-orange-red ramp interpolated to `bins` colors.
std::vector<std::string> default_ramp(std::size_t bins);

struct ChoroplethSpec {
  std::string value_column = "value";
  BreakStrategy breaks = BreakStrategy::quantile;
  std::size_t bins = 5;
  ScaleScope scope = ScaleScope::global;
  std::vector<std::string> ramp = default_ramp(5);

  void validate() const;
};

/// bins + 1 ascending edges from min to max. Quantile edges use linear
/// interpolation between order statistics.
std::vector<double> compute_breaks(std::vector<double> values, BreakStrategy strategy,
                                   std::size_t bins);

/// Bin j covers (edges[j], edges[j+1]]; the first bin also takes edges[0].
std::size_t bin_index(double value, const std::vector<double>& edges);

/// Three significant figures, no exponent: 0.25 -> "0.25", 1942 -> "1940".
std::string format_sig3(double v);

struct MapPanel {
  std::string title;
  std::map<std::string, double> values;  // absent or NaN: hatched as missing
};

/// One SVG map per panel laid out side by side. Global scope shares one set
/// of breaks across every panel; per_group scope draws each country group as
/// its own zoomed map with breaks from that group's values only.
std::string render_choropleth(const std::vector<RegionBoundary>& boundaries,
                              const std::vector<MapPanel>& panels, const ChoroplethSpec& spec,
                              const std::string& title = "", const ArtifactMetadata* meta = nullptr);

std::string render_choropleth(const std::vector<RegionBoundary>& boundaries,
                              const std::map<std::string, double>& values,
                              const ChoroplethSpec& spec, const ArtifactMetadata* meta = nullptr);

/// Panel A: direct vs smoothed prevalence with identity line. Panel B:
/// direct SE vs posterior sd. Panel C: paired 95% intervals per region sorted
/// by direct estimate. Degenerate regions get a distinct marker and no
/// direct interval.
std::string render_comparison(const std::vector<DirectEstimate>& direct,
                              const std::vector<PosteriorRow>& posterior,
                              const ArtifactMetadata* meta = nullptr);

}  // namespace sae
