#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sae/metadata.hpp"

namespace sae {

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Closed ring: front() == back(), at least four positions.
using Ring = std::vector<LonLat>;

/// Outer ring first, holes after.
struct Polygon {
  std::vector<Ring> rings;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct RegionBoundary {
  std::string region_id;
  std::string country;
  std::vector<Polygon> polygons;
  friend bool operator==(const RegionBoundary&, const RegionBoundary&) = default;
};

/// One surveyed person.
struct IndividualRecord {
  std::string region_id;  // empty until assigned when only a location is known
  std::string cluster_id;
  double weight = 1.0;
  int outcome = 0;
  std::string stratum;              // empty: unstratified
  std::optional<LonLat> location;   // cluster coordinates, when supplied
  friend bool operator==(const IndividualRecord&, const IndividualRecord&) = default;
};

/// Column names used to resolve the record fields. Stratum and coordinate
/// columns are optional; region_id may be absent when both coordinates exist.
struct RecordSchema {
  std::string region_id = "region_id";
  std::string cluster_id = "cluster_id";
  std::string weight = "weight";
  std::string outcome = "outcome";
  std::string stratum = "stratum";
  std::string longitude = "longitude";
  std::string latitude = "latitude";

  /// Applies `field=column` overrides, e.g. "region_id=REGCODE,weight=V005".
  static RecordSchema parse(std::string_view mapping);
};

struct SurveyDataset {
  std::vector<IndividualRecord> records;
  std::vector<RegionBoundary> regions;  // sorted by region_id
  std::string provenance;
};

// --- records CSV --------------------------------------------------------------

std::vector<IndividualRecord> parse_records(std::istream& in, const RecordSchema& schema = {});
std::vector<IndividualRecord> load_records(const std::filesystem::path& path,
                                           const RecordSchema& schema = {});
void write_records(std::ostream& out, const std::vector<IndividualRecord>& records,
                   const ArtifactMetadata* meta = nullptr);

/// Throws ConsistencyError naming the first cluster seen under two regions.
/// Records without a region_id are ignored.
void check_cluster_consistency(const std::vector<IndividualRecord>& records);

// --- boundaries GeoJSON ---------------------------------------------------------

std::vector<RegionBoundary> parse_boundaries(std::string_view geojson);
std::vector<RegionBoundary> load_boundaries(const std::filesystem::path& path);
void write_boundaries(std::ostream& out, const std::vector<RegionBoundary>& boundaries,
                      const ArtifactMetadata* meta = nullptr);

// --- linkage ----------------------------------------------------------------------

struct DropReport {
  std::size_t total = 0;
  std::size_t dropped = 0;
  double retained_fraction = 1.0;
  std::vector<std::string> regions_without_records;
};

/// Removes records whose region has no boundary, and boundaries that end up
/// with no records. Throws EmptyDatasetError when fewer than two regions or
/// no records remain.
std::pair<SurveyDataset, DropReport> drop_unlinked(std::vector<IndividualRecord> records,
                                                   std::vector<RegionBoundary> boundaries);

/// Checks every SurveyDataset invariant; throws on the first violation.
void validate(const SurveyDataset& dataset);

// --- point-in-polygon assignment ------------------------------------------------------

enum class PointLocation { outside, inside, boundary };

/// Even-odd ray casting over all rings of all polygons. Points within
/// `edge_tolerance` degrees of an edge report `boundary`.
PointLocation locate(const LonLat& p, const RegionBoundary& region, double edge_tolerance = 1e-9);

struct AssignmentReport {
  std::size_t assigned = 0;
  std::size_t outside = 0;
  std::vector<std::string> ambiguous_clusters;  // sorted, unique
};

/// Fills region_id for records that have a location but no region. Points on
/// a shared edge (or inside overlapping polygons) go to the lexicographically
/// smallest candidate and are flagged; points outside every polygon keep an
/// empty region_id so drop_unlinked removes them.
AssignmentReport assign_regions_by_location(std::vector<IndividualRecord>& records,
                                            const std::vector<RegionBoundary>& boundaries);

}  // namespace sae
