#include "sae/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "csv.hpp"
#include "json.hpp"
#include "sae/error.hpp"

namespace sae {

using nlohmann::json;

RecordSchema RecordSchema::parse(std::string_view mapping) {
  RecordSchema s;
  std::map<std::string, std::string*, std::less<>> fields{
      {"region_id", &s.region_id}, {"cluster_id", &s.cluster_id}, {"weight", &s.weight},
      {"outcome", &s.outcome},     {"stratum", &s.stratum},       {"longitude", &s.longitude},
      {"latitude", &s.latitude}};
  while (!mapping.empty()) {
    auto comma = mapping.find(',');
    std::string_view item = mapping.substr(0, comma);
    mapping = comma == std::string_view::npos ? std::string_view{} : mapping.substr(comma + 1);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError(fmt::format("schema entry '{}' is not field=column", item));
    auto it = fields.find(item.substr(0, eq));
    if (it == fields.end())
      throw ValidationError(fmt::format("schema entry names unknown field '{}'", item.substr(0, eq)));
    *it->second = std::string(item.substr(eq + 1));
  }
  return s;
}

// --- records ------------------------------------------------------------------------

std::vector<IndividualRecord> parse_records(std::istream& in, const RecordSchema& schema) {
  const csv::Table t = csv::read(in);

  const auto region_col = t.column(schema.region_id);
  const auto lon_col = t.column(schema.longitude);
  const auto lat_col = t.column(schema.latitude);
  const bool has_location = lon_col && lat_col;
  if (!region_col && !has_location) t.require(schema.region_id);
  const std::size_t cluster_col = t.require(schema.cluster_id);
  const std::size_t weight_col = t.require(schema.weight);
  const std::size_t outcome_col = t.require(schema.outcome);
  const auto stratum_col = t.column(schema.stratum);

  std::vector<IndividualRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t rowno = r + 1;
    IndividualRecord rec;
    if (region_col) rec.region_id = row[*region_col];
    rec.cluster_id = row[cluster_col];
    if (rec.cluster_id.empty())
      throw RowError(fmt::format("row {}: empty cluster_id", rowno), rowno);

    auto w = csv::parse_double(row[weight_col]);
    if (!w || !std::isfinite(*w) || *w <= 0.0)
      throw RowError(fmt::format("row {}: weight '{}' must be positive and finite", rowno,
                                 row[weight_col]),
                     rowno);
    rec.weight = *w;

    auto y = csv::parse_int(row[outcome_col]);
    if (!y || (*y != 0 && *y != 1))
      throw RowError(fmt::format("row {}: outcome '{}' must be 0 or 1", rowno, row[outcome_col]),
                     rowno);
    rec.outcome = static_cast<int>(*y);

    if (stratum_col) rec.stratum = row[*stratum_col];

    if (has_location && !(row[*lon_col].empty() && row[*lat_col].empty())) {
      auto lon = csv::parse_double(row[*lon_col]);
      auto lat = csv::parse_double(row[*lat_col]);
      if (!lon || !lat || !std::isfinite(*lon) || !std::isfinite(*lat))
        throw RowError(fmt::format("row {}: unreadable coordinates", rowno), rowno);
      rec.location = LonLat{*lon, *lat};
    }
    if (rec.region_id.empty() && !rec.location)
      throw RowError(fmt::format("row {}: neither region_id nor coordinates given", rowno), rowno);
    out.push_back(std::move(rec));
  }
  check_cluster_consistency(out);
  return out;
}

std::vector<IndividualRecord> load_records(const std::filesystem::path& path,
                                           const RecordSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open records file '{}'", path.string()));
  return parse_records(in, schema);
}

void check_cluster_consistency(const std::vector<IndividualRecord>& records) {
  std::unordered_map<std::string, const std::string*> owner;
  for (const auto& r : records) {
    if (r.region_id.empty()) continue;
    auto [it, fresh] = owner.try_emplace(r.cluster_id, &r.region_id);
    if (!fresh && *it->second != r.region_id)
      throw ConsistencyError(fmt::format("cluster '{}' appears under regions '{}' and '{}'",
                                         r.cluster_id, *it->second, r.region_id),
                             r.cluster_id);
  }
}

void write_records(std::ostream& out, const std::vector<IndividualRecord>& records,
                   const ArtifactMetadata* meta) {
  const bool stratified = std::any_of(records.begin(), records.end(),
                                      [](const auto& r) { return !r.stratum.empty(); });
  const bool located = std::any_of(records.begin(), records.end(),
                                   [](const auto& r) { return r.location.has_value(); });
  if (meta) out << "# " << meta->line() << '\n';
  out << "region_id,cluster_id,weight,outcome";
  if (stratified) out << ",stratum";
  if (located) out << ",longitude,latitude";
  out << '\n';
  for (const auto& r : records) {
    out << csv::escape(r.region_id) << ',' << csv::escape(r.cluster_id) << ','
        << fmt::format("{}", r.weight) << ',' << r.outcome;
    if (stratified) out << ',' << csv::escape(r.stratum);
    if (located) {
      if (r.location)
        out << fmt::format(",{},{}", r.location->lon, r.location->lat);
      else
        out << ",,";
    }
    out << '\n';
  }
}

// --- boundaries ---------------------------------------------------------------------

namespace {

std::string feature_label(const json& feature, std::size_t index) {
  if (feature.contains("id")) {
    const auto& id = feature["id"];
    return id.is_string() ? id.get<std::string>() : id.dump();
  }
  return fmt::format("#{}", index);
}

Ring parse_ring(const json& coords, const std::string& label) {
  if (!coords.is_array()) throw ValidationError(fmt::format("feature {}: ring is not an array", label));
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw ValidationError(fmt::format("feature {}: malformed coordinate", label));
    ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  if (ring.size() < 4)
    throw ValidationError(fmt::format("feature {}: ring has {} positions, need at least 4", label,
                                      ring.size()));
  if (!(ring.front() == ring.back()))
    throw ValidationError(fmt::format("feature {}: ring is not closed", label));
  return ring;
}

Polygon parse_polygon(const json& coords, const std::string& label) {
  if (!coords.is_array())
    throw ValidationError(fmt::format("feature {}: polygon coordinates are not an array", label));
  Polygon poly;
  for (const auto& ring : coords) poly.rings.push_back(parse_ring(ring, label));
  return poly;
}

json ring_json(const Ring& ring) {
  json a = json::array();
  for (const auto& p : ring) a.push_back({p.lon, p.lat});
  return a;
}

json polygon_json(const Polygon& poly) {
  json a = json::array();
  for (const auto& r : poly.rings) a.push_back(ring_json(r));
  return a;
}

}  // namespace

std::vector<RegionBoundary> parse_boundaries(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("boundaries: invalid JSON ({})", e.what()));
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw ValidationError("boundaries: expected a GeoJSON FeatureCollection");

  std::vector<RegionBoundary> out;
  std::unordered_set<std::string> seen;
  std::size_t index = 0;
  for (const auto& f : doc["features"]) {
    const std::string label = feature_label(f, index++);
    if (!f.is_object() || !f.contains("properties") || !f["properties"].is_object())
      throw SchemaError(fmt::format("feature {}: missing properties", label), "region_id");
    const auto& props = f["properties"];
    if (!props.contains("region_id") || !props["region_id"].is_string())
      throw SchemaError(fmt::format("feature {}: properties.region_id missing or not a string", label),
                        "region_id");

    RegionBoundary b;
    b.region_id = props["region_id"].get<std::string>();
    if (props.contains("country") && props["country"].is_string())
      b.country = props["country"].get<std::string>();
    if (!seen.insert(b.region_id).second)
      throw ConsistencyError(fmt::format("duplicate region_id '{}'", b.region_id), b.region_id);

    if (!f.contains("geometry") || !f["geometry"].is_object())
      throw ValidationError(fmt::format("feature {}: missing geometry", label));
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    const std::string where = fmt::format("{} ({})", label, b.region_id);
    if (type == "Polygon") {
      b.polygons.push_back(parse_polygon(g.at("coordinates"), where));
    } else if (type == "MultiPolygon") {
      const auto& c = g.at("coordinates");
      if (!c.is_array()) throw ValidationError(fmt::format("feature {}: bad MultiPolygon", where));
      for (const auto& p : c) b.polygons.push_back(parse_polygon(p, where));
    } else {
      throw ValidationError(fmt::format("feature {}: unsupported geometry type '{}'", where, type));
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<RegionBoundary> load_boundaries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open boundaries file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_boundaries(ss.str());
}

void write_boundaries(std::ostream& out, const std::vector<RegionBoundary>& boundaries,
                      const ArtifactMetadata* meta) {
  json doc;
  doc["type"] = "FeatureCollection";
  if (meta)
    doc["metadata"] = {{"tool_version", meta->version},
                       {"seed", meta->seed},
                       {"config_hash", meta->config_hash}};
  json features = json::array();
  for (const auto& b : boundaries) {
    json geometry;
    if (b.polygons.size() == 1) {
      geometry = {{"type", "Polygon"}, {"coordinates", polygon_json(b.polygons.front())}};
    } else {
      json multi = json::array();
      for (const auto& p : b.polygons) multi.push_back(polygon_json(p));
      geometry = {{"type", "MultiPolygon"}, {"coordinates", multi}};
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{"region_id", b.region_id}, {"country", b.country}}},
                        {"geometry", geometry}});
  }
  doc["features"] = std::move(features);
  out << doc.dump(1) << '\n';
}

// --- linkage ------------------------------------------------------------------------

std::pair<SurveyDataset, DropReport> drop_unlinked(std::vector<IndividualRecord> records,
                                                   std::vector<RegionBoundary> boundaries) {
  std::unordered_set<std::string> known;
  for (const auto& b : boundaries) known.insert(b.region_id);

  DropReport report;
  report.total = records.size();
  std::vector<IndividualRecord> kept;
  kept.reserve(records.size());
  std::unordered_set<std::string> used;
  for (auto& r : records) {
    if (r.region_id.empty() || !known.contains(r.region_id)) {
      ++report.dropped;
      continue;
    }
    used.insert(r.region_id);
    kept.push_back(std::move(r));
  }
  if (kept.empty()) throw EmptyDatasetError("no record links to a region boundary; dataset is empty");
  report.retained_fraction =
      static_cast<double>(kept.size()) / static_cast<double>(report.total);

  SurveyDataset ds;
  for (auto& b : boundaries) {
    if (used.contains(b.region_id))
      ds.regions.push_back(std::move(b));
    else
      report.regions_without_records.push_back(b.region_id);
  }
  std::sort(ds.regions.begin(), ds.regions.end(),
            [](const auto& a, const auto& b) { return a.region_id < b.region_id; });
  std::sort(report.regions_without_records.begin(), report.regions_without_records.end());
  if (ds.regions.size() < 2)
    throw EmptyDatasetError(
        fmt::format("only {} region(s) retain records; at least 2 are required", ds.regions.size()));
  ds.records = std::move(kept);
  return {std::move(ds), std::move(report)};
}

void validate(const SurveyDataset& ds) {
  if (ds.regions.size() < 2) throw EmptyDatasetError("dataset needs at least 2 regions");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& b : ds.regions) {
    if (!counts.emplace(b.region_id, 0).second)
      throw ConsistencyError(fmt::format("duplicate region_id '{}'", b.region_id), b.region_id);
    for (const auto& p : b.polygons)
      for (const auto& ring : p.rings)
        if (ring.size() < 4 || !(ring.front() == ring.back()))
          throw ValidationError(fmt::format("region '{}': ring not closed", b.region_id));
  }
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (!std::isfinite(r.weight) || r.weight <= 0.0)
      throw RowError(fmt::format("row {}: weight must be positive and finite", i + 1), i + 1);
    if (r.outcome != 0 && r.outcome != 1)
      throw RowError(fmt::format("row {}: outcome must be 0 or 1", i + 1), i + 1);
    auto it = counts.find(r.region_id);
    if (it == counts.end())
      throw ConsistencyError(fmt::format("row {}: region '{}' has no boundary", i + 1, r.region_id),
                             r.region_id);
    ++it->second;
  }
  for (const auto& [id, n] : counts)
    if (n == 0) throw ConsistencyError(fmt::format("region '{}' has no records", id), id);
  check_cluster_consistency(ds.records);
}

// --- point in polygon -----------------------------------------------------------------

namespace {

double segment_distance(const LonLat& p, const LonLat& a, const LonLat& b) {
  const double dx = b.lon - a.lon, dy = b.lat - a.lat;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.lon - (a.lon + t * dx), p.lat - (a.lat + t * dy));
}

}  // namespace

PointLocation locate(const LonLat& p, const RegionBoundary& region, double edge_tolerance) {
  bool inside = false;
  for (const auto& poly : region.polygons) {
    bool odd = false;
    for (const auto& ring : poly.rings) {
      for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const LonLat& a = ring[j];
        const LonLat& b = ring[i];
        if (segment_distance(p, a, b) <= edge_tolerance) return PointLocation::boundary;
        if ((b.lat > p.lat) != (a.lat > p.lat)) {
          const double x = b.lon + (p.lat - b.lat) * (a.lon - b.lon) / (a.lat - b.lat);
          if (p.lon < x) odd = !odd;
        }
      }
    }
    inside = inside || odd;
  }
  return inside ? PointLocation::inside : PointLocation::outside;
}

AssignmentReport assign_regions_by_location(std::vector<IndividualRecord>& records,
                                            const std::vector<RegionBoundary>& boundaries) {
  std::vector<const RegionBoundary*> order;
  for (const auto& b : boundaries) order.push_back(&b);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->region_id < b->region_id; });

  AssignmentReport report;
  std::set<std::string> ambiguous;
  for (auto& r : records) {
    if (!r.region_id.empty() || !r.location) continue;
    const std::string* first = nullptr;
    int candidates = 0;
    bool on_edge = false;
    for (const auto* b : order) {
      const auto where = locate(*r.location, *b);
      if (where == PointLocation::outside) continue;
      on_edge = on_edge || where == PointLocation::boundary;
      if (!first) first = &b->region_id;
      ++candidates;
    }
    if (!first) {
      ++report.outside;
      continue;
    }
    r.region_id = *first;
    ++report.assigned;
    if (on_edge || candidates > 1) ambiguous.insert(r.cluster_id);
  }
  report.ambiguous_clusters.assign(ambiguous.begin(), ambiguous.end());
  check_cluster_consistency(records);
  return report;
}

}  // namespace sae
