#include "sae/direct_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "csv.hpp"
#include "sae/error.hpp"

namespace sae {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_real(double v) { return std::isfinite(v) ? fmt::format("{}", v) : "NA"; }
}  // namespace

std::string_view to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::none: return "none";
    case Degeneracy::all_zero: return "all_zero";
    case Degeneracy::all_one: return "all_one";
    case Degeneracy::single_cluster: return "single_cluster";
  }
  return "none";
}

Degeneracy parse_degeneracy(std::string_view s) {
  if (s == "none") return Degeneracy::none;
  if (s == "all_zero") return Degeneracy::all_zero;
  if (s == "all_one") return Degeneracy::all_one;
  if (s == "single_cluster") return Degeneracy::single_cluster;
  throw ValidationError(fmt::format("unknown degeneracy flag '{}'", s));
}

double DirectEstimate::standard_error() const { return std::sqrt(var_p); }

double direct_prevalence(std::span<const IndividualRecord> records) {
  if (records.empty()) throw ValidationError("direct_prevalence: no records");
  double wy = 0.0, w = 0.0;
  for (const auto& r : records) {
    wy += r.weight * r.outcome;
    w += r.weight;
  }
  return wy / w;
}

std::optional<double> direct_variance(std::span<const IndividualRecord> records, double p_hat) {
  if (records.empty()) throw ValidationError("direct_variance: no records");

  // stratum -> cluster -> residual total z_c
  std::map<std::string, std::map<std::string, double>> strata;
  double total_weight = 0.0;
  for (const auto& r : records) {
    strata[r.stratum][r.cluster_id] += r.weight * (r.outcome - p_hat);
    total_weight += r.weight;
  }
  std::size_t m = 0;
  for (const auto& [_, clusters] : strata) m += clusters.size();
  if (m < 2) return std::nullopt;

  double acc = 0.0;
  if (strata.size() == 1) {
    const auto& clusters = strata.begin()->second;
    double ss = 0.0;
    for (const auto& [_, z] : clusters) ss += z * z;
    acc = static_cast<double>(m) / static_cast<double>(m - 1) * ss;
  } else {
    for (const auto& [_, clusters] : strata) {
      const auto mh = clusters.size();
      if (mh == 1) {
        // Lonely PSU: deviation from the overall cluster mean, which is zero.
        acc += clusters.begin()->second * clusters.begin()->second;
        continue;
      }
      double mean = 0.0;
      for (const auto& [_, z] : clusters) mean += z;
      mean /= static_cast<double>(mh);
      double ss = 0.0;
      for (const auto& [_, z] : clusters) ss += (z - mean) * (z - mean);
      acc += static_cast<double>(mh) / static_cast<double>(mh - 1) * ss;
    }
  }
  return acc / (total_weight * total_weight);
}

std::optional<LogitScale> logit_transform(double p_hat, double var_p) {
  if (!(p_hat > 0.0 && p_hat < 1.0)) return std::nullopt;
  const double q = p_hat * (1.0 - p_hat);
  return LogitScale{std::log(p_hat / (1.0 - p_hat)), var_p / (q * q)};
}

DirectEstimate estimate_region(std::string region_id, std::span<const IndividualRecord> records) {
  DirectEstimate e;
  e.region_id = std::move(region_id);
  e.n = records.size();
  e.p_hat = direct_prevalence(records);
  {
    std::map<std::pair<std::string_view, std::string_view>, int> clusters;
    for (const auto& r : records) clusters[{r.stratum, r.cluster_id}] = 1;
    e.m_clusters = clusters.size();
  }
  auto var = direct_variance(records, e.p_hat);
  e.var_p = var.value_or(kNaN);
  e.logit_y = e.var_logit = kNaN;

  if (e.p_hat <= 0.0) {
    e.degenerate = Degeneracy::all_zero;
  } else if (e.p_hat >= 1.0) {
    e.degenerate = Degeneracy::all_one;
  } else if (!var) {
    e.degenerate = Degeneracy::single_cluster;
  } else {
    auto t = logit_transform(e.p_hat, *var);
    e.logit_y = t->logit_y;
    e.var_logit = t->var_logit;
  }
  return e;
}

std::vector<DirectEstimate> estimate_all(const SurveyDataset& dataset) {
  std::map<std::string, std::vector<IndividualRecord>> by_region;
  for (const auto& b : dataset.regions) by_region[b.region_id];
  for (const auto& r : dataset.records) by_region[r.region_id].push_back(r);

  std::vector<DirectEstimate> out;
  out.reserve(by_region.size());
  for (const auto& [id, recs] : by_region) {
    if (recs.empty()) throw ValidationError(fmt::format("region '{}' has no records", id));
    out.push_back(estimate_region(id, recs));
  }
  return out;
}

void write_direct_csv(std::ostream& out, const std::vector<DirectEstimate>& estimates,
                      const ArtifactMetadata* meta) {
  if (meta) out << "# " << meta->line() << '\n';
  out << "region_id,n,m_clusters,p_hat,var_p,logit_y,var_logit,degenerate\n";
  for (const auto& e : estimates)
    out << csv::escape(e.region_id) << ',' << e.n << ',' << e.m_clusters << ','
        << format_real(e.p_hat) << ',' << format_real(e.var_p) << ',' << format_real(e.logit_y)
        << ',' << format_real(e.var_logit) << ',' << to_string(e.degenerate) << '\n';
}

std::vector<DirectEstimate> read_direct_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const auto c_id = t.require("region_id"), c_n = t.require("n"),
             c_m = t.require("m_clusters"), c_p = t.require("p_hat"), c_v = t.require("var_p"),
             c_y = t.require("logit_y"), c_vl = t.require("var_logit"),
             c_d = t.require("degenerate");
  auto real = [](const std::string& s, std::size_t row) {
    if (s == "NA") return kNaN;
    auto v = csv::parse_double(s);
    if (!v) throw RowError(fmt::format("row {}: '{}' is not a number", row, s), row);
    return *v;
  };
  std::vector<DirectEstimate> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    DirectEstimate e;
    e.region_id = row[c_id];
    auto n = csv::parse_int(row[c_n]);
    auto m = csv::parse_int(row[c_m]);
    if (!n || !m || *n < 1 || *m < 1)
      throw RowError(fmt::format("row {}: bad n or m_clusters", i + 1), i + 1);
    e.n = static_cast<std::size_t>(*n);
    e.m_clusters = static_cast<std::size_t>(*m);
    e.p_hat = real(row[c_p], i + 1);
    e.var_p = real(row[c_v], i + 1);
    e.logit_y = real(row[c_y], i + 1);
    e.var_logit = real(row[c_vl], i + 1);
    e.degenerate = parse_degeneracy(row[c_d]);
    if (e.usable() && !(std::isfinite(e.logit_y) && std::isfinite(e.var_logit)))
      throw RowError(fmt::format("row {}: non-degenerate estimate without logit values", i + 1),
                     i + 1);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.region_id < b.region_id; });
  return out;
}

}  // namespace sae
