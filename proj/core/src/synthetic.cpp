#include "sae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "csv.hpp"
#include "sae/bym.hpp"
#include "sae/error.hpp"
#include "sae/spatial_graph.hpp"

namespace sae {

namespace {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kSurfaceStream = 0x51u;
constexpr std::uint32_t kSurveyStream = 0x52u;

// Solves f(x) = target for increasing f on a bracket wide enough for any
// probability not within 1e-12 of 0 or 1.
template <class F>
double solve_increasing(F f, double target) {
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto [lo, hi] = boost::math::tools::toms748_solve([&](double x) { return f(x) - target; }, -40.0,
                                                    40.0, tol, iters);
  return 0.5 * (lo + hi);
}

// E[expit(mu + sd * Z)], Z standard normal.
double logit_normal_mean(double mu, double sd) {
  if (sd == 0.0) return expit(mu);
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  auto integrand = [&](double z) { return expit(mu + sd * z) * inv_sqrt_2pi * std::exp(-0.5 * z * z); };
  return boost::math::quadrature::gauss<double, 30>::integrate(integrand, -9.0, 9.0);
}

std::vector<std::size_t> region_sizes(std::size_t count, std::pair<std::size_t, std::size_t> range,
                                      std::mt19937_64& rng) {
  const auto [lo, hi] = range;
  std::vector<double> logs(count);
  std::uniform_real_distribution<double> u(std::log(static_cast<double>(lo)),
                                           std::log(static_cast<double>(hi)));
  for (auto& l : logs) l = u(rng);
  const auto [mn, mx] = std::minmax_element(logs.begin(), logs.end());
  const double a = *mn, b = *mx;
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Affine in log space so the smallest and largest hit the range ends.
    double l = b > a ? std::log(static_cast<double>(lo)) +
                           (logs[i] - a) / (b - a) *
                               (std::log(static_cast<double>(hi)) - std::log(static_cast<double>(lo)))
                     : std::log(static_cast<double>(lo));
    out[i] = static_cast<std::size_t>(std::llround(std::exp(l)));
  }
  if (count >= 2) {
    out[static_cast<std::size_t>(mn - logs.begin())] = lo;
    out[static_cast<std::size_t>(mx - logs.begin())] = hi;
  }
  return out;
}

}  // namespace

void SyntheticTruth::validate() const {
  for (const auto& b : regions) {
    auto it = true_prevalence.find(b.region_id);
    if (it == true_prevalence.end())
      throw ConsistencyError(fmt::format("region '{}' has no true prevalence", b.region_id), b.region_id);
  }
  for (const auto& [id, p] : true_prevalence)
    if (!(p > 0.0 && p < 1.0))
      throw ValidationError(fmt::format("true prevalence of '{}' must lie strictly in (0,1), got {}", id, p));
  const auto& s = scenario;
  if (s.clusters_per_region < 1) throw ValidationError("clusters_per_region must be at least 1");
  if (s.households_per_cluster < 1) throw ValidationError("households_per_cluster must be at least 1");
  if (!(s.weight_dispersion >= 1.0)) throw ValidationError("weight_dispersion must be >= 1");
  if (!(s.cluster_sd >= 0.0)) throw ValidationError("cluster_sd must be non-negative");
  if (!(s.high_risk_fraction > 0.0 && s.high_risk_fraction < 1.0))
    throw ValidationError("high_risk_fraction must lie in (0,1)");
  if (s.region_size_range &&
      (s.region_size_range->first < 1 || s.region_size_range->first > s.region_size_range->second))
    throw ValidationError("region size range must satisfy 1 <= min <= max");
}

std::vector<RegionBoundary> make_grid_regions(std::size_t rows, std::size_t cols,
                                              const std::vector<std::size_t>& group_breaks) {
  if (rows < 1 || cols < 1) throw ValidationError("grid needs at least one row and column");
  for (std::size_t k = 0; k < group_breaks.size(); ++k) {
    if (group_breaks[k] == 0 || group_breaks[k] >= cols ||
        (k > 0 && group_breaks[k] <= group_breaks[k - 1]))
      throw ValidationError("group breaks must be increasing column indices inside the grid");
  }
  std::vector<RegionBoundary> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto group = std::upper_bound(group_breaks.begin(), group_breaks.end(), c) -
                         group_breaks.begin();
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      RegionBoundary b;
      b.region_id = fmt::format("R_{}_{}", r, c);
      b.country = fmt::format("C{}", group + 1);
      b.polygons.push_back({{{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}, {x, y}}}});
      out.push_back(std::move(b));
    }
  }
  return out;
}

std::map<std::string, double> spatial_truth(const std::vector<RegionBoundary>& regions,
                                            double base_logit, double spatial_sd,
                                            std::uint64_t seed) {
  if (!(spatial_sd >= 0.0)) throw ValidationError("spatial_sd must be non-negative");
  std::map<std::string, double> out;
  if (regions.size() < 2 || spatial_sd == 0.0) {
    for (const auto& b : regions) out[b.region_id] = expit(base_logit);
    return out;
  }
  const auto graph = build_adjacency(regions);
  const Eigen::MatrixXd q = icar_precision(graph).dense();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = 1e-9 * std::max(1.0, lambda.cwiseAbs().maxCoeff());

  auto rng = make_stream(seed, kSurfaceStream);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(graph.size());
  Eigen::VectorXd surface = Eigen::VectorXd::Zero(n);
  double trace_pinv = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double z = normal(rng);  // drawn for every direction to keep streams aligned
    if (lambda(k) <= cutoff) continue;
    surface += (z / std::sqrt(lambda(k))) * eig.eigenvectors().col(k);
    trace_pinv += 1.0 / lambda(k);
  }
  if (trace_pinv > 0.0) surface *= spatial_sd / std::sqrt(trace_pinv / static_cast<double>(n));

  for (std::size_t i = 0; i < graph.size(); ++i)
    out[graph.node_ids[i]] = expit(base_logit + surface(static_cast<Eigen::Index>(i)));
  return out;
}

SurveyDataset sample_survey(const SyntheticTruth& truth) {
  truth.validate();
  const auto& s = truth.scenario;
  auto rng = make_stream(truth.seed, kSurveyStream);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;

  std::vector<const RegionBoundary*> regions;
  for (const auto& b : truth.regions) regions.push_back(&b);
  std::sort(regions.begin(), regions.end(),
            [](const auto* a, const auto* b) { return a->region_id < b->region_id; });

  std::vector<std::size_t> sizes;
  if (s.region_size_range) sizes = region_sizes(regions.size(), *s.region_size_range, rng);

  // Inclusion of high-risk individuals is weight_dispersion times that of
  // low-risk ones; weights are the normalized inverses.
  const double h = s.high_risk_fraction, k = s.weight_dispersion;
  const double share_high = h * k / (h * k + 1.0 - h);
  const double w_low = h * k + 1.0 - h;
  const double w_high = w_low / k;

  SurveyDataset ds;
  ds.provenance = fmt::format("synthetic survey, seed {}", truth.seed);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& region = *regions[r];
    const double p = truth.true_prevalence.at(region.region_id);
    const double centre =
        solve_increasing([&](double mu) { return logit_normal_mean(mu, s.cluster_sd); }, p);

    std::vector<std::size_t> cluster_sizes;
    if (s.region_size_range) {
      const std::size_t total = sizes[r];
      const std::size_t m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(static_cast<double>(total) /
                                                   static_cast<double>(s.households_per_cluster))));
      for (std::size_t c = 0; c < m; ++c) cluster_sizes.push_back(total / m + (c < total % m ? 1 : 0));
    } else {
      cluster_sizes.assign(s.clusters_per_region, s.households_per_cluster);
    }

    for (std::size_t c = 0; c < cluster_sizes.size(); ++c) {
      const double pc = expit(centre + s.cluster_sd * normal(rng));
      const double low_logit = solve_increasing(
          [&](double l) { return h * expit(l + s.high_risk_log_odds_ratio) + (1.0 - h) * expit(l); },
          pc);
      const double p_low = expit(low_logit);
      const double p_high = expit(low_logit + s.high_risk_log_odds_ratio);
      const std::string cluster_id = fmt::format("{}_c{}", region.region_id, c + 1);
      for (std::size_t j = 0; j < cluster_sizes[c]; ++j) {
        const bool high = unit(rng) < share_high;
        const bool positive = unit(rng) < (high ? p_high : p_low);
        IndividualRecord rec;
        rec.region_id = region.region_id;
        rec.cluster_id = cluster_id;
        rec.weight = high ? w_high : w_low;
        rec.outcome = positive ? 1 : 0;
        ds.records.push_back(std::move(rec));
      }
    }
    ds.regions.push_back(region);
  }
  return ds;
}

// --- scenario files ---------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  auto x = csv::parse_int(v);
  if (!x || *x < 0) throw ValidationError(fmt::format("config: '{}' must be a non-negative integer", key));
  return static_cast<std::size_t>(*x);
}

double to_real(const std::string& key, const std::string& v) {
  auto x = csv::parse_double(v);
  if (!x || !std::isfinite(*x)) throw ValidationError(fmt::format("config: '{}' must be a number", key));
  return *x;
}

}  // namespace

ScenarioConfig parse_scenario(std::istream& in) {
  ScenarioConfig cfg;
  std::stringstream whole;
  whole << in.rdbuf();
  cfg.source = whole.str();

  std::optional<std::size_t> size_min, size_max;
  std::stringstream lines(cfg.source);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw RowError(fmt::format("config line {}: expected key = value", lineno), lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "rows") cfg.rows = to_count(key, value);
    else if (key == "cols") cfg.cols = to_count(key, value);
    else if (key == "group_breaks") {
      cfg.group_breaks.clear();
      std::stringstream ss(value);
      for (std::string tok; std::getline(ss, tok, ',');)
        if (!trim(tok).empty()) cfg.group_breaks.push_back(to_count(key, trim(tok)));
    } else if (key == "base_logit") cfg.base_logit = to_real(key, value);
    else if (key == "spatial_sd") cfg.spatial_sd = to_real(key, value);
    else if (key == "clusters_per_region") cfg.sampling.clusters_per_region = to_count(key, value);
    else if (key == "households_per_cluster") cfg.sampling.households_per_cluster = to_count(key, value);
    else if (key == "weight_dispersion") cfg.sampling.weight_dispersion = to_real(key, value);
    else if (key == "cluster_sd") cfg.sampling.cluster_sd = to_real(key, value);
    else if (key == "high_risk_fraction") cfg.sampling.high_risk_fraction = to_real(key, value);
    else if (key == "high_risk_log_odds_ratio") cfg.sampling.high_risk_log_odds_ratio = to_real(key, value);
    else if (key == "region_size_min") size_min = to_count(key, value);
    else if (key == "region_size_max") size_max = to_count(key, value);
    else if (key == "seed") {
      auto x = csv::parse_int(value);
      if (!x || *x < 0) throw ValidationError("config: 'seed' must be a non-negative integer");
      cfg.seed = static_cast<std::uint64_t>(*x);
    } else cfg.extra[key] = value;
  }
  if (size_min.has_value() != size_max.has_value())
    throw ValidationError("config: region_size_min and region_size_max go together");
  if (size_min) cfg.sampling.region_size_range = std::make_pair(*size_min, *size_max);
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
  return parse_scenario(in);
}

SyntheticTruth make_truth(const ScenarioConfig& cfg) {
  SyntheticTruth t;
  t.regions = make_grid_regions(cfg.rows, cfg.cols, cfg.group_breaks);
  t.true_prevalence = spatial_truth(t.regions, cfg.base_logit, cfg.spatial_sd, cfg.seed);
  t.scenario = cfg.sampling;
  t.seed = cfg.seed;
  t.validate();
  return t;
}

void write_truth_csv(std::ostream& out, const SyntheticTruth& truth, const ArtifactMetadata* meta) {
  if (meta) out << "# " << meta->line() << '\n';
  out << "region_id,true_prevalence\n";
  for (const auto& [id, p] : truth.true_prevalence) out << csv::escape(id) << ',' << fmt::format("{}", p) << '\n';
}

}  // namespace sae
