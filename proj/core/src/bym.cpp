#include "sae/bym.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "csv.hpp"
#include "sae/error.hpp"

namespace sae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sampling variances at or below this are treated as this value so the
// likelihood precision stays finite.
constexpr double kMinSamplingVariance = 1e-10;

std::string real(double v) { return std::isfinite(v) ? fmt::format("{:.8g}", v) : "NA"; }

}  // namespace

// --- spec and config ------------------------------------------------------------------

BymModelSpec BymModelSpec::build(std::vector<DirectEstimate> estimates,
                                 const AdjacencyGraph& graph, Hyperpriors priors) {
  std::map<std::string, DirectEstimate> by_id;
  for (auto& e : estimates) {
    const std::string id = e.region_id;
    if (!by_id.emplace(id, std::move(e)).second)
      throw ConsistencyError(fmt::format("duplicate estimate for region '{}'", id), id);
  }
  BymModelSpec spec;
  spec.priors = priors;
  spec.precision = icar_precision(graph);
  for (const auto& id : graph.node_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ConsistencyError(fmt::format("graph region '{}' has no direct estimate", id), id);
    spec.estimates.push_back(std::move(it->second));
    by_id.erase(it);
  }
  if (!by_id.empty())
    throw ConsistencyError(
        fmt::format("direct estimate for region '{}' has no graph node", by_id.begin()->first),
        by_id.begin()->first);
  spec.validate();
  return spec;
}

void BymModelSpec::validate() const {
  if (estimates.size() != precision.dimension)
    throw ValidationError("model: estimates and precision differ in dimension");
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(priors.iid_shape) || !positive(priors.iid_rate) ||
      !positive(priors.spatial_shape) || !positive(priors.spatial_rate))
    throw ValidationError("model: hyperprior parameters must be positive");
  if (fixed_iid_variance && !positive(*fixed_iid_variance))
    throw ValidationError("model: fixed iid variance must be positive");
  if (fixed_spatial_variance && !positive(*fixed_spatial_variance))
    throw ValidationError("model: fixed spatial variance must be positive");
  if (active_count() == 0) throw ValidationError("model: every region is degenerate");
  if (active_count() < 2) throw ValidationError("model: need at least 2 non-degenerate regions");
}

std::size_t BymModelSpec::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(estimates.begin(), estimates.end(), [](const auto& e) { return e.usable(); }));
}

std::size_t McmcConfig::retained_per_chain() const {
  if (iterations <= burn_in || thin == 0) return 0;
  return (iterations - burn_in + thin - 1) / thin;
}

void McmcConfig::validate() const {
  if (chains < 2) throw ValidationError("mcmc: at least 2 chains are required");
  if (thin < 1) throw ValidationError("mcmc: thin must be at least 1");
  if (burn_in >= iterations) throw ValidationError("mcmc: burn-in must be below iterations");
  if (retained_per_chain() < 500)
    throw ValidationError(fmt::format("mcmc: {} retained draws per chain, need at least 500",
                                      retained_per_chain()));
}

// --- summaries ------------------------------------------------------------------------

Summary summarize(std::span<const double> draws) {
  Summary s;
  if (draws.empty()) return {kNaN, kNaN, kNaN, kNaN, kNaN};
  const double origin = draws.front();
  double shift = 0.0;
  for (double d : draws) shift += d - origin;
  s.mean = origin + shift / static_cast<double>(draws.size());
  double ss = 0.0;
  for (double d : draws) ss += (d - s.mean) * (d - s.mean);
  s.sd = draws.size() > 1 ? std::sqrt(ss / static_cast<double>(draws.size() - 1)) : 0.0;

  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
  };
  s.median = quantile(0.5);
  s.q025 = quantile(0.025);
  s.q975 = quantile(0.975);
  return s;
}

Summary summarize_prevalence(std::span<const double> theta_draws) {
  std::vector<double> p(theta_draws.size());
  std::transform(theta_draws.begin(), theta_draws.end(), p.begin(), expit);
  return summarize(p);
}

std::vector<double> BymPosterior::theta_draws(std::size_t region) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto col = c.theta.col(static_cast<Eigen::Index>(region));
    out.insert(out.end(), col.data(), col.data() + col.size());
  }
  return out;
}

// --- sampler --------------------------------------------------------------------------

namespace {

struct SpatialBlock {
  std::vector<std::size_t> nodes;
  Eigen::MatrixXd structure;  // unit-scale ICAR precision restricted to the block
};

class ChainSampler {
 public:
  ChainSampler(const BymModelSpec& spec, const McmcConfig& config, std::size_t chain)
      : spec_(spec), config_(config), chain_(chain), n_(spec.estimates.size()) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x5aeu};
    rng_.seed(seq);

    active_.resize(n_);
    y_.assign(n_, 0.0);
    inv_v_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& e = spec.estimates[i];
      active_[i] = e.usable();
      if (!active_[i]) continue;
      y_[i] = e.logit_y;
      inv_v_[i] = 1.0 / std::max(e.var_logit, kMinSamplingVariance);
      ++n_active_;
    }

    const auto& q = spec.precision;
    std::vector<std::vector<std::size_t>> members(q.component_count);
    for (std::size_t i = 0; i < n_; ++i) members[q.component[i]].push_back(i);
    const Eigen::MatrixXd full = q.dense();
    for (auto& nodes : members) {
      if (nodes.size() < 2) continue;
      SpatialBlock b;
      const auto k = static_cast<Eigen::Index>(nodes.size());
      b.structure.resize(k, k);
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) b.structure(r, c) = full(nodes[r], nodes[c]);
      b.nodes = std::move(nodes);
      blocks_.push_back(std::move(b));
    }
  }

  ChainDraws run() {
    initialize();
    const std::size_t kept = config_.retained_per_chain();
    ChainDraws d;
    d.theta.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(n_));
    d.spatial.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(n_));
    d.intercept.reserve(kept);
    d.iid_variance.reserve(kept);
    d.spatial_variance.reserve(kept);

    std::size_t row = 0;
    for (std::size_t t = 0; t < config_.iterations; ++t) {
      sweep();
      check_finite(t);
      if (t < config_.burn_in || (t - config_.burn_in) % config_.thin != 0) continue;
      const auto r = static_cast<Eigen::Index>(row++);
      for (std::size_t i = 0; i < n_; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        d.theta(r, c) = intercept_ + iid_[i] + spatial_[i];
        d.spatial(r, c) = spatial_[i];
      }
      d.intercept.push_back(intercept_);
      d.iid_variance.push_back(iid_var_);
      d.spatial_variance.push_back(spatial_var_);
    }
    return d;
  }

 private:
  double normal() { return std_normal_(rng_); }

  double inverse_gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return 1.0 / g(rng_);
  }

  void initialize() {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      if (active_[i]) mean += y_[i];
    mean /= static_cast<double>(n_active_);
    double ss = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      if (active_[i]) ss += (y_[i] - mean) * (y_[i] - mean);
    const double var_y = ss / static_cast<double>(std::max<std::size_t>(n_active_ - 1, 1));

    // Over-dispersed start: theta_i = Y_i +/- 2 sd(Y), alternating by chain.
    const double offset = (chain_ % 2 == 0 ? 2.0 : -2.0) * std::sqrt(var_y);
    intercept_ = mean + offset;
    iid_.assign(n_, 0.0);
    spatial_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      if (active_[i]) iid_[i] = y_[i] - mean;

    auto start = [&](double shape, double rate) {
      if (shape > 1.0) return rate / (shape - 1.0);
      return std::max(0.5 * var_y, 1e-3);
    };
    const auto& p = spec_.priors;
    iid_var_ = spec_.fixed_iid_variance.value_or(start(p.iid_shape, p.iid_rate));
    spatial_var_ = spec_.fixed_spatial_variance.value_or(start(p.spatial_shape, p.spatial_rate));
  }

  void sweep() {
    // (1) intercept, flat prior
    {
      double prec = 0.0, num = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (!active_[i]) continue;
        prec += inv_v_[i];
        num += (y_[i] - iid_[i] - spatial_[i]) * inv_v_[i];
      }
      intercept_ = num / prec + normal() / std::sqrt(prec);
    }

    // (2) unstructured effects
    for (std::size_t i = 0; i < n_; ++i) {
      if (!active_[i]) {
        iid_[i] = std::sqrt(iid_var_) * normal();
        continue;
      }
      const double prec = inv_v_[i] + 1.0 / iid_var_;
      const double m = (y_[i] - intercept_ - spatial_[i]) * inv_v_[i] / prec;
      iid_[i] = m + normal() / std::sqrt(prec);
    }

    // (3) spatial effects, one exact constrained draw per connected block
    for (const auto& b : blocks_) draw_spatial_block(b);

    // (4) iid variance
    if (!spec_.fixed_iid_variance) {
      double ss = 0.0;
      for (std::size_t i = 0; i < n_; ++i)
        if (active_[i]) ss += iid_[i] * iid_[i];
      iid_var_ = inverse_gamma(spec_.priors.iid_shape + 0.5 * static_cast<double>(n_active_),
                               spec_.priors.iid_rate + 0.5 * ss);
    }

    // (5) spatial variance
    if (!spec_.fixed_spatial_variance && spec_.precision.rank > 0) {
      const double qf = quadratic_form(spec_.precision, spatial_);
      spatial_var_ =
          inverse_gamma(spec_.priors.spatial_shape + 0.5 * static_cast<double>(spec_.precision.rank),
                        spec_.priors.spatial_rate + 0.5 * qf);
    }
  }

  // S_block | rest is Gaussian with precision Q/s2 + diag(1/V) restricted to
  // sum(S_block) = 0. Adding c*11' leaves the density on that plane unchanged
  // and makes the precision positive definite; the draw is then conditioned
  // onto the plane by kriging.
  void draw_spatial_block(const SpatialBlock& b) {
    const auto k = static_cast<Eigen::Index>(b.nodes.size());
    Eigen::MatrixXd prec = b.structure / spatial_var_;
    Eigen::VectorXd rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const std::size_t i = b.nodes[r];
      if (active_[i]) {
        prec(r, r) += inv_v_[i];
        rhs(r) = (y_[i] - intercept_ - iid_[i]) * inv_v_[i];
      } else {
        rhs(r) = 0.0;
      }
    }
    prec.array() += prec.diagonal().mean();

    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success)
      throw NumericalError("spatial block precision is not positive definite", iteration_);
    Eigen::VectorXd z(k);
    for (Eigen::Index r = 0; r < k; ++r) z(r) = normal();
    Eigen::VectorXd x = llt.solve(rhs) + llt.matrixU().solve(z);
    const Eigen::VectorXd v = llt.solve(Eigen::VectorXd::Ones(k));
    x -= v * (x.sum() / v.sum());
    x.array() -= x.mean();
    for (Eigen::Index r = 0; r < k; ++r) spatial_[b.nodes[r]] = x(r);
  }

  void check_finite(std::size_t t) {
    iteration_ = static_cast<long>(t);
    double acc = intercept_ + iid_var_ + spatial_var_;
    for (std::size_t i = 0; i < n_; ++i) acc += iid_[i] + spatial_[i];
    if (!std::isfinite(acc) || !(iid_var_ > 0.0) || !(spatial_var_ > 0.0))
      throw NumericalError(
          fmt::format("chain {}: non-finite state at iteration {}", chain_, t), iteration_);
  }

  const BymModelSpec& spec_;
  const McmcConfig& config_;
  std::size_t chain_;
  std::size_t n_;
  std::size_t n_active_ = 0;
  std::vector<bool> active_;
  std::vector<double> y_, inv_v_;
  std::vector<SpatialBlock> blocks_;

  std::mt19937_64 rng_;
  std::normal_distribution<double> std_normal_;

  double intercept_ = 0.0;
  std::vector<double> iid_, spatial_;
  double iid_var_ = 1.0;
  double spatial_var_ = 1.0;
  long iteration_ = 0;
};

ScalarDiagnostics diagnose_vectors(const std::vector<ChainDraws>& chains,
                                   std::vector<double> ChainDraws::*member) {
  std::vector<ChainView> views;
  for (const auto& c : chains) views.emplace_back((c.*member).data(), (c.*member).size());
  return diagnose(views);
}

Summary summarize_vectors(const std::vector<ChainDraws>& chains,
                          std::vector<double> ChainDraws::*member) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), (c.*member).begin(), (c.*member).end());
  return summarize(all);
}

}  // namespace

BymPosterior gibbs_fit(const BymModelSpec& spec, const McmcConfig& config) {
  spec.validate();
  config.validate();

  BymPosterior post;
  post.priors = spec.priors;
  post.chains.resize(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto run_chain = [&](std::size_t c) {
    try {
      ChainSampler sampler(spec, config, c);
      post.chains[c] = sampler.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel) {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < config.chains; ++c) workers.emplace_back(run_chain, c);
  } else {
    for (std::size_t c = 0; c < config.chains; ++c) run_chain(c);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::size_t n = spec.estimates.size();
  for (std::size_t i = 0; i < n; ++i) {
    RegionPosterior r;
    r.region_id = spec.estimates[i].region_id;
    const auto draws = post.theta_draws(i);
    r.theta = summarize(draws);
    r.prevalence = summarize_prevalence(draws);
    std::vector<ChainView> views;
    for (const auto& c : post.chains) {
      const auto col = c.theta.col(static_cast<Eigen::Index>(i));
      views.emplace_back(col.data(), static_cast<std::size_t>(col.size()));
    }
    r.diagnostics = diagnose(views);
    if (!r.diagnostics.converged())
      post.convergence_issues.push_back(fmt::format("theta[{}]: rhat={:.4g} ess={:.4g}", r.region_id,
                                                    r.diagnostics.rhat, r.diagnostics.ess));
    post.regions.push_back(std::move(r));
  }

  post.intercept = summarize_vectors(post.chains, &ChainDraws::intercept);
  post.iid_variance = summarize_vectors(post.chains, &ChainDraws::iid_variance);
  post.spatial_variance = summarize_vectors(post.chains, &ChainDraws::spatial_variance);
  post.intercept_diagnostics = diagnose_vectors(post.chains, &ChainDraws::intercept);
  post.iid_diagnostics = diagnose_vectors(post.chains, &ChainDraws::iid_variance);
  post.spatial_diagnostics = diagnose_vectors(post.chains, &ChainDraws::spatial_variance);

  auto check = [&](const char* name, const ScalarDiagnostics& d, bool sampled) {
    if (sampled && !d.converged())
      post.convergence_issues.push_back(fmt::format("{}: rhat={:.4g} ess={:.4g}", name, d.rhat, d.ess));
  };
  check("intercept", post.intercept_diagnostics, true);
  check("iid_variance", post.iid_diagnostics, !spec.fixed_iid_variance);
  check("spatial_variance", post.spatial_diagnostics,
        !spec.fixed_spatial_variance && spec.precision.rank > 0);
  post.converged = post.convergence_issues.empty();
  return post;
}

// --- output ---------------------------------------------------------------------------

std::vector<PosteriorRow> posterior_table(const BymModelSpec& spec, const BymPosterior& post) {
  std::vector<PosteriorRow> rows;
  for (std::size_t i = 0; i < post.regions.size(); ++i) {
    const auto& r = post.regions[i];
    const auto& e = spec.estimates[i];
    PosteriorRow row;
    row.region_id = r.region_id;
    row.prev_mean = r.prevalence.mean;
    row.prev_median = r.prevalence.median;
    row.prev_sd = r.prevalence.sd;
    row.prev_q025 = r.prevalence.q025;
    row.prev_q975 = r.prevalence.q975;
    row.theta_mean = r.theta.mean;
    row.theta_sd = r.theta.sd;
    row.direct_p = e.p_hat;
    row.direct_se = e.standard_error();
    row.n = e.n;
    row.degenerate = e.degenerate;
    row.rhat_theta = r.diagnostics.rhat;
    row.ess_theta = r.diagnostics.ess;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_posterior_csv(std::ostream& out, const std::vector<PosteriorRow>& rows,
                         const BymPosterior& post, const ArtifactMetadata* meta) {
  if (meta) out << "# " << meta->line() << '\n';
  const auto& p = post.priors;
  out << fmt::format("# priors iid=IG({},{}) spatial=IG({},{}) intercept=flat\n", p.iid_shape,
                     p.iid_rate, p.spatial_shape, p.spatial_rate);
  out << "# converged=" << (post.converged ? "yes" : "no") << '\n';
  for (const auto& issue : post.convergence_issues) out << "# not-converged " << issue << '\n';
  out << "region_id,prev_mean,prev_median,prev_sd,prev_q025,prev_q975,theta_mean,theta_sd,"
         "direct_p,direct_se,n,degenerate,rhat_theta,ess_theta\n";
  for (const auto& r : rows)
    out << csv::escape(r.region_id) << ',' << real(r.prev_mean) << ',' << real(r.prev_median) << ','
        << real(r.prev_sd) << ',' << real(r.prev_q025) << ',' << real(r.prev_q975) << ','
        << real(r.theta_mean) << ',' << real(r.theta_sd) << ',' << real(r.direct_p) << ','
        << real(r.direct_se) << ',' << r.n << ',' << to_string(r.degenerate) << ','
        << real(r.rhat_theta) << ',' << real(r.ess_theta) << '\n';
}

std::vector<PosteriorRow> read_posterior_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const char* names[] = {"region_id", "prev_mean", "prev_median", "prev_sd",   "prev_q025",
                         "prev_q975", "theta_mean", "theta_sd",   "direct_p",  "direct_se",
                         "n",         "degenerate", "rhat_theta", "ess_theta"};
  std::vector<std::size_t> col;
  for (const char* name : names) col.push_back(t.require(name));
  std::vector<PosteriorRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    auto num = [&](std::size_t c) {
      if (f[col[c]] == "NA") return kNaN;
      auto v = csv::parse_double(f[col[c]]);
      if (!v) throw RowError(fmt::format("row {}: '{}' is not a number", i + 1, f[col[c]]), i + 1);
      return *v;
    };
    PosteriorRow r;
    r.region_id = f[col[0]];
    r.prev_mean = num(1);
    r.prev_median = num(2);
    r.prev_sd = num(3);
    r.prev_q025 = num(4);
    r.prev_q975 = num(5);
    r.theta_mean = num(6);
    r.theta_sd = num(7);
    r.direct_p = num(8);
    r.direct_se = num(9);
    auto n = csv::parse_int(f[col[10]]);
    if (!n || *n < 0) throw RowError(fmt::format("row {}: bad n", i + 1), i + 1);
    r.n = static_cast<std::size_t>(*n);
    r.degenerate = parse_degeneracy(f[col[11]]);
    r.rhat_theta = num(12);
    r.ess_theta = num(13);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const BymPosterior& post, const ArtifactMetadata* meta) {
  if (meta) out << "# " << meta->line() << '\n';
  out << "chain,iteration,intercept,iid_variance,spatial_variance\n";
  for (std::size_t c = 0; c < post.chains.size(); ++c) {
    const auto& ch = post.chains[c];
    for (std::size_t k = 0; k < ch.intercept.size(); ++k)
      out << c << ',' << k << ',' << real(ch.intercept[k]) << ',' << real(ch.iid_variance[k]) << ','
          << real(ch.spatial_variance[k]) << '\n';
  }
}

}  // namespace sae
