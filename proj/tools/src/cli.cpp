#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sae/bym.hpp"
#include "sae/data_model.hpp"
#include "sae/direct_estimation.hpp"
#include "sae/error.hpp"
#include "sae/metadata.hpp"
#include "sae/render.hpp"
#include "sae/spatial_graph.hpp"
#include "sae/synthetic.hpp"

namespace sae::cli {

namespace fs = std::filesystem;

namespace {

const char* kRecords = "records.csv";
const char* kBoundaries = "boundaries.geojson";
const char* kTruth = "truth.csv";
const char* kDirect = "direct.csv";
const char* kGraph = "graph.txt";
const char* kPosterior = "posterior.csv";
const char* kTrace = "trace.csv";
const char* kFig1 = "fig1_sample_size.svg";
const char* kFig2 = "fig2_prevalence.svg";
const char* kFig3 = "fig3_country_zoom.svg";
const char* kFig45 = "fig4_5_comparison.svg";

// Shared state resolved from the global flags.
struct Context {
  fs::path out_dir = ".";
  std::optional<ScenarioConfig> config;
  ArtifactMetadata meta;
  std::ostream* log = nullptr;

  fs::path in(const std::string& given, const char* fallback) const {
    return given.empty() ? out_dir / fallback : fs::path(given);
  }
  std::optional<std::string> extra(const std::string& key) const {
    if (!config) return std::nullopt;
    auto it = config->extra.find(key);
    if (it == config->extra.end()) return std::nullopt;
    return it->second;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
  f << content;
  if (!f) throw Error(fmt::format("failed writing '{}'", path.string()));
}

std::ifstream open_input(const fs::path& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw ValidationError(fmt::format("cannot open {} file '{}'", what, path.string()));
  return f;
}

template <typename T>
T extra_number(const Context& ctx, const std::string& key, T fallback) {
  auto v = ctx.extra(key);
  if (!v) return fallback;
  std::istringstream ss(*v);
  T x{};
  if (!(ss >> x) || !(ss >> std::ws).eof())
    throw ValidationError(fmt::format("config: '{}' has unreadable value '{}'", key, *v));
  return x;
}

// --- steps ----------------------------------------------------------------------

void do_simulate(const Context& ctx) {
  ScenarioConfig cfg = ctx.config.value_or(ScenarioConfig{});
  cfg.seed = ctx.meta.seed;
  const SyntheticTruth truth = make_truth(cfg);
  const SurveyDataset ds = sample_survey(truth);

  std::ostringstream rec, geo, tru;
  write_records(rec, ds.records, &ctx.meta);
  write_boundaries(geo, truth.regions, &ctx.meta);
  write_truth_csv(tru, truth, &ctx.meta);
  write_file(ctx.out_dir / kRecords, rec.str());
  write_file(ctx.out_dir / kBoundaries, geo.str());
  write_file(ctx.out_dir / kTruth, tru.str());
  *ctx.log << fmt::format("simulate: {} records in {} regions\n", ds.records.size(),
                          truth.regions.size());
}

struct DirectOptions {
  std::string records, boundaries, schema;
  bool assign_by_location = false;
};

void do_direct(const Context& ctx, const DirectOptions& opt) {
  const RecordSchema schema = RecordSchema::parse(opt.schema);
  auto records = load_records(ctx.in(opt.records, kRecords), schema);
  auto boundaries = load_boundaries(ctx.in(opt.boundaries, kBoundaries));
  if (opt.assign_by_location) {
    const auto rep = assign_regions_by_location(records, boundaries);
    *ctx.log << fmt::format("direct: {} records located, {} outside every region\n", rep.assigned,
                            rep.outside);
    for (const auto& c : rep.ambiguous_clusters)
      *ctx.log << fmt::format("direct: warning: cluster '{}' lies on a shared boundary\n", c);
  }
  check_cluster_consistency(records);
  auto [ds, report] = drop_unlinked(std::move(records), std::move(boundaries));
  if (report.dropped > 0)
    *ctx.log << fmt::format("direct: dropped {} of {} records without a boundary\n", report.dropped,
                            report.total);
  for (const auto& r : report.regions_without_records)
    *ctx.log << fmt::format("direct: region '{}' has no records\n", r);

  const auto estimates = estimate_all(ds);
  std::ostringstream os;
  write_direct_csv(os, estimates, &ctx.meta);
  write_file(ctx.out_dir / kDirect, os.str());
  std::size_t degenerate = 0;
  for (const auto& e : estimates) degenerate += e.usable() ? 0 : 1;
  *ctx.log << fmt::format("direct: {} regions, {} degenerate\n", estimates.size(), degenerate);
}

struct AdjacencyOptions {
  std::string boundaries;
  std::optional<std::string> style;
  std::optional<double> tolerance;
};

void do_adjacency(const Context& ctx, const AdjacencyOptions& opt) {
  const auto boundaries = load_boundaries(ctx.in(opt.boundaries, kBoundaries));
  const WeightStyle style = parse_weight_style(opt.style.value_or(ctx.extra("style").value_or("B")));
  const double tol = opt.tolerance.value_or(extra_number(ctx, "tolerance", 1e-6));
  const auto graph = build_adjacency(boundaries, tol, style);
  std::ostringstream os;
  write_graph(os, graph, &ctx.meta);
  write_file(ctx.out_dir / kGraph, os.str());
  *ctx.log << fmt::format("adjacency: {} nodes, {} edges, {} components\n", graph.size(),
                          graph.edges.size(), graph.component_count);
}

struct SmoothOptions {
  std::string direct, graph;
  std::optional<std::size_t> chains, iterations, burn_in, thin;
  bool strict = false;
  bool trace = false;
};

// Returns false when the fit did not converge.
bool do_smooth(const Context& ctx, const SmoothOptions& opt) {
  auto din = open_input(ctx.in(opt.direct, kDirect), "direct estimates");
  auto estimates = read_direct_csv(din);
  auto gin = open_input(ctx.in(opt.graph, kGraph), "graph");
  const auto graph = read_graph(gin);
  const auto spec = BymModelSpec::build(std::move(estimates), graph);

  McmcConfig mc;
  mc.chains = opt.chains.value_or(extra_number(ctx, "chains", mc.chains));
  mc.iterations = opt.iterations.value_or(extra_number(ctx, "iterations", mc.iterations));
  mc.burn_in = opt.burn_in.value_or(extra_number(ctx, "burn_in", mc.burn_in));
  mc.thin = opt.thin.value_or(extra_number(ctx, "thin", mc.thin));
  mc.seed = ctx.meta.seed;

  const auto post = gibbs_fit(spec, mc);
  const auto rows = posterior_table(spec, post);
  std::ostringstream os;
  write_posterior_csv(os, rows, post, &ctx.meta);
  write_file(ctx.out_dir / kPosterior, os.str());
  if (opt.trace) {
    std::ostringstream ts;
    write_trace_csv(ts, post, &ctx.meta);
    write_file(ctx.out_dir / kTrace, ts.str());
  }
  *ctx.log << fmt::format("smooth: {} chains x {} retained draws, converged={}\n", mc.chains,
                          mc.retained_per_chain(), post.converged ? "yes" : "no");
  for (const auto& issue : post.convergence_issues)
    *ctx.log << fmt::format("smooth: warning: {}\n", issue);
  return post.converged;
}

struct RenderOptions {
  std::string boundaries, direct, posterior;
  std::optional<std::string> breaks;
  std::optional<std::size_t> bins;
};

ChoroplethSpec make_spec(const Context& ctx, const RenderOptions& opt, std::string column) {
  ChoroplethSpec spec;
  spec.value_column = std::move(column);
  const std::string b = opt.breaks.value_or(ctx.extra("breaks").value_or("quantile"));
  if (b == "quantile") spec.breaks = BreakStrategy::quantile;
  else if (b == "equal_interval") spec.breaks = BreakStrategy::equal_interval;
  else throw ValidationError(fmt::format("unknown break strategy '{}'", b));
  spec.bins = opt.bins.value_or(extra_number<std::size_t>(ctx, "bins", 5));
  spec.ramp = default_ramp(spec.bins);
  return spec;
}

std::vector<PosteriorRow> load_posterior(const Context& ctx, const std::string& given) {
  auto in = open_input(ctx.in(given, kPosterior), "posterior");
  return read_posterior_csv(in);
}

std::vector<DirectEstimate> load_direct(const Context& ctx, const std::string& given) {
  auto in = open_input(ctx.in(given, kDirect), "direct estimates");
  return read_direct_csv(in);
}

void do_render(const Context& ctx, const RenderOptions& opt) {
  const auto boundaries = load_boundaries(ctx.in(opt.boundaries, kBoundaries));
  const auto direct = load_direct(ctx, opt.direct);
  const auto posterior = load_posterior(ctx, opt.posterior);

  std::map<std::string, double> sizes, mean, lo, hi;
  for (const auto& d : direct) sizes[d.region_id] = static_cast<double>(d.n);
  for (const auto& r : posterior) {
    mean[r.region_id] = r.prev_mean;
    lo[r.region_id] = r.prev_q025;
    hi[r.region_id] = r.prev_q975;
  }

  write_file(ctx.out_dir / kFig1,
             render_choropleth(boundaries, {MapPanel{"Sample size", sizes}},
                               make_spec(ctx, opt, "individuals"), "Survey sample size by region",
                               &ctx.meta));
  write_file(ctx.out_dir / kFig2,
             render_choropleth(boundaries,
                               {MapPanel{"Posterior mean", mean}, MapPanel{"2.5% quantile", lo},
                                MapPanel{"97.5% quantile", hi}},
                               make_spec(ctx, opt, "prevalence"),
                               "Smoothed prevalence and 95% credible interval", &ctx.meta));
  auto zoom = make_spec(ctx, opt, "prevalence");
  zoom.scope = ScaleScope::per_group;
  write_file(ctx.out_dir / kFig3,
             render_choropleth(boundaries, {MapPanel{"", mean}}, zoom,
                               "Smoothed prevalence by country, independent scales", &ctx.meta));
  *ctx.log << fmt::format("render: wrote {}, {}, {}\n", kFig1, kFig2, kFig3);
}

void do_compare(const Context& ctx, const RenderOptions& opt) {
  const auto direct = load_direct(ctx, opt.direct);
  const auto posterior = load_posterior(ctx, opt.posterior);
  write_file(ctx.out_dir / kFig45, render_comparison(direct, posterior, &ctx.meta));
  *ctx.log << fmt::format("compare: wrote {}\n", kFig45);
}

const std::vector<std::string> kConfigKeys = {"chains", "iterations", "burn_in", "thin",
                                              "style",  "tolerance",  "breaks",  "bins"};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small-area prevalence estimation: direct estimates, BYM smoothing, maps", "sae"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::string config_path;
  app.add_option("--out", out_dir, "Output directory (also the default input location)");
  app.add_option("--seed", seed, "Random seed (default: the config's seed, else 1)");
  app.add_option("--config", config_path, "Scenario config file")->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic survey and region grid");

  DirectOptions dopt;
  auto* dir = app.add_subcommand("direct", "Design-weighted direct estimates per region");
  dir->add_option("--records", dopt.records, "Records CSV")->check(CLI::ExistingFile);
  dir->add_option("--boundaries", dopt.boundaries, "Boundaries GeoJSON")->check(CLI::ExistingFile);
  dir->add_option("--schema", dopt.schema, "Column overrides, e.g. region_id=REG,weight=V005");
  dir->add_flag("--assign-by-location", dopt.assign_by_location,
                "Locate records without region_id from their coordinates");

  AdjacencyOptions aopt;
  auto* adj = app.add_subcommand("adjacency", "Rook adjacency graph from boundaries");
  adj->add_option("--boundaries", aopt.boundaries, "Boundaries GeoJSON")->check(CLI::ExistingFile);
  adj->add_option("--style", aopt.style, "Weight style B or W")->check(CLI::IsMember({"B", "W"}));
  adj->add_option("--tolerance", aopt.tolerance, "Vertex snapping tolerance (degrees)");

  SmoothOptions sopt;
  auto* smo = app.add_subcommand("smooth", "Fit the BYM model by Gibbs sampling");
  smo->add_option("--direct", sopt.direct, "Direct estimates CSV")->check(CLI::ExistingFile);
  smo->add_option("--graph", sopt.graph, "Graph file")->check(CLI::ExistingFile);
  smo->add_option("--chains", sopt.chains);
  smo->add_option("--iterations", sopt.iterations, "Iterations per chain, including burn-in");
  smo->add_option("--burn-in", sopt.burn_in);
  smo->add_option("--thin", sopt.thin);
  smo->add_flag("--strict", sopt.strict, "Exit with status 3 when the fit has not converged");
  smo->add_flag("--trace", sopt.trace, "Also write hyperparameter traces");

  RenderOptions ropt;
  auto add_render_inputs = [&ropt](CLI::App* sub, bool maps) {
    if (maps) {
      sub->add_option("--boundaries", ropt.boundaries)->check(CLI::ExistingFile);
      sub->add_option("--breaks", ropt.breaks)->check(CLI::IsMember({"quantile", "equal_interval"}));
      sub->add_option("--bins", ropt.bins);
    }
    sub->add_option("--direct", ropt.direct)->check(CLI::ExistingFile);
    sub->add_option("--posterior", ropt.posterior)->check(CLI::ExistingFile);
  };
  auto* ren = app.add_subcommand("render", "Sample-size, prevalence and per-country maps");
  add_render_inputs(ren, true);
  auto* cmp = app.add_subcommand("compare", "Direct versus smoothed comparison figure");
  add_render_inputs(cmp, false);

  bool pipe_strict = false;
  auto* pip = app.add_subcommand("pipeline", "simulate, direct, adjacency, smooth, render, compare");
  pip->add_flag("--strict", pipe_strict, "Exit with status 3 when the fit has not converged");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<const char*> argv{"sae"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    Context ctx;
    ctx.out_dir = out_dir;
    ctx.log = &out;
    if (!config_path.empty()) {
      ctx.config = load_scenario(config_path);
      ctx.meta.config_hash = config_hash(ctx.config->source);
      for (const auto& [key, _] : ctx.config->extra)
        if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end())
          throw ValidationError(fmt::format("config: unknown key '{}'", key));
    }
    ctx.meta.seed = seed.value_or(ctx.config ? ctx.config->seed : 1);

    bool converged = true;
    bool strict = false;
    if (sim->parsed()) {
      do_simulate(ctx);
    } else if (dir->parsed()) {
      do_direct(ctx, dopt);
    } else if (adj->parsed()) {
      do_adjacency(ctx, aopt);
    } else if (smo->parsed()) {
      converged = do_smooth(ctx, sopt);
      strict = sopt.strict;
    } else if (ren->parsed()) {
      do_render(ctx, ropt);
    } else if (cmp->parsed()) {
      do_compare(ctx, ropt);
    } else if (pip->parsed()) {
      do_simulate(ctx);
      do_direct(ctx, {});
      do_adjacency(ctx, {});
      converged = do_smooth(ctx, {});
      do_render(ctx, {});
      do_compare(ctx, {});
      strict = pipe_strict;
    }
    if (!converged && strict) {
      err << "sae: posterior did not converge (--strict)\n";
      return not_converged;
    }
    return ok;
  } catch (const ValidationError& e) {
    err << "sae: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    err << "sae: error: " << e.what() << '\n';
    return failure;
  }
}

}  // namespace sae::cli
