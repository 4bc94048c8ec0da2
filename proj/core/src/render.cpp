#include "sae/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "sae/error.hpp"

namespace sae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMapSize = 360.0;
constexpr double kLegendWidth = 150.0;
constexpr double kTitleHeight = 28.0;
constexpr double kPad = 12.0;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string px(double v) { return fmt::format("{:.2f}", v); }

struct Rgb {
  int r, g, b;
};

Rgb parse_hex(const std::string& s) {
  unsigned v = 0;
  if (s.size() != 7 || s[0] != '#' || std::sscanf(s.c_str() + 1, "%6x", &v) != 1)
    throw ValidationError(fmt::format("'{}' is not a #rrggbb color", s));
  return {static_cast<int>((v >> 16) & 0xff), static_cast<int>((v >> 8) & 0xff),
          static_cast<int>(v & 0xff)};
}

std::string svg_open(double width, double height, const ArtifactMetadata* meta) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\">\n",
      px(width), px(height));
  if (meta) out += fmt::format("<!-- {} -->\n", meta->line());
  out += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  return out;
}

struct Extent {
  double lon_min = std::numeric_limits<double>::infinity();
  double lon_max = -std::numeric_limits<double>::infinity();
  double lat_min = std::numeric_limits<double>::infinity();
  double lat_max = -std::numeric_limits<double>::infinity();

  void add(const RegionBoundary& b) {
    for (const auto& p : b.polygons)
      for (const auto& r : p.rings)
        for (const auto& c : r) {
          lon_min = std::min(lon_min, c.lon);
          lon_max = std::max(lon_max, c.lon);
          lat_min = std::min(lat_min, c.lat);
          lat_max = std::max(lat_max, c.lat);
        }
  }
};

// Plate carree with x stretched by cos(mean latitude), fitted to a square box.
struct Projection {
  double lon0, lat1, xscale, scale, width, height;

  explicit Projection(const Extent& e) {
    lon0 = e.lon_min;
    lat1 = e.lat_max;
    const double mid = 0.5 * (e.lat_min + e.lat_max) * std::numbers::pi / 180.0;
    xscale = std::cos(mid);
    const double w = std::max((e.lon_max - e.lon_min) * xscale, 1e-12);
    const double h = std::max(e.lat_max - e.lat_min, 1e-12);
    scale = kMapSize / std::max(w, h);
    width = w * scale;
    height = h * scale;
  }
  double x(double lon) const { return (lon - lon0) * xscale * scale; }
  double y(double lat) const { return (lat1 - lat) * scale; }
};

std::string path_data(const RegionBoundary& b, const Projection& proj, double ox, double oy) {
  std::string d;
  for (const auto& poly : b.polygons)
    for (const auto& ring : poly.rings) {
      for (std::size_t k = 0; k + 1 < ring.size(); ++k)
        d += fmt::format("{}{},{}", k == 0 ? "M" : "L", px(ox + proj.x(ring[k].lon)),
                         px(oy + proj.y(ring[k].lat)));
      d += "Z";
    }
  return d;
}

struct MapBlock {
  std::string title;
  std::vector<const RegionBoundary*> regions;
  const std::map<std::string, double>* values;
  std::vector<double> edges;
};

double value_of(const std::map<std::string, double>& values, const std::string& id) {
  auto it = values.find(id);
  return it == values.end() ? kNaN : it->second;
}

std::vector<double> finite_values(const std::vector<const RegionBoundary*>& regions,
                                  const std::map<std::string, double>& values) {
  std::vector<double> out;
  for (const auto* b : regions) {
    const double v = value_of(values, b->region_id);
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

// Returns the block's SVG; `width`/`height` receive its footprint.
std::string draw_block(const MapBlock& block, const ChoroplethSpec& spec, double ox, double oy,
                       double& width, double& height) {
  Extent ext;
  for (const auto* b : block.regions) ext.add(*b);
  const Projection proj(ext);

  std::string out = fmt::format("<g class=\"panel\" transform=\"translate({},{})\">\n", px(ox), px(oy));
  out += fmt::format("<text class=\"title\" x=\"0\" y=\"16\" font-size=\"13\">{}</text>\n",
                     escape_xml(block.title));
  bool any_missing = false;
  for (const auto* b : block.regions) {
    const double v = value_of(*block.values, b->region_id);
    std::string fill;
    if (std::isfinite(v) && !block.edges.empty()) {
      fill = spec.ramp[bin_index(v, block.edges)];
    } else {
      fill = "url(#hatch)";
      any_missing = true;
    }
    out += fmt::format(
        "<path class=\"region\" data-region=\"{}\" data-value=\"{}\" d=\"{}\" fill=\"{}\" "
        "stroke=\"#404040\" stroke-width=\"0.6\"/>\n",
        escape_xml(b->region_id), std::isfinite(v) ? fmt::format("{:.6g}", v) : "NA",
        path_data(*b, proj, 0.0, kTitleHeight), fill);
  }

  const double lx = proj.width + kPad;
  double ly = kTitleHeight + 4.0;
  out += fmt::format("<g class=\"legend\" transform=\"translate({},{})\">\n", px(lx), px(ly));
  out += fmt::format("<text x=\"0\" y=\"0\" font-weight=\"bold\">{}</text>\n",
                     escape_xml(spec.value_column));
  double entry_y = 8.0;
  if (!block.edges.empty()) {
    for (std::size_t j = 0; j + 1 < block.edges.size(); ++j) {
      out += fmt::format(
          "<rect class=\"legend-entry\" data-lower=\"{0}\" data-upper=\"{1}\" x=\"0\" y=\"{2}\" "
          "width=\"14\" height=\"12\" fill=\"{3}\" stroke=\"#404040\" stroke-width=\"0.5\"/>"
          "<text x=\"20\" y=\"{4}\">{0} – {1}</text>\n",
          format_sig3(block.edges[j]), format_sig3(block.edges[j + 1]), px(entry_y), spec.ramp[j],
          px(entry_y + 10.0));
      entry_y += 16.0;
    }
  }
  if (any_missing) {
    out += fmt::format(
        "<rect class=\"legend-missing\" x=\"0\" y=\"{}\" width=\"14\" height=\"12\" "
        "fill=\"url(#hatch)\" stroke=\"#404040\" stroke-width=\"0.5\"/><text x=\"20\" y=\"{}\">no "
        "data</text>\n",
        px(entry_y), px(entry_y + 10.0));
    entry_y += 16.0;
  }
  out += "</g>\n</g>\n";
  width = proj.width + kPad + kLegendWidth;
  height = std::max(kTitleHeight + proj.height, ly + entry_y) + kPad;
  return out;
}

const char* kHatchDefs =
    "<defs><pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\">"
    "<rect width=\"6\" height=\"6\" fill=\"#f4f4f4\"/>"
    "<path d=\"M0,6 L6,0\" stroke=\"#808080\" stroke-width=\"1\"/></pattern></defs>\n";

}  // namespace

std::vector<std::string> default_ramp(std::size_t bins) {
  static const std::vector<std::string> anchors = {"#ffffb2", "#fecc5c", "#fd8d3c", "#f03b20",
                                                   "#bd0026"};
  if (bins == 0) return {};
  if (bins == 1) return {anchors.front()};
  std::vector<std::string> out;
  for (std::size_t j = 0; j < bins; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(bins - 1) *
                     static_cast<double>(anchors.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(t), anchors.size() - 2);
    const double f = t - static_cast<double>(k);
    const Rgb a = parse_hex(anchors[k]), b = parse_hex(anchors[k + 1]);
    auto mix = [f](int x, int y) { return static_cast<int>(std::lround(x + f * (y - x))); };
    out.push_back(fmt::format("#{:02x}{:02x}{:02x}", mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)));
  }
  return out;
}

void ChoroplethSpec::validate() const {
  if (bins < 2) throw ValidationError("choropleth: bin count must be at least 2");
  if (ramp.size() != bins)
    throw ValidationError(
        fmt::format("choropleth: ramp has {} colors for {} bins", ramp.size(), bins));
  for (const auto& c : ramp) parse_hex(c);
}

std::vector<double> compute_breaks(std::vector<double> values, BreakStrategy strategy,
                                   std::size_t bins) {
  if (bins < 1) throw ValidationError("compute_breaks: need at least one bin");
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  std::vector<double> edges(bins + 1);
  const double lo = values.front(), hi = values.back();
  for (std::size_t j = 0; j <= bins; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(bins);
    if (strategy == BreakStrategy::equal_interval) {
      edges[j] = lo + p * (hi - lo);
    } else {
      const double h = p * static_cast<double>(values.size() - 1);
      const auto k = static_cast<std::size_t>(std::floor(h));
      edges[j] = k + 1 >= values.size()
                     ? values.back()
                     : values[k] + (h - static_cast<double>(k)) * (values[k + 1] - values[k]);
    }
  }
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

std::size_t bin_index(double value, const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  for (std::size_t j = 0; j < bins; ++j)
    if (value <= edges[j + 1]) return j;
  return bins - 1;
}

std::string format_sig3(double v) {
  if (!std::isfinite(v)) return "NA";
  if (v == 0.0) return "0";
  int digits = static_cast<int>(std::floor(std::log10(std::abs(v))));
  auto round_at = [&](int d) {
    const double f = std::pow(10.0, 2 - d);
    return std::round(v * f) / f;
  };
  double r = round_at(digits);
  if (std::floor(std::log10(std::abs(r))) > digits) {
    ++digits;
    r = round_at(digits);
  }
  const int decimals = std::max(0, 2 - digits);
  std::string s = fmt::format("{:.{}f}", r, decimals);
  if (s == "-0") s = "0";
  return s;
}

std::string render_choropleth(const std::vector<RegionBoundary>& boundaries,
                              const std::vector<MapPanel>& panels, const ChoroplethSpec& spec,
                              const std::string& title, const ArtifactMetadata* meta) {
  spec.validate();
  std::set<std::string> known;
  for (const auto& b : boundaries) known.insert(b.region_id);
  for (const auto& p : panels)
    for (const auto& [id, _] : p.values)
      if (!known.contains(id))
        throw ConsistencyError(fmt::format("value given for unknown region '{}'", id), id);

  std::vector<const RegionBoundary*> all;
  for (const auto& b : boundaries) all.push_back(&b);
  std::sort(all.begin(), all.end(), [](const auto* a, const auto* b) { return a->region_id < b->region_id; });

  std::vector<MapBlock> blocks;
  if (spec.scope == ScaleScope::global) {
    std::vector<double> pooled;
    for (const auto& p : panels) {
      auto v = finite_values(all, p.values);
      pooled.insert(pooled.end(), v.begin(), v.end());
    }
    const auto edges = compute_breaks(pooled, spec.breaks, spec.bins);
    for (const auto& p : panels) blocks.push_back({p.title, all, &p.values, edges});
  } else {
    std::map<std::string, std::vector<const RegionBoundary*>> groups;
    for (const auto* b : all) groups[b->country].push_back(b);
    for (const auto& p : panels)
      for (const auto& [country, members] : groups) {
        const std::string t = p.title.empty() ? country : fmt::format("{} ({})", p.title, country);
        blocks.push_back({t, members, &p.values,
                          compute_breaks(finite_values(members, p.values), spec.breaks, spec.bins)});
      }
  }

  std::string body;
  double x = kPad, total_h = 0.0;
  const double top = title.empty() ? kPad : kPad + 24.0;
  for (const auto& blk : blocks) {
    double w = 0, h = 0;
    body += draw_block(blk, spec, x, top, w, h);
    x += w + kPad;
    total_h = std::max(total_h, top + h);
  }
  std::string out = svg_open(x, total_h + kPad, meta);
  out += kHatchDefs;
  if (!title.empty())
    out += fmt::format("<text class=\"figure-title\" x=\"{}\" y=\"24\" font-size=\"15\">{}</text>\n",
                       px(kPad), escape_xml(title));
  out += body;
  out += "</svg>\n";
  return out;
}

std::string render_choropleth(const std::vector<RegionBoundary>& boundaries,
                              const std::map<std::string, double>& values,
                              const ChoroplethSpec& spec, const ArtifactMetadata* meta) {
  return render_choropleth(boundaries, {MapPanel{"", values}}, spec, "", meta);
}

// --- comparison figure ------------------------------------------------------------------

namespace {

constexpr double kPlot = 300.0;
constexpr double kMargin = 48.0;

struct Axes {
  double ox, oy;  // panel origin
  double lo_x, hi_x, lo_y, hi_y;
  double sx(double v) const { return ox + kMargin + (v - lo_x) / (hi_x - lo_x) * kPlot; }
  double sy(double v) const { return oy + kMargin + kPlot - (v - lo_y) / (hi_y - lo_y) * kPlot; }
};

std::string axes_frame(const Axes& a, const std::string& title, const std::string& xlabel,
                       const std::string& ylabel) {
  std::string out;
  out += fmt::format("<text class=\"title\" x=\"{}\" y=\"{}\" font-size=\"13\">{}</text>\n",
                     px(a.ox + kMargin), px(a.oy + 20.0), escape_xml(title));
  out += fmt::format(
      "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
      "stroke=\"#404040\"/>\n",
      px(a.ox + kMargin), px(a.oy + kMargin), px(kPlot), px(kPlot));
  for (int k = 0; k <= 4; ++k) {
    const double vx = a.lo_x + (a.hi_x - a.lo_x) * k / 4.0;
    const double vy = a.lo_y + (a.hi_y - a.lo_y) * k / 4.0;
    out += fmt::format("<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       px(a.sx(vx)), px(a.oy + kMargin + kPlot + 14.0), format_sig3(vx));
    out += fmt::format("<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                       px(a.ox + kMargin - 4.0), px(a.sy(vy) + 4.0), format_sig3(vy));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                     px(a.ox + kMargin + kPlot / 2), px(a.oy + kMargin + kPlot + 32.0),
                     escape_xml(xlabel));
  out += fmt::format(
      "<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
      px(a.ox + 12.0), px(a.oy + kMargin + kPlot / 2), escape_xml(ylabel));
  return out;
}

std::string marker(double cx, double cy, bool degenerate, const std::string& region, double x,
                   double y, const char* color) {
  if (degenerate)
    return fmt::format(
        "<path class=\"point degenerate\" data-region=\"{}\" data-x=\"{:.6g}\" data-y=\"{:.6g}\" "
        "d=\"M{},{}L{},{}L{},{}L{},{}Z\" fill=\"none\" stroke=\"#7b3294\" stroke-width=\"1.2\"/>\n",
        escape_xml(region), x, y, px(cx), px(cy - 4), px(cx + 4), px(cy), px(cx), px(cy + 4),
        px(cx - 4), px(cy));
  return fmt::format(
      "<circle class=\"point\" data-region=\"{}\" data-x=\"{:.6g}\" data-y=\"{:.6g}\" cx=\"{}\" "
      "cy=\"{}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
      escape_xml(region), x, y, px(cx), px(cy), color);
}

double nice_upper(double v) {
  if (!(v > 0.0)) return 1.0;
  return v * 1.05;
}

}  // namespace

std::string render_comparison(const std::vector<DirectEstimate>& direct,
                              const std::vector<PosteriorRow>& posterior,
                              const ArtifactMetadata* meta) {
  std::map<std::string, const PosteriorRow*> post;
  for (const auto& r : posterior) post[r.region_id] = &r;
  if (post.size() != direct.size())
    throw ConsistencyError("comparison: direct and posterior region sets differ", "");
  for (const auto& d : direct)
    if (!post.contains(d.region_id))
      throw ConsistencyError(fmt::format("comparison: region '{}' has no posterior", d.region_id),
                             d.region_id);

  std::string body;

  // Panel A: prevalence, shared square axes.
  {
    double hi = 0.0;
    for (const auto& d : direct) {
      hi = std::max(hi, d.p_hat);
      hi = std::max(hi, post[d.region_id]->prev_mean);
    }
    hi = nice_upper(hi);
    const Axes a{kPad, kPad, 0.0, hi, 0.0, hi};
    body += "<g class=\"panel\" id=\"panel-a\">\n";
    body += axes_frame(a, "A. Prevalence: direct vs smoothed", "direct (weighted) estimate",
                       "smoothed posterior mean");
    body += fmt::format(
        "<line class=\"identity\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" "
        "stroke-dasharray=\"4 3\"/>\n",
        px(a.sx(0)), px(a.sy(0)), px(a.sx(hi)), px(a.sy(hi)));
    for (const auto& d : direct) {
      const double y = post[d.region_id]->prev_mean;
      body += marker(a.sx(d.p_hat), a.sy(y), !d.usable(), d.region_id, d.p_hat, y, "#2c7bb6");
    }
    body += "</g>\n";
  }

  // Panel B: standard errors.
  {
    double hi = 0.0;
    for (const auto& d : direct) {
      if (std::isfinite(d.var_p)) hi = std::max(hi, d.standard_error());
      hi = std::max(hi, post[d.region_id]->prev_sd);
    }
    hi = nice_upper(hi);
    const double ox = kPad + 2 * kMargin + kPlot + kPad;
    const Axes a{ox, kPad, 0.0, hi, 0.0, hi};
    body += "<g class=\"panel\" id=\"panel-b\">\n";
    body += axes_frame(a, "B. Standard errors", "direct standard error", "posterior sd");
    body += fmt::format(
        "<line class=\"identity\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" "
        "stroke-dasharray=\"4 3\"/>\n",
        px(a.sx(0)), px(a.sy(0)), px(a.sx(hi)), px(a.sy(hi)));
    for (const auto& d : direct) {
      if (!std::isfinite(d.var_p)) continue;
      const double y = post[d.region_id]->prev_sd;
      body += marker(a.sx(d.standard_error()), a.sy(y), !d.usable(), d.region_id,
                     d.standard_error(), y, "#d7191c");
    }
    body += "</g>\n";
  }

  // Panel C: paired intervals sorted by direct estimate.
  {
    std::vector<const DirectEstimate*> order;
    for (const auto& d : direct) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
      return a->p_hat != b->p_hat ? a->p_hat < b->p_hat : a->region_id < b->region_id;
    });
    double lo = 0.0, hi = 0.0;
    for (const auto* d : order) {
      const auto* p = post[d->region_id];
      hi = std::max(hi, p->prev_q975);
      if (d->usable()) {
        lo = std::min(lo, d->p_hat - 1.96 * d->standard_error());
        hi = std::max(hi, d->p_hat + 1.96 * d->standard_error());
      }
    }
    hi = nice_upper(hi);
    if (lo < 0.0) lo *= 1.05;
    const double ox = kPad + 2 * (2 * kMargin + kPlot + kPad);
    const double width = std::max(kPlot, 9.0 * static_cast<double>(order.size()));
    const Axes a{ox, kPad, -0.5, static_cast<double>(order.size()) - 0.5, lo, hi};
    auto sx = [&](double k) { return ox + kMargin + (k + 0.5) / static_cast<double>(order.size()) * width; };
    body += "<g class=\"panel\" id=\"panel-c\">\n";
    body += fmt::format("<text class=\"title\" x=\"{}\" y=\"{}\" font-size=\"13\">{}</text>\n",
                        px(ox + kMargin), px(kPad + 20.0),
                        "C. 95% intervals: direct CI (blue) vs smoothed CrI (red)");
    body += fmt::format(
        "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
        "stroke=\"#404040\"/>\n",
        px(ox + kMargin), px(kPad + kMargin), px(width), px(kPlot));
    body += fmt::format(
        "<line class=\"zero\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\"/>\n",
        px(ox + kMargin), px(a.sy(0.0)), px(ox + kMargin + width), px(a.sy(0.0)));
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4.0;
      body += fmt::format("<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                          px(ox + kMargin - 4.0), px(a.sy(v) + 4.0), format_sig3(v));
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto* d = order[k];
      const auto* p = post[d->region_id];
      const double x = sx(static_cast<double>(k));
      body += fmt::format("<g class=\"region-interval\" data-region=\"{}\">\n", escape_xml(d->region_id));
      if (d->usable()) {
        const double se = d->standard_error();
        body += fmt::format(
            "<line class=\"ci-direct\" data-lower=\"{:.6g}\" data-upper=\"{:.6g}\" x1=\"{}\" "
            "y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#2c7bb6\" stroke-width=\"1.5\"/>\n",
            d->p_hat - 1.96 * se, d->p_hat + 1.96 * se, px(x - 1.5), px(a.sy(d->p_hat - 1.96 * se)),
            px(x - 1.5), px(a.sy(d->p_hat + 1.96 * se)));
        body += fmt::format("<circle class=\"est-direct\" cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#2c7bb6\"/>\n",
                            px(x - 1.5), px(a.sy(d->p_hat)));
      } else {
        body += marker(x - 1.5, a.sy(d->p_hat), true, d->region_id, d->p_hat, d->p_hat, "#7b3294");
      }
      body += fmt::format(
          "<line class=\"ci-posterior\" data-lower=\"{:.6g}\" data-upper=\"{:.6g}\" x1=\"{}\" "
          "y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#d7191c\" stroke-width=\"1.5\"/>\n",
          p->prev_q025, p->prev_q975, px(x + 1.5), px(a.sy(p->prev_q025)), px(x + 1.5),
          px(a.sy(p->prev_q975)));
      body += fmt::format("<circle class=\"est-posterior\" cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#d7191c\"/>\n",
                          px(x + 1.5), px(a.sy(p->prev_mean)));
      body += "</g>\n";
    }
    body += "</g>\n";

    const double total_w = ox + 2 * kMargin + width + kPad;
    const double total_h = kPad + 2 * kMargin + kPlot + kPad;
    std::string out = svg_open(total_w, total_h, meta);
    out += body;
    out += "</svg>\n";
    return out;
  }
}

}  // namespace sae
