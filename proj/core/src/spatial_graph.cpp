#include "sae/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sae/error.hpp"

namespace sae {

std::string_view to_string(WeightStyle s) { return s == WeightStyle::B ? "B" : "W"; }

WeightStyle parse_weight_style(std::string_view s) {
  if (s == "B") return WeightStyle::B;
  if (s == "W") return WeightStyle::W;
  throw ValidationError(fmt::format("unknown weighting style '{}' (expected B or W)", s));
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

AdjacencyGraph AdjacencyGraph::from_edges(std::vector<std::string> node_ids,
                                          std::vector<std::pair<std::size_t, std::size_t>> edges,
                                          WeightStyle style) {
  AdjacencyGraph g;
  g.style = style;
  // Re-sort nodes and remap edges so the graph is canonical.
  std::vector<std::size_t> order(node_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return node_ids[a] < node_ids[b]; });
  std::vector<std::size_t> remap(node_ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    remap[order[k]] = k;
    g.node_ids.push_back(node_ids[order[k]]);
    if (k > 0 && g.node_ids[k] == g.node_ids[k - 1])
      throw ConsistencyError(fmt::format("duplicate node '{}'", g.node_ids[k]), g.node_ids[k]);
  }
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (auto [a, b] : edges) {
    if (a >= remap.size() || b >= remap.size()) throw ValidationError("edge references unknown node");
    a = remap[a];
    b = remap[b];
    if (a == b)
      throw ValidationError(fmt::format("self-loop on node '{}'", g.node_ids[a]));
    unique.emplace(std::min(a, b), std::max(a, b));
  }
  g.edges.assign(unique.begin(), unique.end());

  DisjointSets ds(g.size());
  for (auto [a, b] : g.edges) ds.unite(a, b);
  std::map<std::size_t, std::size_t> label;
  g.component.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto [it, fresh] = label.try_emplace(ds.find(i), label.size());
    g.component[i] = it->second;
  }
  g.component_count = label.size();
  return g;
}

std::size_t AdjacencyGraph::index_of(std::string_view id) const {
  auto it = std::lower_bound(node_ids.begin(), node_ids.end(), id);
  if (it == node_ids.end() || *it != id)
    throw ConsistencyError(fmt::format("region '{}' is not in the graph", id), std::string(id));
  return static_cast<std::size_t>(it - node_ids.begin());
}

std::vector<std::size_t> AdjacencyGraph::degrees() const {
  std::vector<std::size_t> d(size(), 0);
  for (auto [a, b] : edges) {
    ++d[a];
    ++d[b];
  }
  return d;
}

std::vector<std::vector<std::size_t>> AdjacencyGraph::component_members() const {
  std::vector<std::vector<std::size_t>> out(component_count);
  for (std::size_t i = 0; i < size(); ++i) out[component[i]].push_back(i);
  return out;
}

// --- adjacency from polygons -----------------------------------------------------------

namespace {

using i128 = __int128;

struct GridPoint {
  long long x = 0;
  long long y = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct Segment {
  GridPoint a, b;
  long long min_x, max_x, min_y, max_y;
  std::size_t region;
};

i128 cross(const GridPoint& o, const GridPoint& p, const GridPoint& q) {
  return static_cast<i128>(p.x - o.x) * (q.y - o.y) - static_cast<i128>(p.y - o.y) * (q.x - o.x);
}

// Collinear segments overlapping in a stretch of positive length.
bool shares_border(const Segment& s, const Segment& t) {
  if (cross(s.a, s.b, t.a) != 0 || cross(s.a, s.b, t.b) != 0) return false;
  if (s.a.x != s.b.x) {
    const long long lo = std::max(s.min_x, t.min_x), hi = std::min(s.max_x, t.max_x);
    return hi > lo;
  }
  const long long lo = std::max(s.min_y, t.min_y), hi = std::min(s.max_y, t.max_y);
  return hi > lo;
}

}  // namespace

AdjacencyGraph build_adjacency(const std::vector<RegionBoundary>& boundaries, double tolerance,
                               WeightStyle style) {
  if (boundaries.size() < 2) throw ValidationError("build_adjacency: need at least 2 regions");
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance))
    throw ValidationError("build_adjacency: tolerance must be finite and non-negative");
  // Zero tolerance means exact matching; snap to a grid far below any
  // meaningful coordinate precision so integer geometry still applies.
  const double quantum = std::max(tolerance, 1e-12);

  std::vector<const RegionBoundary*> sorted;
  for (const auto& b : boundaries) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->region_id < b->region_id; });

  std::vector<std::string> ids;
  std::vector<Segment> segments;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const auto& b = *sorted[r];
    ids.push_back(b.region_id);
    std::size_t rings = 0;
    for (const auto& poly : b.polygons) {
      for (const auto& ring : poly.rings) {
        ++rings;
        for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
          GridPoint a{std::llround(ring[k].lon / quantum), std::llround(ring[k].lat / quantum)};
          GridPoint c{std::llround(ring[k + 1].lon / quantum),
                      std::llround(ring[k + 1].lat / quantum)};
          if (a == c) continue;
          segments.push_back({a, c, std::min(a.x, c.x), std::max(a.x, c.x), std::min(a.y, c.y),
                              std::max(a.y, c.y), r});
        }
      }
    }
    if (rings == 0)
      throw ValidationError(fmt::format("region '{}' has degenerate geometry (no rings)", b.region_id));
  }

  std::sort(segments.begin(), segments.end(), [](const Segment& s, const Segment& t) {
    return std::tie(s.min_x, s.max_x, s.min_y, s.max_y, s.region) <
           std::tie(t.min_x, t.max_x, t.min_y, t.max_y, t.region);
  });

  // Sweep along x keeping the segments whose x-extent is still open.
  std::set<std::pair<std::size_t, std::size_t>> found;
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const Segment& s = segments[k];
    std::erase_if(active, [&](std::size_t idx) { return segments[idx].max_x < s.min_x; });
    for (std::size_t idx : active) {
      const Segment& t = segments[idx];
      if (t.region == s.region) continue;
      if (t.max_y < s.min_y || s.max_y < t.min_y) continue;
      auto key = std::minmax(t.region, s.region);
      if (found.contains(key)) continue;
      if (shares_border(s, t)) found.insert(key);
    }
    active.push_back(k);
  }

  return AdjacencyGraph::from_edges(std::move(ids), {found.begin(), found.end()}, style);
}

// --- ICAR precision --------------------------------------------------------------------

IcarPrecision icar_precision(const AdjacencyGraph& graph) {
  IcarPrecision q;
  q.dimension = graph.size();
  q.style = graph.style;
  q.component = graph.component;
  q.component_count = graph.component_count;
  q.rank = q.dimension - q.component_count;
  q.diagonal.assign(q.dimension, 0.0);
  q.neighbors.assign(q.dimension, {});

  const auto deg = graph.degrees();
  for (auto [a, b] : graph.edges) {
    const double w = graph.style == WeightStyle::B
                         ? 1.0
                         : 0.5 * (1.0 / static_cast<double>(deg[a]) + 1.0 / static_cast<double>(deg[b]));
    q.edges.push_back({a, b, w});
    q.diagonal[a] += w;
    q.diagonal[b] += w;
    q.neighbors[a].emplace_back(b, w);
    q.neighbors[b].emplace_back(a, w);
  }
  return q;
}

Eigen::MatrixXd IcarPrecision::dense() const {
  const auto n = static_cast<Eigen::Index>(dimension);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < dimension; ++i) m(i, i) = diagonal[i];
  for (const auto& e : edges) {
    m(e.i, e.j) -= e.weight;
    m(e.j, e.i) -= e.weight;
  }
  return m;
}

double quadratic_form(const IcarPrecision& q, std::span<const double> x) {
  if (x.size() != q.dimension)
    throw ValidationError(
        fmt::format("quadratic_form: vector length {} != dimension {}", x.size(), q.dimension));
  double acc = 0.0;
  for (const auto& e : q.edges) {
    const double d = x[e.i] - x[e.j];
    acc += e.weight * d * d;
  }
  return acc;
}

// --- text format -------------------------------------------------------------------------

void write_graph(std::ostream& out, const AdjacencyGraph& g, const ArtifactMetadata* meta) {
  if (meta) out << "# " << meta->line() << '\n';
  out << "style\t" << to_string(g.style) << '\n';
  for (const auto& id : g.node_ids) out << "node\t" << id << '\n';
  for (auto [a, b] : g.edges) out << "edge\t" << g.node_ids[a] << '\t' << g.node_ids[b] << '\n';
  const auto members = g.component_members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    out << "component\t" << c;
    for (auto i : members[c]) out << '\t' << g.node_ids[i];
    out << '\n';
  }
}

AdjacencyGraph read_graph(std::istream& in) {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> named_edges;
  std::vector<std::vector<std::string>> components;
  std::optional<WeightStyle> style;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, '\t');) f.push_back(tok);
    const std::string& kind = f.front();
    if (kind == "style" && f.size() == 2) {
      style = parse_weight_style(f[1]);
    } else if (kind == "node" && f.size() == 2) {
      nodes.push_back(f[1]);
    } else if (kind == "edge" && f.size() == 3) {
      named_edges.emplace_back(f[1], f[2]);
    } else if (kind == "component" && f.size() >= 3) {
      components.emplace_back(f.begin() + 2, f.end());
    } else {
      throw RowError(fmt::format("graph file line {}: unrecognized record '{}'", lineno, line), lineno);
    }
  }
  if (!style) throw ValidationError("graph file: missing style line");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i], i);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [a, b] : named_edges) {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end())
      throw ConsistencyError(fmt::format("edge {}-{} references an unknown node", a, b),
                             ia == index.end() ? a : b);
    edges.emplace_back(ia->second, ib->second);
  }
  auto g = AdjacencyGraph::from_edges(std::move(nodes), std::move(edges), *style);

  if (!components.empty()) {
    auto expected = g.component_members();
    bool same = expected.size() == components.size();
    for (std::size_t c = 0; same && c < components.size(); ++c) {
      std::vector<std::string> want;
      for (auto i : expected[c]) want.push_back(g.node_ids[i]);
      auto got = components[c];
      std::sort(got.begin(), got.end());
      same = want == got;
    }
    if (!same) throw ValidationError("graph file: component listing disagrees with the edges");
  }
  return g;
}

}  // namespace sae
