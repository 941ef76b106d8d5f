#include "schwarzqp/graph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace swz {

namespace {

void check_node(int v, int n, const char* what) {
  if (v < 0 || v >= n) {
    throw std::invalid_argument(std::string(what) + ": node id " +
                                std::to_string(v) + " out of range [0, " +
                                std::to_string(n) + ")");
  }
}

}  // namespace

NodeGraph::NodeGraph(int num_nodes,
                     const std::vector<std::pair<int, int>>& edges,
                     std::vector<NodeDims> dims)
    : adj_(num_nodes), dims_(std::move(dims)) {
  if (static_cast<int>(dims_.size()) != num_nodes) {
    throw std::invalid_argument("NodeGraph: dims size mismatch");
  }
  for (const auto& d : dims_) {
    if (d.r < 1 || d.mE < 0 || d.mI < 0) {
      throw std::invalid_argument("NodeGraph: require r >= 1, mE, mI >= 0");
    }
  }
  for (auto [i, j] : edges) {
    check_node(i, num_nodes, "NodeGraph edge");
    check_node(j, num_nodes, "NodeGraph edge");
    if (i == j) throw std::invalid_argument("NodeGraph: self-loop rejected");
    adj_[i].push_back(j);
    adj_[j].push_back(i);
  }
  for (auto& nbrs : adj_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  for (int i = 0; i < num_nodes; ++i) num_edges_ += static_cast<int>(adj_[i].size());
  num_edges_ /= 2;
}

NodeGraph NodeGraph::uniform(int num_nodes,
                             const std::vector<std::pair<int, int>>& edges,
                             NodeDims dims) {
  return NodeGraph(num_nodes, edges, std::vector<NodeDims>(num_nodes, dims));
}

void NodeGraph::set_dims(int i, NodeDims d) {
  check_node(i, num_nodes(), "set_dims");
  if (d.r < 1 || d.mE < 0 || d.mI < 0) {
    throw std::invalid_argument("set_dims: require r >= 1, mE, mI >= 0");
  }
  dims_[i] = d;
}

bool NodeGraph::has_edge(int i, int j) const {
  const auto& nb = adj_.at(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::pair<int, int>> NodeGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < num_nodes(); ++i) {
    for (int j : adj_[i]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

NodeSet OverlapPartition::domain() const {
  NodeSet out;
  for (const auto& block : original) out = set_union(out, block);
  return out;
}

void OverlapPartition::validate(const NodeSet& V) const {
  size_t covered = 0;
  for (int k = 0; k < K(); ++k) {
    if (original[k].empty()) {
      throw std::invalid_argument("partition: empty block " + std::to_string(k));
    }
    if (!std::is_sorted(original[k].begin(), original[k].end())) {
      throw std::invalid_argument("partition: block not sorted");
    }
    if (!is_subset(original[k], V)) {
      throw std::invalid_argument("partition: block " + std::to_string(k) +
                                  " not contained in V");
    }
    covered += original[k].size();
  }
  if (domain().size() != V.size() || covered != V.size()) {
    throw std::invalid_argument("partition: blocks do not partition V");
  }
  if (expanded.size() != original.size()) {
    throw std::invalid_argument("partition: expanded/original size mismatch");
  }
  for (int k = 0; k < K(); ++k) {
    if (!is_subset(original[k], expanded[k]) || !is_subset(expanded[k], V)) {
      throw std::invalid_argument(
          "partition: need V_k subset of W_k subset of V");
    }
  }
}

std::vector<int> distances_from_set(const NodeGraph& g, const NodeSet& U,
                                    const NodeSet& S) {
  const int n = g.num_nodes();
  std::vector<char> in_u(n, 0);
  for (int v : U) {
    check_node(v, n, "distances_from_set");
    in_u[v] = 1;
  }
  std::vector<int> dist(n, kUnreachable);
  std::deque<int> queue;
  for (int s : S) {
    if (s < 0 || s >= n || !in_u[s]) {
      throw std::invalid_argument("distances_from_set: source not in U");
    }
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : g.neighbors(v)) {
      if (in_u[w] && dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

int geodesic_distance(const NodeGraph& g, const NodeSet& U, int i, int j) {
  if (!set_contains(U, i) || !set_contains(U, j)) {
    throw std::invalid_argument("geodesic_distance: endpoint not in U");
  }
  if (i == j) return 0;
  auto dist = distances_from_set(g, U, {i});
  return dist[j];
}

int set_distance(const NodeGraph& g, const NodeSet& U, const NodeSet& A,
                 const NodeSet& B) {
  if (A.empty() || B.empty()) {
    throw std::invalid_argument("set_distance: empty set");
  }
  for (int v : A) {
    if (!set_contains(U, v)) {
      throw std::invalid_argument("set_distance: A not subset of U");
    }
  }
  auto dist = distances_from_set(g, U, A);
  int best = kUnreachable;
  for (int v : B) {
    if (!set_contains(U, v)) {
      throw std::invalid_argument("set_distance: B not subset of U");
    }
    best = std::min(best, dist[v]);
  }
  return best;
}

NodeSet coupled_complement(const NodeGraph& g, const NodeSet& V,
                           const NodeSet& U) {
  if (!is_subset(U, V)) {
    throw std::invalid_argument("coupled_complement: U not subset of V");
  }
  std::vector<char> in_v(g.num_nodes(), 0), in_u(g.num_nodes(), 0);
  for (int v : V) in_v[v] = 1;
  for (int v : U) in_u[v] = 1;
  NodeSet out;
  for (int i : U) {
    for (int j : g.neighbors(i)) {
      if (in_v[j] && !in_u[j]) out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

OverlapPartition partition(const NodeGraph& g, int K, std::uint64_t seed) {
  const int n = g.num_nodes();
  if (K < 1 || K > n) {
    throw std::invalid_argument("partition: K must be in [1, |V|]");
  }
  const NodeSet all = all_nodes(g);

  // First seed by a double sweep from the seed-selected start node (a
  // peripheral node), then farthest-point sampling; ties go to the
  // lowest id.
  auto farthest = [&](const std::vector<int>& dist) {
    int best = 0;
    long long best_d = -1;
    for (int v = 0; v < n; ++v) {
      long long d = dist[v] == kUnreachable
                        ? static_cast<long long>(kUnreachable) + 1
                        : dist[v];
      if (d > best_d) {
        best_d = d;
        best = v;
      }
    }
    return best;
  };
  const int start = static_cast<int>(seed % static_cast<std::uint64_t>(n));
  std::vector<int> seeds;
  seeds.push_back(farthest(distances_from_set(g, all, {start})));
  std::vector<int> dist_to_seeds = distances_from_set(g, all, {seeds[0]});
  while (static_cast<int>(seeds.size()) < K) {
    std::vector<int> masked = dist_to_seeds;
    for (int s : seeds) masked[s] = -1;
    int best = farthest(masked);
    seeds.push_back(best);
    auto d_new = distances_from_set(g, all, {best});
    for (int v = 0; v < n; ++v) {
      dist_to_seeds[v] = std::min(dist_to_seeds[v], d_new[v]);
    }
  }

  // Smallest-block-first BFS growth from the seeds.
  std::vector<int> owner(n, -1);
  std::vector<std::deque<int>> frontier(K);
  std::vector<int> size(K, 0);
  for (int k = 0; k < K; ++k) {
    owner[seeds[k]] = k;
    size[k] = 1;
    frontier[k].push_back(seeds[k]);
  }
  int assigned = K;
  while (assigned < n) {
    int k_pick = -1;
    for (int k = 0; k < K; ++k) {
      if (frontier[k].empty()) continue;
      if (k_pick == -1 || size[k] < size[k_pick]) k_pick = k;
    }
    if (k_pick == -1) break;  // disconnected remainder handled below
    bool grew = false;
    while (!frontier[k_pick].empty() && !grew) {
      int v = frontier[k_pick].front();
      bool exhausted = true;
      for (int w : g.neighbors(v)) {
        if (owner[w] == -1) {
          owner[w] = k_pick;
          ++size[k_pick];
          ++assigned;
          frontier[k_pick].push_back(w);
          grew = true;
          exhausted = false;
          break;
        }
      }
      if (exhausted) frontier[k_pick].pop_front();
    }
  }
  // Nodes in components containing no seed: round-robin to the
  // smallest blocks, keeping coverage exact.
  for (int v = 0; v < n; ++v) {
    if (owner[v] == -1) {
      int k_min = 0;
      for (int k = 1; k < K; ++k) {
        if (size[k] < size[k_min]) k_min = k;
      }
      owner[v] = k_min;
      ++size[k_min];
    }
  }

  // Boundary rebalancing: shift nodes across adjacent blocks while
  // any pair differs in size by two or more.
  bool changed = true;
  int guard = 0;
  while (changed && guard++ < 4 * n) {
    changed = false;
    for (int v = 0; v < n && !changed; ++v) {
      const int a = owner[v];
      if (size[a] < 2) continue;
      for (int w : g.neighbors(v)) {
        const int b = owner[w];
        if (b != a && size[a] >= size[b] + 2) {
          owner[v] = b;
          --size[a];
          ++size[b];
          changed = true;
          break;
        }
      }
    }
  }

  OverlapPartition part;
  part.original.assign(K, {});
  for (int v = 0; v < n; ++v) part.original[owner[v]].push_back(v);
  part.expanded = part.original;
  part.omega = 0;
  part.validate(all);
  return part;
}

OverlapPartition expand(const NodeGraph& g, const OverlapPartition& part,
                        int omega) {
  if (omega < 0) throw std::invalid_argument("expand: omega must be >= 0");
  const NodeSet V = part.domain();
  part.validate(V);
  OverlapPartition out;
  out.original = part.original;
  out.omega = omega;
  out.expanded.reserve(part.K());
  for (const auto& block : part.original) {
    auto dist = distances_from_set(g, V, block);
    NodeSet w;
    for (int v : V) {
      if (dist[v] != kUnreachable && dist[v] <= omega) w.push_back(v);
    }
    out.expanded.push_back(std::move(w));
  }
  out.validate(V);
  return out;
}

NodeSet all_nodes(const NodeGraph& g) {
  NodeSet out(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) out[i] = i;
  return out;
}

NodeGraph read_edge_list(std::istream& in) {
  std::string tag;
  int n = 0;
  if (!(in >> tag >> n) || tag != "nodes" || n < 0) {
    throw std::invalid_argument("edge list: expected header 'nodes <N>'");
  }
  std::vector<std::pair<int, int>> edges;
  int i, j;
  while (in >> i >> j) edges.emplace_back(i, j);
  return NodeGraph::uniform(n, edges);
}

void write_edge_list(const NodeGraph& g, std::ostream& out) {
  out << "nodes " << g.num_nodes() << "\n";
  for (auto [i, j] : g.edges()) out << i << " " << j << "\n";
}

NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return out;
}

bool is_subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool set_contains(const NodeSet& s, int v) {
  return std::binary_search(s.begin(), s.end(), v);
}

}  // namespace swz
