#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace swz {

/// Per-node problem dimensions: primal size r, equality rows mE,
/// inequality rows mI.
struct NodeDims {
  int r = 1;
  int mE = 0;
  int mI = 0;
  int m() const { return mE + mI; }
  int n() const { return r + mE + mI; }
  bool operator==(const NodeDims&) const = default;
};

/// Sentinel for "no path inside the induced subgraph".
inline constexpr int kUnreachable = std::numeric_limits<int>::max();

using NodeSet = std::vector<int>;  // sorted, unique node ids

/// Undirected simple graph over dense 0-based node ids, each node
/// carrying the dimensions of its variable/constraint blocks.
///
/// Construction validates symmetry of the adjacency and rejects
/// self-loops; all queries are read-only afterwards and safe for
/// concurrent use.
class NodeGraph {
 public:
  NodeGraph() = default;
  NodeGraph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
            std::vector<NodeDims> dims);

  /// Uniform dims convenience (r per node, no constraints).
  static NodeGraph uniform(int num_nodes,
                           const std::vector<std::pair<int, int>>& edges,
                           NodeDims dims = {1, 0, 0});

  int num_nodes() const { return static_cast<int>(adj_.size()); }
  int num_edges() const { return num_edges_; }
  const std::vector<int>& neighbors(int i) const { return adj_.at(i); }
  const NodeDims& dims(int i) const { return dims_.at(i); }
  void set_dims(int i, NodeDims d);
  bool has_edge(int i, int j) const;

  /// All edges as (i, j) with i < j, lexicographic order.
  std::vector<std::pair<int, int>> edges() const;

 private:
  std::vector<std::vector<int>> adj_;  // sorted neighbor lists
  std::vector<NodeDims> dims_;
  int num_edges_ = 0;
};

/// A non-overlapping cover {V_k} of the node set together with the
/// expanded subdomains {W_k} at overlap size omega.  Freshly built
/// partitions have expanded == original and omega == 0.
struct OverlapPartition {
  std::vector<NodeSet> original;
  std::vector<NodeSet> expanded;
  int omega = 0;

  int K() const { return static_cast<int>(original.size()); }
  /// Union of the original blocks (the node set being solved on).
  NodeSet domain() const;
  /// Throws std::invalid_argument unless {V_k} is a true partition of
  /// V and V_k subset of W_k subset of V for all k.
  void validate(const NodeSet& V) const;
};

/// Shortest-path length between i and j using only edges with both
/// endpoints in U; kUnreachable when no such path exists.
/// Throws std::invalid_argument if i or j lies outside U.
int geodesic_distance(const NodeGraph& g, const NodeSet& U, int i, int j);

/// min over (a, b) in A x B of geodesic_distance(g, U, a, b).
/// Throws std::invalid_argument for empty A or B.
int set_distance(const NodeGraph& g, const NodeSet& U, const NodeSet& A,
                 const NodeSet& B);

/// Distances from every node of U to the source set S (multi-source
/// BFS on the induced subgraph).  Returns a vector indexed by node id
/// with kUnreachable outside U or disconnected from S.
std::vector<int> distances_from_set(const NodeGraph& g, const NodeSet& U,
                                    const NodeSet& S);

/// Nodes of V \ U adjacent to some node of U (the coupled
/// complementary region N_V(U)).
NodeSet coupled_complement(const NodeGraph& g, const NodeSet& V,
                           const NodeSet& U);

/// Greedy balanced partition into K blocks: K seeds by farthest-point
/// sampling, then smallest-block-first BFS growth.  Deterministic for
/// a fixed (graph, K, seed).  Throws on K outside [1, |V|].
OverlapPartition partition(const NodeGraph& g, int K, std::uint64_t seed = 0);

/// Expand each original subdomain to W_k = {i in V : dist_V(i, V_k) <=
/// omega}, with V the union of the original blocks and distances
/// measured on the subgraph induced by V.
OverlapPartition expand(const NodeGraph& g, const OverlapPartition& part,
                        int omega);

NodeSet all_nodes(const NodeGraph& g);

/// Edge-list text format: header "nodes <N>" followed by one "i j"
/// pair per line.  Node dims are not part of the format.
NodeGraph read_edge_list(std::istream& in);
void write_edge_list(const NodeGraph& g, std::ostream& out);

NodeSet set_union(const NodeSet& a, const NodeSet& b);
NodeSet set_difference(const NodeSet& a, const NodeSet& b);
bool is_subset(const NodeSet& a, const NodeSet& b);
bool set_contains(const NodeSet& s, int v);

}  // namespace swz
