#pragma once

#include <unordered_map>
#include <vector>

namespace adrive {

// Directed wait-for graph: edge i -> j means vehicle i is blocked by j.
struct WaitForGraph {
  std::vector<int> nodes;
  std::vector<std::pair<int, int>> edges;

  void add_node(int id);
  void add_edge(int from, int to);  // adds the nodes as needed
  bool has_node(int id) const;
};

// Strongly connected components with >= 2 nodes whose members have all
// waited at least `threshold`. Members sorted ascending; groups ordered by
// smallest member, so output is deterministic.
std::vector<std::vector<int>> detect_deadlock_groups(
    const WaitForGraph& graph, const std::unordered_map<int, double>& wait_times,
    double threshold);

// Adds every node with a directed path into `group` (vehicles chained
// behind the cycle); result sorted ascending.
std::vector<int> expand_with_chain(const WaitForGraph& graph,
                                   const std::vector<int>& group);

}  // namespace adrive
