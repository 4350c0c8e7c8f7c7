#include "adrive/waitgraph.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace adrive {

void WaitForGraph::add_node(int id) {
  if (!has_node(id)) nodes.push_back(id);
}

void WaitForGraph::add_edge(int from, int to) {
  add_node(from);
  add_node(to);
  if (std::find(edges.begin(), edges.end(), std::make_pair(from, to)) == edges.end())
    edges.emplace_back(from, to);
}

bool WaitForGraph::has_node(int id) const {
  return std::find(nodes.begin(), nodes.end(), id) != nodes.end();
}

namespace {

// Iterative Tarjan over a compacted index space.
std::vector<std::vector<int>> strongly_connected(const WaitForGraph& g) {
  std::map<int, int> index_of;
  std::vector<int> ids;
  for (int id : g.nodes)
    if (!index_of.count(id)) {
      index_of[id] = static_cast<int>(ids.size());
      ids.push_back(id);
    }
  const int n = static_cast<int>(ids.size());
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : g.edges) adj[index_of.at(a)].push_back(index_of.at(b));

  std::vector<int> low(n, -1), num(n, -1), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0, ncomp = 0;

  struct Frame {
    int v;
    std::size_t next_edge;
  };
  for (int root = 0; root < n; ++root) {
    if (num[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    while (!call.empty()) {
      Frame& f = call.back();
      const int v = f.v;
      if (f.next_edge == 0) {
        num[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (f.next_edge < adj[v].size()) {
        const int w = adj[v][f.next_edge++];
        if (num[w] == -1) {
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], num[w]);
      }
      if (descended) continue;
      if (low[v] == num[v]) {
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = ncomp;
          if (w == v) break;
        }
        ++ncomp;
      }
      call.pop_back();
      if (!call.empty()) {
        const int parent = call.back().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }

  std::vector<std::vector<int>> groups(ncomp);
  for (int v = 0; v < n; ++v) groups[comp[v]].push_back(ids[v]);
  return groups;
}

}  // namespace

std::vector<std::vector<int>> detect_deadlock_groups(
    const WaitForGraph& graph, const std::unordered_map<int, double>& wait_times,
    double threshold) {
  std::vector<std::vector<int>> out;
  for (auto& group : strongly_connected(graph)) {
    if (group.size() < 2) continue;
    bool all_waited = true;
    for (int id : group) {
      auto it = wait_times.find(id);
      if (it == wait_times.end() || it->second < threshold) {
        all_waited = false;
        break;
      }
    }
    if (!all_waited) continue;
    std::sort(group.begin(), group.end());
    out.push_back(std::move(group));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

std::vector<int> expand_with_chain(const WaitForGraph& graph,
                                   const std::vector<int>& group) {
  std::set<int> members(group.begin(), group.end());
  bool grew = true;
  while (grew) {
    grew = false;
    for (auto [from, to] : graph.edges) {
      if (members.count(to) && !members.count(from) && members.insert(from).second)
        grew = true;
    }
  }
  return {members.begin(), members.end()};
}

}  // namespace adrive
