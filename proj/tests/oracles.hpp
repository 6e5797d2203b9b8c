#pragma once

// Independent reference implementations used as test oracles. They share
// nothing with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "vrprl/instances.hpp"

namespace oracle {

inline double dist(vrprl::Coord a, vrprl::Coord b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline vrprl::Coord node(const vrprl::ProblemInstance& in, int i) {
  return i == in.num_customers() ? in.depot : in.customers[static_cast<std::size_t>(i)].location;
}

inline double path_length(const vrprl::ProblemInstance& in, const std::vector<int>& seq) {
  double s = 0.0;
  for (std::size_t k = 1; k < seq.size(); ++k) s += dist(node(in, seq[k - 1]), node(in, seq[k]));
  return s;
}

// Shortest closed tour by trying every permutation with point 0 fixed.
inline double tsp_brute(const std::vector<vrprl::Coord>& pts) {
  std::vector<int> rest(pts.size() - 1);
  std::iota(rest.begin(), rest.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = dist(pts[0], pts[static_cast<std::size_t>(rest.front())]);
    for (std::size_t k = 1; k < rest.size(); ++k)
      len += dist(pts[static_cast<std::size_t>(rest[k - 1])], pts[static_cast<std::size_t>(rest[k])]);
    len += dist(pts[static_cast<std::size_t>(rest.back())], pts[0]);
    best = std::min(best, len);
  } while (std::next_permutation(rest.begin(), rest.end()));
  return best;
}

// Cheapest depot -> route -> depot over every ordering, legs summed left to
// right from the depot.
inline double route_brute(const vrprl::ProblemInstance& in, std::vector<int> members) {
  std::sort(members.begin(), members.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = dist(in.depot, node(in, members.front()));
    for (std::size_t k = 1; k < members.size(); ++k) len += dist(node(in, members[k - 1]), node(in, members[k]));
    len += dist(node(in, members.back()), in.depot);
    best = std::min(best, len);
  } while (std::next_permutation(members.begin(), members.end()));
  return best;
}

// Optimal single-visit CVRP by enumerating every set partition of the
// customers into capacity-feasible blocks. Blocks are kept in order of their
// lowest customer and the total is folded from the last block backwards so
// the floating-point sum is formed the same way for equal partitions.
inline double cvrp_brute(const vrprl::ProblemInstance& in) {
  const int n = in.num_customers();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> blocks;
  std::function<void(int)> place = [&](int c) {
    if (c == n) {
      double total = 0.0;
      for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) total = route_brute(in, *it) + total;
      best = std::min(best, total);
      return;
    }
    const int d = in.customers[static_cast<std::size_t>(c)].demand;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      int load = 0;
      for (int m : blocks[b]) load += in.customers[static_cast<std::size_t>(m)].demand;
      if (load + d > in.capacity) continue;
      blocks[b].push_back(c);
      place(c + 1);
      blocks[b].pop_back();
    }
    blocks.push_back({c});
    place(c + 1);
    blocks.pop_back();
  };
  place(0);
  return best;
}

}  // namespace oracle
