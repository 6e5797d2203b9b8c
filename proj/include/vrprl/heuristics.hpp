#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrprl/env.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/rng.hpp"
#include "vrprl/svrp.hpp"

namespace vrprl {

// Randomized Clarke-Wright savings. For r = 1..R and m = 1..M the merge loop
// runs once, each merge drawn uniformly from the r best feasible mergers;
// the shortest of the R*M results wins. R = M = 1 is the classic greedy
// heuristic. One RNG stream is consumed across all runs in (r, m) order.
struct CwConfig {
  int randomization_depth = 1;       // R
  int randomization_iterations = 1;  // M
  std::uint64_t seed = 0;
};

struct SavingsEntry {
  int i = 0;
  int j = 0;
  double saving = 0.0;
};

// s_ij = c_i0 + c_0j - c_ij for i != j, s_ii = 0; an n x n row-major table.
std::vector<double> savings_table(const ProblemInstance& instance);

Solution clarke_wright(const ProblemInstance& instance, const CwConfig& cfg = {});

// Sweep with `angles` start angles. With randomize = false the single start
// angle is 0 (basic sweep); otherwise each start angle is uniform in [0, 2pi).
struct SweepConfig {
  int angles = 1;
  bool randomize = false;
  std::uint64_t seed = 0;
};

// Polar angle of `p` around `origin` in [0, 2pi); due east is 0, counter-clockwise.
double polar_angle(Coord origin, Coord p);

// Clusters of customer indices, in sweep order, for one start angle.
std::vector<std::vector<int>> sweep_clusters(const ProblemInstance& instance, double start_angle);

Solution sweep(const ProblemInstance& instance, const SweepConfig& cfg = {});

inline constexpr int kTspExactMaxNodes = 15;

struct TspTour {
  std::vector<int> order;  // closed tour starting at point 0, closing leg implied
  double length = 0.0;
};

// Held-Karp; throws SizeError outside 2..15 points.
TspTour tsp_exact(const std::vector<Coord>& points);
// Nearest neighbour then first-improvement 2-opt to a local optimum.
TspTour tsp_two_opt(const std::vector<Coord>& points);

inline constexpr int kCvrpExactMaxCustomers = 12;

struct ExactPartition {
  std::vector<std::vector<int>> routes;  // ordered by lowest customer index
  // Dynamic-program objective: sum over routes (in the order above, folded
  // from the right) of left-to-right leg sums.
  double objective = 0.0;
};

// Optimal single-visit CVRP by subset dynamic programming: Held-Karp route
// cost for every capacity-feasible subset, then a minimum-cost set partition.
ExactPartition exact_partition(const ProblemInstance& instance);
Solution cvrp_exact(const ProblemInstance& instance);

// Depot-separated route list -> node sequence starting and ending at the depot.
std::vector<int> routes_to_sequence(const ProblemInstance& instance,
                                    const std::vector<std::vector<int>>& routes);

enum class SvrpBaseline { random, largest_demand, max_reachable };

SvrpBaseline svrp_baseline_from_string(const std::string& name);
const char* to_string(SvrpBaseline kind);

SvrpAction svrp_baseline(SvrpBaseline kind, const SvrpState& state, Rng& rng);

}  // namespace vrprl
