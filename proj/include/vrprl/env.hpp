#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrprl/instances.hpp"
#include "vrprl/rng.hpp"

namespace vrprl {

// Decoded-step budget for a CVRP episode with n customers.
inline int step_cap(int n_customers) { return 4 * n_customers + 10; }

// Length charged to an episode that hits the step cap (training only).
double cap_penalty_length(int n_customers);

struct CvrpState {
  std::vector<int> remaining_demand;
  int capacity = 0;
  int load = 0;
  int position = 0;  // customer index, or depot_index() == remaining_demand.size()
  int step = 0;      // decoded actions so far
  std::vector<int> sequence;
  bool split_mode = false;
  bool done = false;    // every demand served and the closing depot leg appended
  bool capped = false;  // step cap reached before completion

  int num_customers() const { return static_cast<int>(remaining_demand.size()); }
  int depot_index() const { return num_customers(); }
  bool at_depot() const { return position == depot_index(); }
  bool terminal() const { return done || capped; }
  bool all_served() const;

  friend bool operator==(const CvrpState&, const CvrpState&) = default;
};

CvrpState reset(const ProblemInstance& instance, bool split_mode = false);

// Entry per node (customers then depot); 1 = feasible.
std::vector<std::uint8_t> feasible_mask(const CvrpState& state);
void feasible_mask(const CvrpState& state, std::vector<std::uint8_t>& out);
bool action_feasible(const CvrpState& state, int action);

struct StepResult {
  CvrpState state;
  bool done = false;
};

StepResult step(const CvrpState& state, int action);
// In-place variant used by the rollout drivers.
void apply_action(CvrpState& state, int action);

// Sum of Euclidean legs along `sequence`; node indices as in ProblemInstance.
double tour_length(const ProblemInstance& instance, const std::vector<int>& sequence);

struct FeasibilityReport {
  bool feasible = true;
  bool all_demand_served = false;
  std::vector<std::string> violations;
};

FeasibilityReport validate_solution(const ProblemInstance& instance,
                                    const std::vector<int>& sequence, bool split_mode);

struct Solution {
  std::string instance_id;
  std::string solver_tag;
  std::vector<int> sequence;
  double total_length = 0.0;
  std::vector<double> per_step_logprob;
  double wall_time_s = 0.0;
  bool split_mode = false;
  bool complete = true;
};

std::string solution_to_json(const Solution& s);
Solution solution_from_json(const std::string& text);

// TSP test-bed: visit every city once, starting from a uniformly drawn city.
struct TspState {
  std::vector<std::uint8_t> visited;
  int position = 0;
  std::vector<int> sequence;
  bool done = false;

  int num_cities() const { return static_cast<int>(visited.size()); }
};

TspState tsp_reset(const ProblemInstance& instance, Rng& rng);
TspState tsp_reset_at(const ProblemInstance& instance, int start);
std::vector<std::uint8_t> tsp_mask(const TspState& state);
void tsp_apply(TspState& state, int action);
std::pair<TspState, bool> tsp_step(const TspState& state, int action);
// Closed tour length, including the leg back to the first city.
double tsp_tour_length(const ProblemInstance& instance, const std::vector<int>& sequence);

}  // namespace vrprl
