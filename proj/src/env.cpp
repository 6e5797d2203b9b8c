#include "vrprl/env.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vrprl/errors.hpp"

namespace vrprl {

double cap_penalty_length(int n_customers) { return 2.0 * n_customers * std::sqrt(2.0); }

bool CvrpState::all_served() const {
  return std::all_of(remaining_demand.begin(), remaining_demand.end(), [](int d) { return d == 0; });
}

CvrpState reset(const ProblemInstance& instance, bool split_mode) {
  if (instance.kind != ProblemKind::cvrp) throw KindError("reset expects a cvrp instance");
  instance.validate();
  CvrpState s;
  s.remaining_demand.reserve(instance.customers.size());
  for (const auto& c : instance.customers) s.remaining_demand.push_back(c.demand);
  s.capacity = instance.capacity;
  s.load = instance.capacity;
  s.position = instance.depot_index();
  s.sequence = {instance.depot_index()};
  s.split_mode = split_mode;
  return s;
}

void feasible_mask(const CvrpState& state, std::vector<std::uint8_t>& out) {
  if (state.done || state.all_served()) throw TerminalStateError("no actions in a terminal state");
  const int n = state.num_customers();
  out.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    const int d = state.remaining_demand[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        d > 0 && state.load > 0 && (state.split_mode || d <= state.load) ? 1 : 0;
  }
  out[static_cast<std::size_t>(n)] = state.at_depot() ? 0 : 1;
}

bool action_feasible(const CvrpState& s, int action) {
  if (s.done || s.all_served()) throw TerminalStateError("no actions in a terminal state");
  const int n = s.num_customers();
  if (action == n) return !s.at_depot();
  const int d = s.remaining_demand[static_cast<std::size_t>(action)];
  return d > 0 && s.load > 0 && (s.split_mode || d <= s.load);
}

std::vector<std::uint8_t> feasible_mask(const CvrpState& state) {
  std::vector<std::uint8_t> m;
  feasible_mask(state, m);
  return m;
}

void apply_action(CvrpState& s, int action) {
  if (s.terminal()) throw TerminalStateError("step on a terminal state");
  const int n = s.num_customers();
  if (action < 0 || action > n)
    throw ContractViolation("action " + std::to_string(action) + " is not a node index");
  if (!action_feasible(s, action))
    throw ContractViolation("action " + std::to_string(action) + " is masked");

  if (action == n) {
    s.load = s.capacity;
  } else {
    int& d = s.remaining_demand[static_cast<std::size_t>(action)];
    const int delivered = std::min(d, s.load);
    d -= delivered;
    s.load -= delivered;
  }
  s.position = action;
  s.sequence.push_back(action);
  ++s.step;

  if (s.all_served()) {
    if (!s.at_depot()) {
      s.sequence.push_back(n);
      s.position = n;
      s.load = s.capacity;
    }
    s.done = true;
  } else if (s.step >= step_cap(n)) {
    s.capped = true;
  }
}

StepResult step(const CvrpState& state, int action) {
  StepResult r{state, false};
  apply_action(r.state, action);
  r.done = r.state.done;
  return r;
}

double tour_length(const ProblemInstance& instance, const std::vector<int>& sequence) {
  double total = 0.0;
  for (std::size_t k = 1; k < sequence.size(); ++k)
    total += distance(instance.location(sequence[k - 1]), instance.location(sequence[k]));
  if (sequence.size() == 1) (void)instance.location(sequence[0]);
  return total;
}

FeasibilityReport validate_solution(const ProblemInstance& instance,
                                    const std::vector<int>& sequence, bool split_mode) {
  FeasibilityReport rep;
  auto fail = [&rep](std::string msg) {
    rep.feasible = false;
    rep.violations.push_back(std::move(msg));
  };
  if (instance.kind != ProblemKind::cvrp) {
    fail("instance is not cvrp");
    return rep;
  }
  const int n = instance.num_customers();
  const int depot = instance.depot_index();
  if (sequence.empty() || sequence.front() != depot) fail("sequence does not start at the depot");
  if (sequence.empty() || sequence.back() != depot) fail("sequence does not end at the depot");

  std::vector<int> remaining;
  for (const auto& c : instance.customers) remaining.push_back(c.demand);
  std::vector<int> visits(static_cast<std::size_t>(n), 0);
  int load = instance.capacity;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    const int node = sequence[k];
    if (node < 0 || node > n) {
      fail("step " + std::to_string(k) + ": node " + std::to_string(node) + " out of range");
      continue;
    }
    if (node == depot) {
      load = instance.capacity;
      continue;
    }
    auto& d = remaining[static_cast<std::size_t>(node)];
    const std::string where = "step " + std::to_string(k) + ", customer " + std::to_string(node);
    if (++visits[static_cast<std::size_t>(node)] > 1 && !split_mode)
      fail(where + ": visited more than once");
    if (d == 0) fail(where + ": visited with no remaining demand");
    if (load == 0) fail(where + ": reached with an empty vehicle");
    if (!split_mode && d > load) fail(where + ": demand split across visits");
    const int delivered = std::min(d, load);
    d -= delivered;
    load -= delivered;
  }
  rep.all_demand_served = std::all_of(remaining.begin(), remaining.end(), [](int d) { return d == 0; });
  if (!rep.all_demand_served) {
    for (int i = 0; i < n; ++i)
      if (remaining[static_cast<std::size_t>(i)] > 0)
        fail("customer " + std::to_string(i) + " left with demand " +
             std::to_string(remaining[static_cast<std::size_t>(i)]));
  }
  return rep;
}

std::string solution_to_json(const Solution& s) {
  nlohmann::json j;
  j["instance_id"] = s.instance_id;
  j["solver_tag"] = s.solver_tag;
  j["sequence"] = s.sequence;
  j["total_length"] = s.total_length;
  j["wall_time_s"] = s.wall_time_s;
  j["split_mode"] = s.split_mode;
  if (!s.per_step_logprob.empty()) j["per_step_logprob"] = s.per_step_logprob;
  if (!s.complete) j["complete"] = false;
  return j.dump();
}

Solution solution_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Solution s;
    s.instance_id = j.at("instance_id").get<std::string>();
    s.solver_tag = j.at("solver_tag").get<std::string>();
    s.sequence = j.at("sequence").get<std::vector<int>>();
    s.total_length = j.at("total_length").get<double>();
    s.wall_time_s = j.at("wall_time_s").get<double>();
    s.split_mode = j.at("split_mode").get<bool>();
    if (j.contains("per_step_logprob")) s.per_step_logprob = j["per_step_logprob"].get<std::vector<double>>();
    if (j.contains("complete")) s.complete = j["complete"].get<bool>();
    return s;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 1);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(e.what());
  }
}

TspState tsp_reset_at(const ProblemInstance& instance, int start) {
  if (instance.kind != ProblemKind::tsp) throw KindError("tsp_reset expects a tsp instance");
  instance.validate();
  const int n = instance.num_customers();
  if (start < 0 || start >= n) throw ContractViolation("start city out of range");
  TspState s;
  s.visited.assign(static_cast<std::size_t>(n), 0);
  s.visited[static_cast<std::size_t>(start)] = 1;
  s.position = start;
  s.sequence = {start};
  s.done = n == 1;
  return s;
}

TspState tsp_reset(const ProblemInstance& instance, Rng& rng) {
  return tsp_reset_at(instance, static_cast<int>(rng.below(instance.customers.size())));
}

std::vector<std::uint8_t> tsp_mask(const TspState& state) {
  if (state.done) throw TerminalStateError("no actions in a terminal state");
  std::vector<std::uint8_t> m(state.visited.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = state.visited[i] ? 0 : 1;
  return m;
}

void tsp_apply(TspState& s, int action) {
  if (s.done) throw TerminalStateError("step on a terminal state");
  if (action < 0 || action >= s.num_cities() || s.visited[static_cast<std::size_t>(action)])
    throw ContractViolation("action " + std::to_string(action) + " is masked");
  s.visited[static_cast<std::size_t>(action)] = 1;
  s.position = action;
  s.sequence.push_back(action);
  s.done = static_cast<int>(s.sequence.size()) == s.num_cities();
}

std::pair<TspState, bool> tsp_step(const TspState& state, int action) {
  TspState next = state;
  tsp_apply(next, action);
  return {next, next.done};
}

double tsp_tour_length(const ProblemInstance& instance, const std::vector<int>& sequence) {
  if (sequence.empty()) return 0.0;
  std::vector<int> closed = sequence;
  closed.push_back(sequence.front());
  return tour_length(instance, closed);
}

}  // namespace vrprl
