#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vrprl/instances.hpp"
#include "vrprl/rng.hpp"

namespace vrprl {

// Continuous-time stochastic VRP: customers arrive as a Poisson process,
// abandon after `patience` time units, and one vehicle moving at `speed`
// serves as much demand as it can before the horizon.
struct SvrpConfig {
  double horizon = 100.0;
  double arrival_rate = 1.0;
  double patience = 5.0;
  double speed = 0.1;
  Coord depot{0.5, 0.5};
  int capacity = 20;
  int demand_lo = 1;
  int demand_hi = 9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SvrpCustomer {
  std::uint64_t id = 0;
  Coord location;
  int demand = 0;  // still unserved
  double arrival_time = 0.0;
};

enum class SvrpActionKind { customer, depot, stay };

struct SvrpAction {
  SvrpActionKind kind = SvrpActionKind::stay;
  std::uint64_t customer_id = 0;

  static SvrpAction customer(std::uint64_t id) { return {SvrpActionKind::customer, id}; }
  static SvrpAction depot() { return {SvrpActionKind::depot, 0}; }
  static SvrpAction stay() { return {SvrpActionKind::stay, 0}; }
  friend bool operator==(const SvrpAction&, const SvrpAction&) = default;
};

struct SvrpEvent {
  double clock = 0.0;
  std::string kind;     // arrival, expire, deliver, refill, decision, stale, horizon
  std::string payload;  // JSON object text
};

struct SvrpState {
  SvrpConfig cfg;
  double clock = 0.0;
  std::vector<SvrpCustomer> active;  // in arrival order
  Coord vehicle_position;
  int load = 0;
  int satisfied_units = 0;
  int arrived_units = 0;
  double next_arrival = std::numeric_limits<double>::infinity();
  std::uint64_t next_id = 0;
  Rng arrivals;  // owns the arrival stream; policies never draw from it
  bool done = false;

  const SvrpCustomer* find(std::uint64_t id) const;
};

struct SvrpStepResult {
  double reward = 0.0;   // units delivered / elapsed
  double elapsed = 0.0;
  int delivered = 0;
  bool stale_action = false;  // chosen customer had already left; treated as stay
  bool done = false;
};

SvrpState svrp_reset(const SvrpConfig& cfg);

// Advances to the next decision epoch: the next arrival, or the vehicle
// reaching its destination, or the horizon, whichever comes first. An
// arrival mid-travel leaves the vehicle at its interpolated position.
// A stale customer action advances the state as "stay" and sets
// stale_action; use svrp_step_checked to get StaleActionError instead.
SvrpStepResult svrp_step(SvrpState& state, const SvrpAction& action,
                         std::vector<SvrpEvent>* trace = nullptr);
SvrpStepResult svrp_step_checked(SvrpState& state, const SvrpAction& action,
                                 std::vector<SvrpEvent>* trace = nullptr);

double travel_time(const SvrpState& state, Coord target);

std::string svrp_event_to_json(const SvrpEvent& e);

}  // namespace vrprl
