#include "vrprl/svrp.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vrprl/errors.hpp"

namespace vrprl {

using nlohmann::json;

void SvrpConfig::validate() const {
  if (horizon < 0.0) throw ConfigError("svrp horizon must be non-negative");
  if (arrival_rate <= 0.0 || patience <= 0.0 || speed <= 0.0)
    throw ConfigError("svrp rate, patience and speed must be positive");
  if (capacity <= 0) throw ConfigError("svrp capacity must be positive");
  if (demand_lo < 1 || demand_lo > demand_hi) throw ConfigError("svrp demand range is empty");
}

const SvrpCustomer* SvrpState::find(std::uint64_t id) const {
  for (const auto& c : active)
    if (c.id == id) return &c;
  return nullptr;
}

namespace {

void log_event(std::vector<SvrpEvent>* trace, double clock, const char* kind, json payload) {
  if (trace) trace->push_back({clock, kind, payload.dump()});
}

void process_arrival(SvrpState& s, std::vector<SvrpEvent>* trace) {
  SvrpCustomer c;
  c.id = s.next_id++;
  c.location = {s.arrivals.uniform(), s.arrivals.uniform()};
  c.demand = s.arrivals.uniform_int(s.cfg.demand_lo, s.cfg.demand_hi);
  c.arrival_time = s.next_arrival;
  s.arrived_units += c.demand;
  log_event(trace, s.clock, "arrival",
            {{"id", c.id}, {"xy", {c.location.x, c.location.y}}, {"demand", c.demand}});
  s.active.push_back(c);
  s.next_arrival += s.arrivals.exponential(s.cfg.arrival_rate);
}

void expire(SvrpState& s, std::vector<SvrpEvent>* trace) {
  auto gone = [&s](const SvrpCustomer& c) { return s.clock - c.arrival_time >= s.cfg.patience; };
  if (trace)
    for (const auto& c : s.active)
      if (gone(c))
        log_event(trace, c.arrival_time + s.cfg.patience, "expire",
                  {{"id", c.id}, {"unserved", c.demand}});
  std::erase_if(s.active, gone);
}

// Serves whatever is at the vehicle's position on arrival at `target`.
int arrive(SvrpState& s, SvrpActionKind kind, std::uint64_t id, std::vector<SvrpEvent>* trace) {
  if (kind == SvrpActionKind::depot) {
    s.load = s.cfg.capacity;
    log_event(trace, s.clock, "refill", {{"load", s.load}});
    return 0;
  }
  auto it = std::find_if(s.active.begin(), s.active.end(),
                         [id](const SvrpCustomer& c) { return c.id == id; });
  if (it == s.active.end()) return 0;  // left while the vehicle was on its way
  const int delivered = std::min(s.load, it->demand);
  it->demand -= delivered;
  s.load -= delivered;
  s.satisfied_units += delivered;
  log_event(trace, s.clock, "deliver", {{"id", id}, {"units", delivered}, {"left", it->demand}});
  if (it->demand == 0) s.active.erase(it);
  return delivered;
}

}  // namespace

SvrpState svrp_reset(const SvrpConfig& cfg) {
  cfg.validate();
  SvrpState s;
  s.cfg = cfg;
  s.vehicle_position = cfg.depot;
  s.load = cfg.capacity;
  s.arrivals = Rng(cfg.seed);
  s.next_arrival = s.arrivals.exponential(cfg.arrival_rate);
  s.done = cfg.horizon <= 0.0;
  return s;
}

double travel_time(const SvrpState& state, Coord target) {
  return distance(state.vehicle_position, target) / state.cfg.speed;
}

SvrpStepResult svrp_step(SvrpState& s, const SvrpAction& action, std::vector<SvrpEvent>* trace) {
  if (s.done) throw TerminalStateError("svrp episode already finished");
  SvrpStepResult r;
  const double t0 = s.clock;
  const int satisfied0 = s.satisfied_units;

  SvrpActionKind kind = action.kind;
  Coord target = s.vehicle_position;
  if (kind == SvrpActionKind::customer) {
    if (const auto* c = s.find(action.customer_id)) {
      target = c->location;
    } else {
      r.stale_action = true;
      kind = SvrpActionKind::stay;
      log_event(trace, s.clock, "stale", {{"id", action.customer_id}});
    }
  } else if (kind == SvrpActionKind::depot) {
    target = s.cfg.depot;
  }
  if (trace) {
    const char* names[] = {"customer", "depot", "stay"};
    log_event(trace, s.clock, "decision",
              {{"action", names[static_cast<int>(kind)]}, {"id", action.customer_id},
               {"load", s.load}, {"xy", {s.vehicle_position.x, s.vehicle_position.y}}});
  }

  bool moving = kind != SvrpActionKind::stay;
  if (moving && travel_time(s, target) == 0.0) {
    // Already there: serve now, then wait for the next arrival like "stay".
    arrive(s, kind, action.customer_id, trace);
    moving = false;
  }

  const double next_event = std::min(s.next_arrival, s.cfg.horizon);
  if (moving) {
    const double travel = travel_time(s, target);
    const double reach = s.clock + travel;
    if (reach <= next_event) {
      s.vehicle_position = target;
      s.clock = reach;
      expire(s, trace);
      arrive(s, kind, action.customer_id, trace);
      if (s.clock == s.next_arrival && s.clock < s.cfg.horizon) process_arrival(s, trace);
    } else {
      const double frac = (next_event - s.clock) / travel;
      s.vehicle_position.x += (target.x - s.vehicle_position.x) * frac;
      s.vehicle_position.y += (target.y - s.vehicle_position.y) * frac;
      s.clock = next_event;
      if (s.clock == s.next_arrival && s.clock < s.cfg.horizon) process_arrival(s, trace);
    }
  } else {
    s.clock = next_event;
    if (s.clock == s.next_arrival && s.clock < s.cfg.horizon) process_arrival(s, trace);
  }
  expire(s, trace);

  if (s.clock >= s.cfg.horizon) {
    s.done = true;
    log_event(trace, s.clock, "horizon", {{"satisfied", s.satisfied_units}, {"arrived", s.arrived_units}});
  }
  r.delivered = s.satisfied_units - satisfied0;
  r.elapsed = s.clock - t0;
  r.reward = r.elapsed > 0.0 ? r.delivered / r.elapsed : 0.0;
  r.done = s.done;
  return r;
}

SvrpStepResult svrp_step_checked(SvrpState& state, const SvrpAction& action,
                                 std::vector<SvrpEvent>* trace) {
  auto r = svrp_step(state, action, trace);
  if (r.stale_action)
    throw StaleActionError("customer " + std::to_string(action.customer_id) +
                           " is no longer active; state advanced without delivery");
  return r;
}

std::string svrp_event_to_json(const SvrpEvent& e) {
  json j;
  j["clock"] = e.clock;
  j["event_kind"] = e.kind;
  j["payload"] = json::parse(e.payload);
  return j.dump();
}

}  // namespace vrprl
