#include "vrprl/heuristics.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

#include "vrprl/errors.hpp"

namespace vrprl {

namespace {

void require_cvrp(const ProblemInstance& instance) {
  if (instance.kind != ProblemKind::cvrp) throw KindError("expected a cvrp instance");
  instance.validate();
}

Solution make_solution(const ProblemInstance& instance, std::vector<int> sequence, std::string tag) {
  Solution s;
  s.instance_id = instance.id;
  s.solver_tag = std::move(tag);
  s.total_length = tour_length(instance, sequence);
  s.sequence = std::move(sequence);
  return s;
}

}  // namespace

std::vector<int> routes_to_sequence(const ProblemInstance& instance,
                                    const std::vector<std::vector<int>>& routes) {
  const int depot = instance.depot_index();
  std::vector<int> seq{depot};
  for (const auto& r : routes) {
    if (r.empty()) continue;
    seq.insert(seq.end(), r.begin(), r.end());
    seq.push_back(depot);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Clarke-Wright

std::vector<double> savings_table(const ProblemInstance& instance) {
  const int n = instance.num_customers();
  std::vector<double> s(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) {
    const Coord ci = instance.customers[static_cast<std::size_t>(i)].location;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Coord cj = instance.customers[static_cast<std::size_t>(j)].location;
      s[static_cast<std::size_t>(i * n + j)] =
          distance(ci, instance.depot) + distance(instance.depot, cj) - distance(ci, cj);
    }
  }
  return s;
}

namespace {

std::vector<std::vector<int>> cw_run(const ProblemInstance& inst, const std::vector<double>& sav,
                                     int depth, Rng& rng) {
  const int n = inst.num_customers();
  std::vector<std::deque<int>> routes(static_cast<std::size_t>(n));
  std::vector<int> route_of(static_cast<std::size_t>(n));
  std::vector<int> demand(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    routes[static_cast<std::size_t>(i)] = {i};
    route_of[static_cast<std::size_t>(i)] = i;
    demand[static_cast<std::size_t>(i)] = inst.customers[static_cast<std::size_t>(i)].demand;
  }
  auto endpoint = [&](int c) {
    const auto& r = routes[static_cast<std::size_t>(route_of[static_cast<std::size_t>(c)])];
    return r.front() == c || r.back() == c;
  };

  std::vector<SavingsEntry> cand;
  for (;;) {
    cand.clear();
    for (int i = 0; i < n; ++i) {
      if (!endpoint(i)) continue;
      for (int j = i + 1; j < n; ++j) {
        const double s = sav[static_cast<std::size_t>(i * n + j)];
        if (s <= 0.0) continue;
        const int ri = route_of[static_cast<std::size_t>(i)];
        const int rj = route_of[static_cast<std::size_t>(j)];
        if (ri == rj || !endpoint(j)) continue;
        if (demand[static_cast<std::size_t>(ri)] + demand[static_cast<std::size_t>(rj)] > inst.capacity)
          continue;
        cand.push_back({i, j, s});
      }
    }
    if (cand.empty()) break;
    // (i, j) are generated in lexicographic order, so a stable sort keeps it
    // as the tie-break among equal savings.
    std::stable_sort(cand.begin(), cand.end(),
                     [](const SavingsEntry& a, const SavingsEntry& b) { return a.saving > b.saving; });
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(depth), cand.size());
    const SavingsEntry pick = cand[rng.below(k)];

    const int ri = route_of[static_cast<std::size_t>(pick.i)];
    const int rj = route_of[static_cast<std::size_t>(pick.j)];
    auto& a = routes[static_cast<std::size_t>(ri)];
    auto& b = routes[static_cast<std::size_t>(rj)];
    // Replace (i,0) and (0,j) with (i,j): i at the tail of a, j at the head of b.
    if (a.back() != pick.i) std::reverse(a.begin(), a.end());
    if (b.front() != pick.j) std::reverse(b.begin(), b.end());
    for (int c : b) {
      a.push_back(c);
      route_of[static_cast<std::size_t>(c)] = ri;
    }
    b.clear();
    demand[static_cast<std::size_t>(ri)] += demand[static_cast<std::size_t>(rj)];
    demand[static_cast<std::size_t>(rj)] = 0;
  }

  std::vector<std::vector<int>> out;
  for (const auto& r : routes)
    if (!r.empty()) out.emplace_back(r.begin(), r.end());
  return out;
}

}  // namespace

Solution clarke_wright(const ProblemInstance& instance, const CwConfig& cfg) {
  require_cvrp(instance);
  if (cfg.randomization_depth < 1 || cfg.randomization_iterations < 1)
    throw ConfigError("clarke_wright needs R >= 1 and M >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const auto sav = savings_table(instance);
  Rng rng(cfg.seed);

  std::vector<int> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= cfg.randomization_depth; ++r) {
    for (int m = 1; m <= cfg.randomization_iterations; ++m) {
      auto seq = routes_to_sequence(instance, cw_run(instance, sav, r, rng));
      const double len = tour_length(instance, seq);
      if (len < best_len) {
        best_len = len;
        best = std::move(seq);
      }
    }
  }
  const bool greedy = cfg.randomization_depth == 1 && cfg.randomization_iterations == 1;
  auto sol = make_solution(instance, std::move(best),
                           greedy ? "cw-greedy"
                                  : "cw-rnd(" + std::to_string(cfg.randomization_depth) + "," +
                                        std::to_string(cfg.randomization_iterations) + ")");
  sol.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

// ---------------------------------------------------------------------------
// TSP subsolvers

TspTour tsp_exact(const std::vector<Coord>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 2 || n > kTspExactMaxNodes)
    throw SizeError("tsp_exact handles 2.." + std::to_string(kTspExactMaxNodes) + " points, got " +
                    std::to_string(n));
  // Point 0 is the fixed start; subsets range over points 1..n-1.
  const int m = n - 1;
  const std::size_t full = std::size_t{1} << m;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(full * static_cast<std::size_t>(m), inf);
  std::vector<std::int8_t> parent(full * static_cast<std::size_t>(m), -1);
  auto at = [m](std::size_t mask, int j) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(j); };

  for (int j = 0; j < m; ++j) dp[at(std::size_t{1} << j, j)] = distance(pts[0], pts[static_cast<std::size_t>(j + 1)]);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (int j = 0; j < m; ++j) {
      if (!(mask >> j & 1U)) continue;
      const double cur = dp[at(mask, j)];
      if (cur == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1U) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double cand = cur + distance(pts[static_cast<std::size_t>(j + 1)], pts[static_cast<std::size_t>(k + 1)]);
        if (cand < dp[at(next, k)]) {
          dp[at(next, k)] = cand;
          parent[at(next, k)] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  double best = inf;
  int last = 0;
  for (int j = 0; j < m; ++j) {
    const double cand = dp[at(full - 1, j)] + distance(pts[static_cast<std::size_t>(j + 1)], pts[0]);
    if (cand < best) {
      best = cand;
      last = j;
    }
  }
  std::vector<int> rev;
  std::size_t mask = full - 1;
  for (int j = last; j >= 0;) {
    rev.push_back(j + 1);
    const int p = parent[at(mask, j)];
    mask &= ~(std::size_t{1} << j);
    j = p;
  }
  TspTour t;
  t.order.push_back(0);
  t.order.insert(t.order.end(), rev.rbegin(), rev.rend());
  t.length = best;
  return t;
}

namespace {

double closed_length(const std::vector<Coord>& pts, const std::vector<int>& order) {
  double len = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k)
    len += distance(pts[static_cast<std::size_t>(order[k])],
                    pts[static_cast<std::size_t>(order[(k + 1) % order.size()])]);
  return len;
}

}  // namespace

TspTour tsp_two_opt(const std::vector<Coord>& pts) {
  const int n = static_cast<int>(pts.size());
  TspTour t;
  if (n == 0) return t;
  std::vector<std::uint8_t> used(static_cast<std::size_t>(n), 0);
  t.order.push_back(0);
  used[0] = 1;
  for (int step = 1; step < n; ++step) {
    const Coord cur = pts[static_cast<std::size_t>(t.order.back())];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      const double d = distance(cur, pts[static_cast<std::size_t>(k)]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    t.order.push_back(best);
  }
  auto p = [&](int pos) { return pts[static_cast<std::size_t>(t.order[static_cast<std::size_t>(pos % n)])]; };
  bool improved = n >= 4;
  while (improved) {
    improved = false;
    for (int i = 0; i < n - 2 && !improved; ++i) {
      for (int j = i + 2; j < n && !improved; ++j) {
        if (i == 0 && j == n - 1) continue;
        const double delta = distance(p(i), p(j)) + distance(p(i + 1), p(j + 1)) -
                             distance(p(i), p(i + 1)) - distance(p(j), p(j + 1));
        if (delta < -1e-12) {
          std::reverse(t.order.begin() + i + 1, t.order.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  t.length = closed_length(pts, t.order);
  return t;
}

// ---------------------------------------------------------------------------
// Sweep

double polar_angle(Coord origin, Coord p) {
  double a = std::atan2(p.y - origin.y, p.x - origin.x);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  if (a >= 2.0 * std::numbers::pi) a = 0.0;
  return a;
}

std::vector<std::vector<int>> sweep_clusters(const ProblemInstance& inst, double start_angle) {
  require_cvrp(inst);
  const int n = inst.num_customers();
  struct Key {
    double rel;
    double radius;
    int idx;
  };
  std::vector<Key> keys;
  keys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Coord c = inst.customers[static_cast<std::size_t>(i)].location;
    double rel = polar_angle(inst.depot, c) - start_angle;
    while (rel < 0.0) rel += 2.0 * std::numbers::pi;
    keys.push_back({rel, distance(inst.depot, c), i});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.rel != b.rel) return a.rel < b.rel;
    if (a.radius != b.radius) return a.radius < b.radius;
    return a.idx < b.idx;
  });

  std::vector<std::vector<int>> clusters(1);
  int load = inst.capacity;
  for (const auto& k : keys) {
    const int d = inst.customers[static_cast<std::size_t>(k.idx)].demand;
    if (d > load) {
      clusters.emplace_back();
      load = inst.capacity;
    }
    clusters.back().push_back(k.idx);
    load -= d;
  }
  return clusters;
}

namespace {

std::vector<int> route_for_cluster(const ProblemInstance& inst, const std::vector<int>& cluster) {
  std::vector<Coord> pts{inst.depot};
  for (int c : cluster) pts.push_back(inst.customers[static_cast<std::size_t>(c)].location);
  const TspTour tour = static_cast<int>(pts.size()) <= kTspExactMaxNodes ? tsp_exact(pts) : tsp_two_opt(pts);
  std::vector<int> route;
  for (std::size_t k = 1; k < tour.order.size(); ++k)
    route.push_back(cluster[static_cast<std::size_t>(tour.order[k] - 1)]);
  return route;
}

}  // namespace

Solution sweep(const ProblemInstance& instance, const SweepConfig& cfg) {
  require_cvrp(instance);
  if (cfg.angles < 1) throw ConfigError("sweep needs at least one start angle");
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  std::vector<int> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.angles; ++r) {
    const double alpha = cfg.randomize ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
    std::vector<std::vector<int>> routes;
    for (const auto& cl : sweep_clusters(instance, alpha)) routes.push_back(route_for_cluster(instance, cl));
    auto seq = routes_to_sequence(instance, routes);
    const double len = tour_length(instance, seq);
    if (len < best_len) {
      best_len = len;
      best = std::move(seq);
    }
    if (!cfg.randomize) break;
  }
  auto sol = make_solution(instance, std::move(best),
                           cfg.randomize ? "sw-rnd(" + std::to_string(cfg.angles) + ")" : "sw-basic");
  sol.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

// ---------------------------------------------------------------------------
// Exact CVRP

ExactPartition exact_partition(const ProblemInstance& inst) {
  require_cvrp(inst);
  const int n = inst.num_customers();
  if (n > kCvrpExactMaxCustomers)
    throw SizeError("cvrp_exact handles up to " + std::to_string(kCvrpExactMaxCustomers) +
                    " customers, got " + std::to_string(n));
  const std::size_t full = std::size_t{1} << n;
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto loc = [&inst](int i) { return inst.customers[static_cast<std::size_t>(i)].location; };

  std::vector<int> demand(full, 0);
  for (std::size_t mask = 1; mask < full; ++mask) {
    const int low = std::countr_zero(mask);
    demand[mask] = demand[mask & (mask - 1)] + inst.customers[static_cast<std::size_t>(low)].demand;
  }

  // path[mask][j]: shortest depot -> ... -> j through exactly `mask`.
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> path(full * nn, inf);
  std::vector<std::int8_t> prev(full * nn, -1);
  for (int j = 0; j < n; ++j) path[(std::size_t{1} << j) * nn + static_cast<std::size_t>(j)] = distance(inst.depot, loc(j));
  for (std::size_t mask = 1; mask < full; ++mask) {
    if (demand[mask] > inst.capacity) continue;
    for (int j = 0; j < n; ++j) {
      const double cur = path[mask * nn + static_cast<std::size_t>(j)];
      if (cur == inf) continue;
      for (int k = 0; k < n; ++k) {
        if (mask >> k & 1U) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        if (demand[next] > inst.capacity) continue;
        const double cand = cur + distance(loc(j), loc(k));
        if (cand < path[next * nn + static_cast<std::size_t>(k)]) {
          path[next * nn + static_cast<std::size_t>(k)] = cand;
          prev[next * nn + static_cast<std::size_t>(k)] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  std::vector<double> route_cost(full, inf);
  std::vector<std::int8_t> route_last(full, -1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    if (demand[mask] > inst.capacity) continue;
    for (int j = 0; j < n; ++j) {
      const double cur = path[mask * nn + static_cast<std::size_t>(j)];
      if (cur == inf) continue;
      const double cand = cur + distance(loc(j), inst.depot);
      if (cand < route_cost[mask]) {
        route_cost[mask] = cand;
        route_last[mask] = static_cast<std::int8_t>(j);
      }
    }
  }

  // best[mask]: cheapest partition of `mask`; the block holding the lowest
  // customer is chosen first, so blocks come out ordered by lowest member.
  std::vector<double> best(full, inf);
  std::vector<std::size_t> choice(full, 0);
  best[0] = 0.0;
  for (std::size_t mask = 1; mask < full; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    const std::size_t rest = mask ^ low;
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      const std::size_t block = sub | low;
      if (route_cost[block] < inf) {
        const double cand = route_cost[block] + best[mask ^ block];
        if (cand < best[mask]) {
          best[mask] = cand;
          choice[mask] = block;
        }
      }
      if (sub == 0) break;
    }
  }

  ExactPartition out;
  out.objective = best[full - 1];
  for (std::size_t mask = full - 1; mask != 0;) {
    const std::size_t block = choice[mask];
    std::vector<int> rev;
    std::size_t m = block;
    for (int j = route_last[block]; j >= 0;) {
      rev.push_back(j);
      const int p = prev[m * nn + static_cast<std::size_t>(j)];
      m &= ~(std::size_t{1} << j);
      j = p;
    }
    out.routes.emplace_back(rev.rbegin(), rev.rend());
    mask ^= block;
  }
  return out;
}

Solution cvrp_exact(const ProblemInstance& instance) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto part = exact_partition(instance);
  auto sol = make_solution(instance, routes_to_sequence(instance, part.routes), "exact");
  sol.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

// ---------------------------------------------------------------------------
// Stochastic VRP dispatch baselines

SvrpBaseline svrp_baseline_from_string(const std::string& name) {
  if (name == "random") return SvrpBaseline::random;
  if (name == "largest_demand") return SvrpBaseline::largest_demand;
  if (name == "max_reachable") return SvrpBaseline::max_reachable;
  throw ConfigError("unknown svrp baseline '" + name + "'");
}

const char* to_string(SvrpBaseline kind) {
  switch (kind) {
    case SvrpBaseline::random: return "random";
    case SvrpBaseline::largest_demand: return "largest_demand";
    case SvrpBaseline::max_reachable: return "max_reachable";
  }
  return "?";
}

SvrpAction svrp_baseline(SvrpBaseline kind, const SvrpState& s, Rng& rng) {
  if (s.load == 0) return SvrpAction::depot();
  if (kind == SvrpBaseline::random) {
    const std::size_t k = rng.below(s.active.size() + 2);
    if (k < s.active.size()) return SvrpAction::customer(s.active[k].id);
    return k == s.active.size() ? SvrpAction::depot() : SvrpAction::stay();
  }
  const SvrpCustomer* pick = nullptr;
  for (const auto& c : s.active) {
    if (kind == SvrpBaseline::max_reachable) {
      const double patience_left = s.cfg.patience - (s.clock - c.arrival_time);
      if (!(patience_left > travel_time(s, c.location))) continue;
    }
    if (!pick || c.demand > pick->demand) pick = &c;
  }
  return pick ? SvrpAction::customer(pick->id) : SvrpAction::stay();
}

}  // namespace vrprl
