#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrprl/rng.hpp"

namespace vrprl {

struct Coord {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

// Euclidean distance. Symmetric bit-for-bit: swapping the arguments only
// negates the differences.
inline double distance(Coord a, Coord b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct CustomerSpec {
  Coord location;
  int demand = 0;
  friend bool operator==(const CustomerSpec&, const CustomerSpec&) = default;
};

enum class ProblemKind { cvrp, tsp };

const char* to_string(ProblemKind kind);

// Customers are indexed 0..n-1 and the depot is node n, the same layout the
// sample tours use ("10 -> 5 -> 6 ... -> 10" for ten customers). TSP
// instances have no depot; their node indices are just the customers.
struct ProblemInstance {
  ProblemKind kind = ProblemKind::cvrp;
  std::string id;
  Coord depot;
  std::vector<CustomerSpec> customers;
  int capacity = 0;

  int num_customers() const { return static_cast<int>(customers.size()); }
  int depot_index() const { return num_customers(); }
  int num_nodes() const { return kind == ProblemKind::cvrp ? num_customers() + 1 : num_customers(); }
  bool is_depot(int node) const { return kind == ProblemKind::cvrp && node == depot_index(); }
  Coord location(int node) const;
  int total_demand() const;
  int max_demand() const;

  // Throws SchemaError when the instance breaks its invariants.
  void validate() const;

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

struct GeneratorConfig {
  ProblemKind kind = ProblemKind::cvrp;
  int n_customers = 10;
  int capacity = 20;
  int demand_lo = 1;
  int demand_hi = 9;
  std::uint64_t seed = 0;

  void validate() const;
};

// Draw order: depot (x then y), then each customer's x, y, demand.
ProblemInstance generate_instance(const GeneratorConfig& cfg);

// `count` instances; instance k is generated with seed derive_seed(cfg.seed, k).
std::vector<ProblemInstance> generate_instances(const GeneratorConfig& cfg, std::size_t count);

// Capacity paired with each customer count in the reference benchmark sizes.
int reference_capacity(int n_customers);

// JSON Lines, one instance per line.
void write_instances(const std::filesystem::path& path, const std::vector<ProblemInstance>& list);
std::vector<ProblemInstance> read_instances(const std::filesystem::path& path);

std::string instance_to_json_line(const ProblemInstance& inst);
// `line_no` only feeds error messages.
ProblemInstance instance_from_json_line(const std::string& line, std::size_t line_no = 1);

}  // namespace vrprl
