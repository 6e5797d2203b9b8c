#include "vrprl/instances.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vrprl/errors.hpp"

namespace vrprl {

using nlohmann::json;

const char* to_string(ProblemKind kind) { return kind == ProblemKind::cvrp ? "cvrp" : "tsp"; }

Coord ProblemInstance::location(int node) const {
  if (is_depot(node)) return depot;
  if (node < 0 || node >= num_customers())
    throw std::out_of_range("node index " + std::to_string(node) + " out of range");
  return customers[static_cast<std::size_t>(node)].location;
}

int ProblemInstance::total_demand() const {
  return std::accumulate(customers.begin(), customers.end(), 0,
                         [](int acc, const CustomerSpec& c) { return acc + c.demand; });
}

int ProblemInstance::max_demand() const {
  int m = 0;
  for (const auto& c : customers) m = std::max(m, c.demand);
  return m;
}

void ProblemInstance::validate() const {
  if (customers.empty()) throw SchemaError("instance '" + id + "' has no customers");
  auto finite = [](Coord c) { return std::isfinite(c.x) && std::isfinite(c.y); };
  for (const auto& c : customers)
    if (!finite(c.location)) throw SchemaError("instance '" + id + "' has a non-finite coordinate");
  if (kind == ProblemKind::cvrp) {
    if (!finite(depot)) throw SchemaError("instance '" + id + "' has a non-finite depot");
    if (capacity <= 0) throw SchemaError("instance '" + id + "' has non-positive capacity");
    for (const auto& c : customers)
      if (c.demand < 1) throw SchemaError("instance '" + id + "' has a demand below 1");
    if (capacity < max_demand())
      throw SchemaError("instance '" + id + "' has capacity below its largest demand");
  }
}

void GeneratorConfig::validate() const {
  if (n_customers <= 0) throw ConfigError("n_customers must be positive");
  if (kind == ProblemKind::cvrp) {
    if (capacity <= 0) throw ConfigError("capacity must be positive");
    if (demand_lo < 1 || demand_lo > demand_hi) throw ConfigError("empty demand range");
    if (demand_hi > capacity) throw ConfigError("demand_hi exceeds capacity");
  }
}

ProblemInstance generate_instance(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ProblemInstance inst;
  inst.kind = cfg.kind;
  inst.id = std::string(to_string(cfg.kind)) + std::to_string(cfg.n_customers) + "-" +
            std::to_string(cfg.seed);
  if (cfg.kind == ProblemKind::cvrp) {
    inst.capacity = cfg.capacity;
    inst.depot.x = rng.uniform();
    inst.depot.y = rng.uniform();
  }
  inst.customers.resize(static_cast<std::size_t>(cfg.n_customers));
  for (auto& c : inst.customers) {
    c.location.x = rng.uniform();
    c.location.y = rng.uniform();
    c.demand = cfg.kind == ProblemKind::cvrp ? rng.uniform_int(cfg.demand_lo, cfg.demand_hi) : 0;
  }
  return inst;
}

std::vector<ProblemInstance> generate_instances(const GeneratorConfig& cfg, std::size_t count) {
  std::vector<ProblemInstance> out;
  out.reserve(count);
  GeneratorConfig c = cfg;
  for (std::size_t k = 0; k < count; ++k) {
    c.seed = Rng::derive_seed(cfg.seed, k);
    auto inst = generate_instance(c);
    inst.id = std::string(to_string(cfg.kind)) + std::to_string(cfg.n_customers) + "-s" +
              std::to_string(cfg.seed) + "-" + std::to_string(k);
    out.push_back(std::move(inst));
  }
  return out;
}

int reference_capacity(int n_customers) {
  switch (n_customers) {
    case 10: return 20;
    case 20: return 30;
    case 50: return 40;
    case 100: return 50;
    default: throw ConfigError("no reference capacity for n=" + std::to_string(n_customers));
  }
}

namespace {

json coord_json(Coord c) { return json::array({c.x, c.y}); }

Coord coord_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaError(std::string("field '") + field + "' must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

const json& require(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + field + "'");
  return *it;
}

}  // namespace

std::string instance_to_json_line(const ProblemInstance& inst) {
  json j;
  j["kind"] = to_string(inst.kind);
  j["id"] = inst.id;
  json customers = json::array();
  for (const auto& c : inst.customers) {
    json cj;
    cj["xy"] = coord_json(c.location);
    if (inst.kind == ProblemKind::cvrp) cj["demand"] = c.demand;
    customers.push_back(std::move(cj));
  }
  if (inst.kind == ProblemKind::cvrp) {
    j["capacity"] = inst.capacity;
    j["depot"] = coord_json(inst.depot);
  }
  j["customers"] = std::move(customers);
  return j.dump();
}

ProblemInstance instance_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_no);
  }
  try {
    if (!j.is_object()) throw SchemaError("instance must be a JSON object");
    ProblemInstance inst;
    const auto kind = require(j, "kind").get<std::string>();
    if (kind == "cvrp")
      inst.kind = ProblemKind::cvrp;
    else if (kind == "tsp")
      inst.kind = ProblemKind::tsp;
    else
      throw SchemaError("unknown kind '" + kind + "'");
    inst.id = require(j, "id").get<std::string>();
    if (inst.kind == ProblemKind::cvrp) {
      inst.capacity = require(j, "capacity").get<int>();
      inst.depot = coord_from(require(j, "depot"), "depot");
    }
    for (const auto& cj : require(j, "customers")) {
      CustomerSpec c;
      c.location = coord_from(require(cj, "xy"), "xy");
      if (inst.kind == ProblemKind::cvrp) c.demand = require(cj, "demand").get<int>();
      inst.customers.push_back(c);
    }
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

void write_instances(const std::filesystem::path& path, const std::vector<ProblemInstance>& list) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& inst : list) out << instance_to_json_line(inst) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::vector<ProblemInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<ProblemInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(instance_from_json_line(line, line_no));
  }
  return out;
}

}  // namespace vrprl
