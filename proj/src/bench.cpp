#include "vrprl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "vrprl/config.hpp"
#include "vrprl/errors.hpp"
#include "vrprl/heuristics.hpp"

namespace vrprl {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Tags such as cw-rnd(5,5) contain commas, so those fields are quoted.
std::string field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string q = "\"";
  for (char c : text) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string SolverSpec::tag() const {
  std::string t;
  switch (kind) {
    case SolverKind::cw:
      t = cw_r == 1 && cw_m == 1 ? "cw-greedy" : "cw-rnd(" + std::to_string(cw_r) + "," + std::to_string(cw_m) + ")";
      break;
    case SolverKind::sweep:
      t = sweep_r == 0 ? "sw-basic" : "sw-rnd(" + std::to_string(sweep_r) + ")";
      break;
    case SolverKind::exact:
      t = "exact";
      break;
    case SolverKind::rl:
      t = mode == DecodeMode::beam ? "rl-bs(" + std::to_string(beam_width) + ")" : "rl-" + to_string(mode);
      break;
  }
  if (split_mode) t += "-sd";
  return t;
}

void SolverSpec::validate() const {
  if (cw_r < 1 || cw_m < 1) throw ConfigError("cw randomization depth and iterations must be at least 1");
  if (sweep_r < 0) throw ConfigError("sweep angle count must be non-negative");
  if (beam_width < 1) throw ConfigError("beam width must be at least 1");
  if (split_mode && kind != SolverKind::rl) throw ConfigError("split delivery is only supported by the rl solver");
  if (kind == SolverKind::rl && checkpoint.empty()) throw ConfigError("the rl solver needs a checkpoint");
}

SolverSpec parse_solver(const std::string& text) {
  SolverSpec s;
  std::string t = text;
  if (t.size() > 3 && t.compare(t.size() - 3, 3, "-sd") == 0) {
    s.split_mode = true;
    t.resize(t.size() - 3);
  }
  std::smatch m;
  if (t == "cw" || t == "cw-greedy") {
    s.kind = SolverKind::cw;
  } else if (std::regex_match(t, m, std::regex(R"(cw-rnd\((\d+),(\d+)\))"))) {
    s.kind = SolverKind::cw;
    s.cw_r = std::stoi(m[1]);
    s.cw_m = std::stoi(m[2]);
  } else if (t == "sweep" || t == "sw" || t == "sw-basic") {
    s.kind = SolverKind::sweep;
  } else if (std::regex_match(t, m, std::regex(R"(sw-rnd\((\d+)\))"))) {
    s.kind = SolverKind::sweep;
    s.sweep_r = std::stoi(m[1]);
  } else if (t == "exact") {
    s.kind = SolverKind::exact;
  } else if (t == "rl" || t == "rl-greedy") {
    s.kind = SolverKind::rl;
  } else if (t == "rl-sample") {
    s.kind = SolverKind::rl;
    s.mode = DecodeMode::sample;
  } else if (std::regex_match(t, m, std::regex(R"(rl-bs\((\d+)\))"))) {
    s.kind = SolverKind::rl;
    s.mode = DecodeMode::beam;
    s.beam_width = std::stoi(m[1]);
  } else {
    throw ConfigError("unknown solver '" + text + "'");
  }
  return s;
}

SolverSpec solver_from_json(const json& j) {
  if (j.is_string()) return parse_solver(j.get<std::string>());
  check_keys(j, {"solver", "cw_r", "cw_m", "sweep_r", "mode", "beam_width", "checkpoint", "split", "seed"},
             "solver entry");
  if (!j.contains("solver")) throw ConfigError("solver entry needs a 'solver' name");
  SolverSpec s = parse_solver(j.at("solver").get<std::string>());
  if (j.contains("cw_r")) s.cw_r = j.at("cw_r").get<int>();
  if (j.contains("cw_m")) s.cw_m = j.at("cw_m").get<int>();
  if (j.contains("sweep_r")) s.sweep_r = j.at("sweep_r").get<int>();
  if (j.contains("mode")) s.mode = decode_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("beam_width")) {
    s.beam_width = j.at("beam_width").get<int>();
    if (!j.contains("mode")) s.mode = DecodeMode::beam;
  }
  if (j.contains("checkpoint")) s.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("split")) s.split_mode = j.at("split").get<bool>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

const LoadedPolicy& PolicyCache::get(const std::string& path) {
  auto it = cache_.find(path);
  if (it == cache_.end()) it = cache_.emplace(path, std::make_unique<LoadedPolicy>(load_policy(path))).first;
  return *it->second;
}

Solution run_solver(const SolverSpec& spec, const ProblemInstance& instance, PolicyCache& policies,
                    std::size_t ordinal) {
  const auto t0 = std::chrono::steady_clock::now();
  Solution s;
  switch (spec.kind) {
    case SolverKind::cw:
      s = clarke_wright(instance, {spec.cw_r, spec.cw_m, Rng::derive_seed(spec.seed, ordinal)});
      break;
    case SolverKind::sweep:
      s = sweep(instance, {std::max(1, spec.sweep_r), spec.sweep_r > 0, Rng::derive_seed(spec.seed, ordinal)});
      break;
    case SolverKind::exact:
      s = cvrp_exact(instance);
      break;
    case SolverKind::rl: {
      const LoadedPolicy& p = policies.get(spec.checkpoint);
      DecodeOptions opt;
      opt.mode = spec.mode;
      opt.beam_width = spec.beam_width;
      opt.split_mode = spec.split_mode;
      Rng rng = Rng::stream(spec.seed, ordinal);
      s = rollout(instance, p.actor, p.actor_cfg, opt, rng).solution;
      break;
    }
  }
  s.solver_tag = spec.tag();
  s.instance_id = instance.id;
  s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

// ---------------------------------------------------------------------------

void BenchConfig::validate() const {
  if (solvers.empty()) throw ConfigError("bench needs at least one solver");
  if (instances_path.empty() && !generator) throw ConfigError("bench needs an instance file or a generator config");
  if (instances_path.empty() && count < 1) throw ConfigError("bench count must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  std::set<std::string> tags;
  for (const auto& s : solvers) {
    s.validate();
    if (!tags.insert(s.tag()).second) throw ConfigError("solver '" + s.tag() + "' listed twice");
  }
}

BenchConfig BenchConfig::from_json(const json& j) {
  check_keys(j, {"instances", "problem", "count", "solvers", "out_dir", "seed", "threads"}, "bench config");
  BenchConfig c;
  if (j.contains("instances")) c.instances_path = j.at("instances").get<std::string>();
  if (j.contains("problem")) c.generator = generator_config_from_json(j.at("problem"));
  if (j.contains("count")) c.count = j.at("count").get<int>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("solvers")) {
    for (const auto& s : j.at("solvers")) {
      SolverSpec spec = solver_from_json(s);
      if (!(s.is_object() && s.contains("seed"))) spec.seed = c.seed;
      c.solvers.push_back(std::move(spec));
    }
  }
  c.validate();
  return c;
}

std::vector<ProblemInstance> BenchConfig::load_instances() const {
  if (!instances_path.empty()) return read_instances(instances_path);
  return generate_instances(*generator, static_cast<std::size_t>(count));
}

BenchResult run_bench(const BenchConfig& cfg, const std::vector<ProblemInstance>& instances) {
  cfg.validate();
  if (instances.empty()) throw ConfigError("bench needs at least one instance");
  std::set<std::string> ids;
  for (const auto& i : instances)
    if (!ids.insert(i.id).second) throw ConfigError("duplicate instance id '" + i.id + "'");

  PolicyCache policies;
  for (const auto& s : cfg.solvers)
    if (s.kind == SolverKind::rl) policies.get(s.checkpoint);  // load up front so a bad path fails early

  const std::size_t n = instances.size();
  std::vector<BenchRow> rows(n * cfg.solvers.size());
  auto solve = [&](std::size_t task) {
    const std::size_t i = task % n;
    const SolverSpec& spec = cfg.solvers[task / n];
    const ProblemInstance& inst = instances[i];
    BenchRow& row = rows[task];
    row.instance_id = inst.id;
    row.solver = spec.tag();
    try {
      row.solution = run_solver(spec, inst, policies, i);
      row.length = row.solution.total_length;
      row.wall_s = row.solution.wall_time_s;
      row.feasible = row.solution.complete &&
                     (inst.kind != ProblemKind::cvrp ||
                      validate_solution(inst, row.solution.sequence, row.solution.split_mode).feasible);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.length = std::numeric_limits<double>::quiet_NaN();
    }
  };

  if (cfg.threads <= 1) {
    for (std::size_t t = 0; t < rows.size(); ++t) solve(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = static_cast<std::size_t>(w); t < rows.size(); t += static_cast<std::size_t>(cfg.threads))
          solve(t);
      });
    for (auto& th : pool) th.join();
  }

  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.instance_id, a.solver) < std::tie(b.instance_id, b.solver);
  });
  BenchResult r;
  r.summary = summarize(rows);
  r.rows = std::move(rows);
  return r;
}

BenchResult run_bench(const BenchConfig& cfg) {
  const auto instances = cfg.load_instances();
  BenchResult r = run_bench(cfg, instances);
  if (!cfg.out_dir.empty()) {
    const std::filesystem::path dir(cfg.out_dir);
    write_results_csv(dir / "results.csv", r.rows);
    write_summary_csv(dir / "summary.csv", r.summary);
    if (r.summary.size() >= 2) {
      try {
        write_win_rate_csv(dir / "win_rate.csv", win_rate(r.rows));
      } catch (const ConfigError&) {
        // coverage differs because some solver failed; the rows say which
      }
    }
    for (const auto& s : r.summary)
      if (s.solver == "exact") write_gap_csv(dir / "gaps.csv", gap_stats(r.rows, "exact"));
  }
  return r;
}

std::vector<SolverSummary> summarize(const std::vector<BenchRow>& rows) {
  std::map<std::string, std::vector<const BenchRow*>> by;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!by.count(r.solver)) order.push_back(r.solver);
    by[r.solver].push_back(&r);
  }
  std::vector<SolverSummary> out;
  for (const auto& name : order) {
    SolverSummary s;
    s.solver = name;
    std::vector<double> lengths, walls;
    for (const BenchRow* r : by[name]) {
      ++s.instances;
      if (!r->error.empty()) {
        ++s.failed;
        continue;
      }
      if (!r->feasible) ++s.infeasible;
      lengths.push_back(r->length);
      walls.push_back(r->wall_s);
    }
    s.mean = mean_of(lengths);
    s.stddev = sample_std(lengths, s.mean);
    s.mean_wall_s = mean_of(walls);
    out.push_back(s);
  }
  return out;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  auto out = open_out(path);
  out << "instance_id,solver,length,wall_s,feasible\n";
  for (const auto& r : rows)
    out << field(r.instance_id) << ',' << field(r.solver) << ',' << (r.error.empty() ? num(r.length) : "") << ',' << num(r.wall_s)
        << ',' << (r.feasible ? 1 : 0) << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SolverSummary>& summary) {
  auto out = open_out(path);
  out << "solver,instances,failed,infeasible,mean,std,mean_wall_s\n";
  for (const auto& s : summary)
    out << field(s.solver) << ',' << s.instances << ',' << s.failed << ',' << s.infeasible << ',' << num(s.mean) << ','
        << num(s.stddev) << ',' << num(s.mean_wall_s) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

// solver -> instance_id -> length, requiring every solver to cover exactly
// the same instances with a successful run.
std::map<std::string, std::map<std::string, double>> length_table(const std::vector<BenchRow>& rows) {
  std::map<std::string, std::map<std::string, double>> t;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    if (!t[r.solver].emplace(r.instance_id, r.length).second)
      throw ConfigError("solver '" + r.solver + "' has two rows for instance '" + r.instance_id + "'");
  }
  return t;
}

bool tie(double a, double b) { return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

WinRateMatrix win_rate(const std::vector<BenchRow>& rows) {
  auto table = length_table(rows);
  if (table.size() < 2) throw ConfigError("win rates need at least two solvers");
  WinRateMatrix m;
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (table.count(r.solver) && std::find(order.begin(), order.end(), r.solver) == order.end())
      order.push_back(r.solver);
  m.solvers = order;
  const auto& first = table.at(order.front());
  for (const auto& name : order) {
    const auto& t = table.at(name);
    if (t.size() != first.size() ||
        !std::equal(t.begin(), t.end(), first.begin(), [](const auto& a, const auto& b) { return a.first == b.first; }))
      throw ConfigError("solvers '" + order.front() + "' and '" + name + "' cover different instances");
  }
  const std::size_t k = order.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.wins.assign(k, std::vector<double>(k, nan));
  m.ties.assign(k, std::vector<double>(k, nan));
  const double n = static_cast<double>(first.size());
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      int wins = 0, ties = 0;
      const auto& ta = table.at(order[a]);
      const auto& tb = table.at(order[b]);
      for (const auto& [id, la] : ta) {
        const double lb = tb.at(id);
        if (tie(la, lb))
          ++ties;
        else if (la < lb)
          ++wins;
      }
      m.wins[a][b] = 100.0 * wins / n;
      m.ties[a][b] = 100.0 * ties / n;
    }
  return m;
}

void write_win_rate_csv(const std::filesystem::path& path, const WinRateMatrix& m) {
  auto out = open_out(path);
  out << "row_solver,column_solver,win_pct,tie_pct\n";
  for (std::size_t a = 0; a < m.solvers.size(); ++a)
    for (std::size_t b = 0; b < m.solvers.size(); ++b)
      if (a != b) out << field(m.solvers[a]) << ',' << field(m.solvers[b]) << ',' << num(m.wins[a][b]) << ',' << num(m.ties[a][b]) << '\n';
}

double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<GapStats> gap_stats(const std::vector<BenchRow>& rows, const std::string& reference_solver) {
  auto table = length_table(rows);
  auto ref_it = table.find(reference_solver);
  if (ref_it == table.end()) throw ConfigError("reference solver '" + reference_solver + "' has no rows");
  const auto& ref = ref_it->second;
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (table.count(r.solver) && std::find(order.begin(), order.end(), r.solver) == order.end())
      order.push_back(r.solver);
  std::vector<GapStats> out;
  for (const auto& name : order) {
    GapStats g;
    g.solver = name;
    for (const auto& [id, len] : table.at(name)) {
      auto it = ref.find(id);
      if (it == ref.end()) throw ConfigError("reference row missing for instance '" + id + "'");
      g.instance_ids.push_back(id);
      g.gaps.push_back((len - it->second) / it->second);
    }
    std::vector<double> s = g.gaps;
    std::sort(s.begin(), s.end());
    g.mean = mean_of(s);
    g.min = s.front();
    g.q25 = quantile_sorted(s, 0.25);
    g.median = quantile_sorted(s, 0.5);
    g.q75 = quantile_sorted(s, 0.75);
    g.max = s.back();
    out.push_back(std::move(g));
  }
  return out;
}

void write_gap_csv(const std::filesystem::path& path, const std::vector<GapStats>& gaps) {
  auto out = open_out(path);
  out << "solver,mean,min,q25,median,q75,max\n";
  for (const auto& g : gaps)
    out << field(g.solver) << ',' << num(g.mean) << ',' << num(g.min) << ',' << num(g.q25) << ',' << num(g.median) << ','
        << num(g.q75) << ',' << num(g.max) << '\n';
}

// ---------------------------------------------------------------------------

std::vector<SvrpBenchRow> svrp_bench(const SvrpConfig& cfg, const std::vector<std::string>& strategies, int episodes,
                                     std::uint64_t seed, const LoadedPolicy* policy) {
  cfg.validate();
  if (episodes < 1) throw ConfigError("svrp bench needs at least one episode");
  if (strategies.empty()) throw ConfigError("svrp bench needs at least one strategy");
  std::vector<SvrpBenchRow> out;
  for (const auto& name : strategies) {
    const bool is_policy = name == "policy";
    SvrpBaseline kind{};
    if (is_policy) {
      if (!policy) throw ConfigError("strategy 'policy' needs a checkpoint");
    } else {
      kind = svrp_baseline_from_string(name);
    }
    SvrpBenchRow row;
    row.strategy = name;
    for (int e = 0; e < episodes; ++e) {
      SvrpConfig ec = cfg;
      ec.seed = Rng::derive_seed(seed, static_cast<std::uint64_t>(e));
      SvrpState s = svrp_reset(ec);
      Rng rng = Rng::stream(Rng::derive_seed(seed, 0x5B7A7E), static_cast<std::uint64_t>(e));
      if (is_policy) {
        SvrpAgent agent(policy->actor, policy->actor_cfg);
        while (!s.done) {
          nn::Tape tape(false);
          svrp_step(s, agent.decide(tape, svrp_observe(s), true, rng, nullptr).action);
        }
      } else {
        while (!s.done) svrp_step(s, svrp_baseline(kind, s, rng));
      }
      row.satisfied.push_back(s.satisfied_units);
      row.arrived.push_back(s.arrived_units);
    }
    std::vector<double> xs(row.satisfied.begin(), row.satisfied.end());
    row.mean_satisfied = mean_of(xs);
    row.stddev = sample_std(xs, row.mean_satisfied);
    row.std_error = row.stddev / std::sqrt(static_cast<double>(episodes));
    double arrived = 0.0, satisfied = 0.0;
    for (int e = 0; e < episodes; ++e) {
      arrived += row.arrived[static_cast<std::size_t>(e)];
      satisfied += row.satisfied[static_cast<std::size_t>(e)];
    }
    row.percent_of_arrived = arrived > 0.0 ? 100.0 * satisfied / arrived : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

void write_svrp_csv(const std::filesystem::path& path, const std::vector<SvrpBenchRow>& rows) {
  auto out = open_out(path);
  out << "strategy,episodes,mean_satisfied,std,std_error,percent_of_arrived\n";
  for (const auto& r : rows)
    out << field(r.strategy) << ',' << r.satisfied.size() << ',' << num(r.mean_satisfied) << ',' << num(r.stddev) << ','
        << num(r.std_error) << ',' << num(r.percent_of_arrived) << '\n';
}

}  // namespace vrprl
