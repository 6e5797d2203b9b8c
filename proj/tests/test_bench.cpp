#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vrprl/bench.hpp"
#include "vrprl/errors.hpp"

using namespace vrprl;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vrprl_test_bench" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ProblemInstance> small_set(int count = 30, std::uint64_t seed = 12) {
  GeneratorConfig g;
  g.n_customers = 7;
  g.seed = seed;
  return generate_instances(g, static_cast<std::size_t>(count));
}

BenchConfig config_for(std::initializer_list<const char*> tags) {
  BenchConfig c;
  GeneratorConfig g;
  g.n_customers = 7;
  c.generator = g;
  for (const char* t : tags) c.solvers.push_back(parse_solver(t));
  return c;
}

// Tiny trained checkpoint shared by the RL cases.
const std::string& checkpoint() {
  static const std::string path = [] {
    auto dir = temp_dir("policy");
    TrainConfig cfg;
    cfg.problem.n_customers = 7;
    cfg.actor.embed_dim = 16;
    cfg.critic.hidden = 8;
    cfg.batch = 4;
    cfg.iterations = 3;
    cfg.checkpoint_dir = (dir / "ckpt").string();
    reinforce_train(cfg);
    return cfg.checkpoint_dir;
  }();
  return path;
}

BenchRow row(const std::string& id, const std::string& solver, double length) {
  BenchRow r;
  r.instance_id = id;
  r.solver = solver;
  r.length = length;
  r.feasible = true;
  return r;
}

}  // namespace

TEST_CASE("solver tags parse back to themselves") {
  for (const char* t : {"cw-greedy", "cw-rnd(5,5)", "sw-basic", "sw-rnd(20)", "exact", "rl-greedy", "rl-sample",
                        "rl-bs(10)", "rl-bs(10)-sd", "rl-greedy-sd"})
    CHECK(parse_solver(t).tag() == t);
  CHECK(parse_solver("cw").tag() == "cw-greedy");
  CHECK(parse_solver("sweep").tag() == "sw-basic");
  CHECK(parse_solver("rl").tag() == "rl-greedy");
  CHECK_THROWS_AS(parse_solver("lkh"), ConfigError);
  CHECK_THROWS_AS(parse_solver("cw-rnd(5)"), ConfigError);

  auto spec = solver_from_json(nlohmann::json{{"solver", "rl"}, {"beam_width", 4}, {"checkpoint", "x"}});
  CHECK(spec.tag() == "rl-bs(4)");
  CHECK_THROWS_AS(solver_from_json(nlohmann::json{{"solver", "cw"}, {"split", true}}), ConfigError);
  CHECK_THROWS_AS(solver_from_json(nlohmann::json{{"solver", "rl"}}), ConfigError);
  CHECK_THROWS_AS(solver_from_json(nlohmann::json{{"solver", "cw"}, {"colour", 1}}), ConfigError);
}

TEST_CASE("bench config validation") {
  auto c = config_for({"cw", "cw-greedy"});
  CHECK_THROWS_AS(c.validate(), ConfigError);  // same tag twice
  BenchConfig empty;
  empty.solvers.push_back(parse_solver("cw"));
  CHECK_THROWS_AS(empty.validate(), ConfigError);  // no instance source
  auto ok = config_for({"cw"});
  CHECK_THROWS_AS(run_bench(ok, {}), ConfigError);
  auto dup = small_set(2);
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(run_bench(ok, dup), ConfigError);
  auto j = nlohmann::json::parse(R"({"problem": {"n_customers": 5}, "count": 3, "solvers": ["cw", "exact"]})");
  auto parsed = BenchConfig::from_json(j);
  CHECK(parsed.solvers.size() == 2);
  CHECK(parsed.load_instances().size() == 3);
}

TEST_CASE("rows are sorted and summaries are the row means") {
  auto set = small_set();
  auto r = run_bench(config_for({"sw-basic", "cw-greedy", "exact"}), set);
  REQUIRE(r.rows.size() == 90);
  CHECK(std::is_sorted(r.rows.begin(), r.rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.instance_id, a.solver) < std::tie(b.instance_id, b.solver);
  }));
  for (const auto& s : r.summary) {
    std::vector<double> xs;
    for (const auto& row : r.rows)
      if (row.solver == s.solver) xs.push_back(row.length);
    REQUIRE(xs.size() == 30);
    double mean = 0.0;
    for (double x : xs) mean += x / 30.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    CHECK(s.instances == 30);
    CHECK(s.failed == 0);
    CHECK(s.infeasible == 0);
    CHECK(s.mean == doctest::Approx(mean).epsilon(1e-13));
    CHECK(s.stddev == doctest::Approx(std::sqrt(ss / 29.0)).epsilon(1e-12));
  }
}

TEST_CASE("win rates partition every pair") {
  auto r = run_bench(config_for({"sw-basic", "cw-greedy", "exact", "cw-rnd(3,3)"}), small_set());
  auto m = win_rate(r.rows);
  const std::size_t k = m.solvers.size();
  REQUIRE(k == 4);
  for (std::size_t a = 0; a < k; ++a) {
    CHECK(std::isnan(m.wins[a][a]));
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      CHECK(m.wins[a][b] + m.wins[b][a] + m.ties[a][b] == doctest::Approx(100.0));
      CHECK(m.ties[a][b] == m.ties[b][a]);
    }
  }
  const auto idx = [&](const std::string& s) {
    return static_cast<std::size_t>(std::find(m.solvers.begin(), m.solvers.end(), s) - m.solvers.begin());
  };
  // Nothing beats the optimum.
  for (const char* h : {"sw-basic", "cw-greedy", "cw-rnd(3,3)"}) CHECK(m.wins[idx(h)][idx("exact")] == 0.0);
}

TEST_CASE("win rates against an identical solver are all ties") {
  std::vector<BenchRow> rows;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "i" + std::to_string(i);
    rows.push_back(row(id, "a", 1.0 + i));
    rows.push_back(row(id, "b", 1.0 + i + 1e-12));
  }
  auto m = win_rate(rows);
  CHECK(m.ties[0][1] == 100.0);
  CHECK(m.wins[0][1] == 0.0);
  rows.push_back(row("extra", "a", 1.0));
  CHECK_THROWS_AS(win_rate(rows), ConfigError);
  CHECK_THROWS_AS(win_rate({row("x", "a", 1.0)}), ConfigError);
}

TEST_CASE("gap statistics") {
  std::vector<BenchRow> rows;
  const double lengths[] = {2.0, 3.0, 5.0, 4.0};
  for (int i = 0; i < 4; ++i) {
    const std::string id = "i" + std::to_string(i);
    rows.push_back(row(id, "ref", 2.0));
    rows.push_back(row(id, "h", lengths[i]));
  }
  auto g = gap_stats(rows, "ref");
  REQUIRE(g.size() == 2);
  const auto& ref = g[0].solver == "ref" ? g[0] : g[1];
  const auto& h = g[0].solver == "h" ? g[0] : g[1];
  for (double x : ref.gaps) CHECK(x == 0.0);
  // gaps 0, 0.5, 1.5, 1.0
  CHECK(h.mean == doctest::Approx(0.75));
  CHECK(h.min == 0.0);
  CHECK(h.max == 1.5);
  CHECK(h.median == doctest::Approx(0.75));
  CHECK(h.q25 == doctest::Approx(0.375));
  CHECK(h.q75 == doctest::Approx(1.125));
  CHECK_THROWS_AS(gap_stats(rows, "missing"), ConfigError);
  rows.push_back(row("lonely", "h", 1.0));
  CHECK_THROWS_AS(gap_stats(rows, "ref"), ConfigError);

  CHECK(quantile_sorted({1.0}, 0.3) == 1.0);
  CHECK(std::isnan(quantile_sorted({}, 0.5)));
}

TEST_CASE("heuristic gaps against the exact solver are non-negative") {
  auto r = run_bench(config_for({"sw-basic", "cw-greedy", "exact"}), small_set());
  for (const auto& g : gap_stats(r.rows, "exact")) {
    CHECK(g.min >= -1e-12);
    if (g.solver == "exact") CHECK(g.max == 0.0);
  }
}

TEST_CASE("bench output files are deterministic") {
  auto cfg = config_for({"cw-rnd(3,2)", "sw-rnd(4)", "exact", "rl-sample", "rl-bs(3)"});
  for (auto& s : cfg.solvers)
    if (s.kind == SolverKind::rl) s.checkpoint = checkpoint();
  cfg.count = 12;
  cfg.seed = 9;
  for (auto& s : cfg.solvers) s.seed = 9;
  auto a = temp_dir("det_a"), b = temp_dir("det_b");
  cfg.out_dir = a.string();
  auto ra = run_bench(cfg);
  cfg.out_dir = b.string();
  cfg.threads = 3;
  auto rb = run_bench(cfg);
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    CHECK(ra.rows[i].solver == rb.rows[i].solver);
    CHECK(ra.rows[i].length == rb.rows[i].length);
    CHECK(ra.rows[i].solution.sequence == rb.rows[i].solution.sequence);
  }
  for (const char* f : {"summary.csv", "win_rate.csv", "gaps.csv"}) {
    REQUIRE(std::filesystem::exists(a / f));
    CHECK(slurp(a / f).substr(0, 30) == slurp(b / f).substr(0, 30));
  }
  // Wall times differ between runs; compare the deterministic columns.
  auto strip = [](const std::string& text) {
    std::stringstream in(text), out;
    for (std::string line; std::getline(in, line);) {
      const auto last = line.rfind(',');
      const auto wall = line.rfind(',', last - 1);
      out << line.substr(0, wall) << line.substr(last) << '\n';
    }
    return out.str();
  };
  CHECK(strip(slurp(a / "results.csv")) == strip(slurp(b / "results.csv")));
  CHECK(slurp(a / "win_rate.csv") == slurp(b / "win_rate.csv"));
  CHECK(slurp(a / "gaps.csv") == slurp(b / "gaps.csv"));
}

TEST_CASE("rl solvers in the bench") {
  auto set = small_set(10);
  PolicyCache cache;
  auto greedy = parse_solver("rl-greedy");
  greedy.checkpoint = checkpoint();
  auto beam1 = parse_solver("rl-bs(1)");
  beam1.checkpoint = checkpoint();
  auto split = parse_solver("rl-bs(3)-sd");
  split.checkpoint = checkpoint();
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto g = run_solver(greedy, set[i], cache, i);
    auto b = run_solver(beam1, set[i], cache, i);
    CHECK(g.sequence == b.sequence);
    CHECK(g.solver_tag == "rl-greedy");
    CHECK(g.instance_id == set[i].id);
    auto s = run_solver(split, set[i], cache, i);
    CHECK(s.split_mode);
    CHECK(validate_solution(set[i], s.sequence, true).feasible);
  }
  auto missing = config_for({"cw"});
  auto bad = parse_solver("rl");
  bad.checkpoint = (temp_dir("nothing") / "none").string();
  missing.solvers.push_back(bad);
  CHECK_THROWS_AS(run_bench(missing, set), LoadError);
}

TEST_CASE("stochastic baselines are ordered and reproducible") {
  SvrpConfig cfg;
  cfg.horizon = 40.0;
  auto rows = svrp_bench(cfg, {"random", "largest_demand", "max_reachable"}, 30, 3);
  auto again = svrp_bench(cfg, {"random", "largest_demand", "max_reachable"}, 30, 3);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rows[k].satisfied == again[k].satisfied);
    CHECK(rows[k].satisfied.size() == 30);
    // The arrival stream does not depend on the strategy.
    CHECK(rows[k].arrived == rows[0].arrived);
    for (std::size_t e = 0; e < 30; ++e) CHECK(rows[k].satisfied[e] <= rows[k].arrived[e]);
    CHECK(rows[k].std_error == doctest::Approx(rows[k].stddev / std::sqrt(30.0)));
  }
  CHECK(rows[2].mean_satisfied > rows[0].mean_satisfied);

  cfg.horizon = 0.0;
  for (const auto& r : svrp_bench(cfg, {"random", "max_reachable"}, 5, 1)) {
    CHECK(r.mean_satisfied == 0.0);
    CHECK(r.percent_of_arrived == 0.0);
  }
  CHECK_THROWS_AS(svrp_bench(cfg, {"policy"}, 3), ConfigError);
  CHECK_THROWS_AS(svrp_bench(cfg, {"random"}, 0), ConfigError);
  CHECK_THROWS_AS(svrp_bench(cfg, {"clairvoyant"}, 3), ConfigError);
}

TEST_CASE("policy strategy samples reproducibly on the shared arrival streams") {
  SvrpConfig cfg;
  cfg.horizon = 25.0;
  LoadedPolicy lp;
  lp.actor_cfg = ActorConfig::for_svrp();
  lp.actor_cfg.embed_dim = 8;
  Rng rng(4);
  lp.actor = init_actor(lp.actor_cfg, rng);
  auto rows = svrp_bench(cfg, {"random", "policy"}, 6, 9, &lp);
  auto again = svrp_bench(cfg, {"policy"}, 6, 9, &lp);
  CHECK(rows[1].satisfied == again[0].satisfied);
  CHECK(rows[1].arrived == rows[0].arrived);
  // A different base seed changes both the arrivals and the sampled actions.
  CHECK(svrp_bench(cfg, {"policy"}, 6, 10, &lp)[0].arrived != rows[1].arrived);
}

TEST_CASE("csv writers") {
  auto dir = temp_dir("csv");
  SvrpConfig cfg;
  cfg.horizon = 10.0;
  auto rows = svrp_bench(cfg, {"random"}, 4, 2);
  write_svrp_csv(dir / "svrp.csv", rows);
  auto text = slurp(dir / "svrp.csv");
  CHECK(text.rfind("strategy,episodes,mean_satisfied,std,std_error,percent_of_arrived\nrandom,4,", 0) == 0);
  std::vector<BenchRow> bench{row("i0", "a", 1.5)};
  bench[0].error = "boom";
  bench[0].feasible = false;
  bench.push_back(row("i0", "cw-rnd(5,5)", 2.0));
  write_results_csv(dir / "r.csv", bench);
  CHECK(slurp(dir / "r.csv") == "instance_id,solver,length,wall_s,feasible\ni0,a,,0,0\ni0,\"cw-rnd(5,5)\",2,0,1\n");
  auto s = summarize(bench);
  CHECK(s[0].failed == 1);
}
