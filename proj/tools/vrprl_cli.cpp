// Command-line front end: instance generation, solving, training,
// evaluation, benchmarking, the stochastic VRP comparison and attention
// dumps. Every subcommand exits 0 on success and 1 with a message on error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vrprl/bench.hpp"
#include "vrprl/config.hpp"
#include "vrprl/errors.hpp"
#include "vrprl/heuristics.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/policy.hpp"
#include "vrprl/svrp.hpp"
#include "vrprl/training.hpp"

using namespace vrprl;
using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

void print_summary(const std::vector<SolverSummary>& summary) {
  std::printf("%-16s %8s %10s %10s %12s\n", "solver", "n", "mean", "std", "time[s]");
  for (const auto& s : summary)
    std::printf("%-16s %8d %10.4f %10.4f %12.6f%s\n", s.solver.c_str(), s.instances, s.mean, s.stddev, s.mean_wall_s,
                s.failed || s.infeasible ? "  (flagged rows)" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle routing solvers, policy training and benchmarks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate random instances as JSON lines");
  int gen_n = 10, gen_count = 1000;
  int gen_capacity = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_kind = "cvrp";
  gen->add_option("--n", gen_n, "Customers per instance")->check(CLI::PositiveNumber);
  gen->add_option("--capacity", gen_capacity, "Vehicle capacity (default: reference capacity for n)");
  gen->add_option("--count", gen_count, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--kind", gen_kind, "cvrp or tsp")->check(CLI::IsMember({"cvrp", "tsp"}));
  gen->add_option("--out", gen_out, "Output .jsonl")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "Solve every instance of a file with one solver");
  std::string solve_solver, solve_instances, solve_out, solve_checkpoint;
  int beam_width = 0, cw_r = 0, cw_m = 0, sweep_r = -1;
  bool split = false;
  std::uint64_t solve_seed = 0;
  solve->add_option("--solver", solve_solver, "cw, sweep, exact, rl, or a tag such as cw-rnd(5,5)")->required();
  solve->add_option("--instances", solve_instances, "Instance .jsonl")->required();
  solve->add_option("--out", solve_out, "Solutions .jsonl")->required();
  solve->add_option("--beam-width", beam_width, "Beam width for the rl solver");
  solve->add_option("--checkpoint", solve_checkpoint, "Checkpoint directory for the rl solver");
  solve->add_flag("--split", split, "Allow split deliveries (rl solver)");
  solve->add_option("--cw-r", cw_r, "Clarke-Wright randomization depth R");
  solve->add_option("--cw-m", cw_m, "Clarke-Wright randomization iterations M");
  solve->add_option("--sweep-r", sweep_r, "Random start angles for sweep (0 = basic)");
  solve->add_option("--seed", solve_seed, "Seed for randomized solvers");

  // train
  auto* train = app.add_subcommand("train", "Train a policy from a JSON config");
  std::string train_config;
  train->add_option("--config", train_config, "Training config (.json)")->required()->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an instance file");
  std::string eval_checkpoint, eval_instances, eval_mode = "greedy", eval_out;
  int eval_beam = 10;
  bool eval_split = false;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint directory")->required();
  eval->add_option("--instances", eval_instances, "Instance .jsonl")->required();
  eval->add_option("--mode", eval_mode, "greedy, sample, beam, or bs<W>")->required();
  eval->add_option("--beam-width", eval_beam, "Beam width for --mode beam");
  eval->add_flag("--split", eval_split, "Allow split deliveries");
  eval->add_option("--seed", eval_seed, "Seed for sampling");
  eval->add_option("--out", eval_out, "Per-instance CSV");

  // bench
  auto* bench = app.add_subcommand("bench", "Run a benchmark described by a JSON config");
  std::string bench_config;
  bench->add_option("--config", bench_config, "Benchmark config (.json)")->required()->check(CLI::ExistingFile);

  // svrp
  auto* svrp = app.add_subcommand("svrp", "Compare stochastic VRP strategies");
  std::string svrp_config, svrp_out, svrp_trace, svrp_checkpoint;
  std::vector<std::string> strategies;
  int svrp_episodes = 100;
  std::uint64_t svrp_seed = 0;
  svrp->add_option("--config", svrp_config, "Stochastic VRP config (.json)")->required()->check(CLI::ExistingFile);
  svrp->add_option("--strategies", strategies, "random, largest_demand, max_reachable, policy")
      ->required()
      ->delimiter(',');
  svrp->add_option("--episodes", svrp_episodes, "Episodes per strategy")->check(CLI::PositiveNumber);
  svrp->add_option("--seed", svrp_seed, "Base seed for the episode streams");
  svrp->add_option("--checkpoint", svrp_checkpoint, "Checkpoint for the 'policy' strategy");
  svrp->add_option("--out", svrp_out, "Table CSV");
  svrp->add_option("--trace", svrp_trace, "Event trace (.jsonl) of episode 0 for the first strategy");

  // attn
  auto* attn = app.add_subcommand("attn", "Dump per-step attention and output distributions");
  std::string attn_checkpoint, attn_instance, attn_out;
  int attn_index = 0, attn_first = 0, attn_last = -1;
  attn->add_option("--checkpoint", attn_checkpoint, "Checkpoint directory")->required();
  attn->add_option("--instance", attn_instance, "Instance .jsonl")->required();
  attn->add_option("--index", attn_index, "Which line of the file to use");
  attn->add_option("--first-step", attn_first, "First step to emit");
  attn->add_option("--last-step", attn_last, "Last step to emit (-1 = all)");
  attn->add_option("--out", attn_out, "Output .jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      GeneratorConfig g;
      g.kind = gen_kind == "tsp" ? ProblemKind::tsp : ProblemKind::cvrp;
      g.n_customers = gen_n;
      g.capacity = gen_capacity > 0 ? gen_capacity : (g.kind == ProblemKind::tsp ? 0 : reference_capacity(gen_n));
      g.seed = gen_seed;
      write_instances(gen_out, generate_instances(g, static_cast<std::size_t>(gen_count)));
      std::printf("wrote %d instances to %s\n", gen_count, gen_out.c_str());
    } else if (*solve) {
      SolverSpec spec = parse_solver(solve_solver);
      if (beam_width > 0) {
        spec.mode = DecodeMode::beam;
        spec.beam_width = beam_width;
      }
      if (!solve_checkpoint.empty()) spec.checkpoint = solve_checkpoint;
      if (split) spec.split_mode = true;
      if (cw_r > 0) spec.cw_r = cw_r;
      if (cw_m > 0) spec.cw_m = cw_m;
      if (sweep_r >= 0) spec.sweep_r = sweep_r;
      spec.seed = solve_seed;
      spec.validate();
      const auto instances = read_instances(solve_instances);
      PolicyCache policies;
      auto out = open_out(solve_out);
      std::vector<BenchRow> rows;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        Solution s = run_solver(spec, instances[i], policies, i);
        out << solution_to_json(s) << '\n';
        BenchRow r;
        r.instance_id = s.instance_id;
        r.solver = s.solver_tag;
        r.length = s.total_length;
        r.wall_s = s.wall_time_s;
        r.feasible = s.complete;
        rows.push_back(std::move(r));
      }
      print_summary(summarize(rows));
    } else if (*train) {
      json j = read_json_file(train_config);
      std::string algorithm = "reinforce", resume_from;
      if (j.contains("algorithm")) {
        algorithm = j.at("algorithm").get<std::string>();
        j.erase("algorithm");
      }
      if (j.contains("resume_from")) {
        resume_from = j.at("resume_from").get<std::string>();
        j.erase("resume_from");
      }
      if (algorithm == "reinforce") {
        ReinforceTrainer t(train_config_from_json(j));
        if (!resume_from.empty()) t.resume(resume_from);
        const auto m = t.run();
        if (!m.empty())
          std::printf("iteration %d  mean reward %.4f  wall %.1fs\n", m.back().iteration, m.back().mean_reward,
                      m.back().wall_s);
      } else if (algorithm == "a3c") {
        if (!resume_from.empty()) throw ConfigError("resume_from is not supported for a3c");
        const auto out = a3c_train(a3c_config_from_json(j));
        std::printf("%d updates, %d episodes\n", out.updates, out.episodes);
      } else {
        throw ConfigError("unknown algorithm '" + algorithm + "'");
      }
    } else if (*eval) {
      const auto policy = load_policy(eval_checkpoint);
      DecodeOptions opt;
      if (eval_mode.rfind("bs", 0) == 0 && eval_mode.size() > 2) {
        opt.mode = DecodeMode::beam;
        opt.beam_width = std::stoi(eval_mode.substr(2));
      } else {
        opt.mode = decode_mode_from_string(eval_mode);
        opt.beam_width = eval_beam;
      }
      opt.split_mode = eval_split;
      const auto instances = read_instances(eval_instances);
      const auto s = evaluate(policy.actor, policy.actor_cfg, instances, opt, eval_seed);
      if (!eval_out.empty()) write_eval_csv(eval_out, instances, s.solutions);
      std::printf("%s: n=%zu mean=%.4f std=%.4f mean_time=%.6fs\n", s.solutions.front().solver_tag.c_str(),
                  instances.size(), s.mean, s.stddev, s.mean_wall_s);
    } else if (*bench) {
      const auto cfg = BenchConfig::from_json(read_json_file(bench_config));
      const auto r = run_bench(cfg);
      print_summary(r.summary);
    } else if (*svrp) {
      const SvrpConfig cfg = svrp_config_from_json(read_json_file(svrp_config));
      std::unique_ptr<LoadedPolicy> policy;
      if (!svrp_checkpoint.empty()) policy = std::make_unique<LoadedPolicy>(load_policy(svrp_checkpoint));
      const auto rows = svrp_bench(cfg, strategies, svrp_episodes, svrp_seed, policy.get());
      if (!svrp_out.empty()) write_svrp_csv(svrp_out, rows);
      std::printf("%-16s %12s %10s %10s\n", "strategy", "satisfied", "stderr", "% arrived");
      for (const auto& r : rows)
        std::printf("%-16s %12.2f %10.2f %10.2f\n", r.strategy.c_str(), r.mean_satisfied, r.std_error,
                    r.percent_of_arrived);
      if (!svrp_trace.empty()) {
        // Replays episode 0 of the first strategy with event logging.
        SvrpConfig ec = cfg;
        ec.seed = Rng::derive_seed(svrp_seed, 0);
        SvrpState s = svrp_reset(ec);
        Rng rng = Rng::stream(Rng::derive_seed(svrp_seed, 0x5B7A7E), 0);
        std::vector<SvrpEvent> events;
        if (strategies.front() == "policy") {
          if (!policy) throw ConfigError("strategy 'policy' needs --checkpoint");
          SvrpAgent agent(policy->actor, policy->actor_cfg);
          while (!s.done) {
            nn::Tape tape(false);
            svrp_step(s, agent.decide(tape, svrp_observe(s), true, rng, nullptr).action, &events);
          }
        } else {
          const auto kind = svrp_baseline_from_string(strategies.front());
          while (!s.done) svrp_step(s, svrp_baseline(kind, s, rng), &events);
        }
        auto out = open_out(svrp_trace);
        for (const auto& e : events) out << svrp_event_to_json(e) << '\n';
      }
    } else if (*attn) {
      const auto policy = load_policy(attn_checkpoint);
      const auto instances = read_instances(attn_instance);
      if (attn_index < 0 || static_cast<std::size_t>(attn_index) >= instances.size())
        throw ConfigError("--index is outside the instance file");
      const auto steps =
          export_attention(instances[static_cast<std::size_t>(attn_index)], policy.actor, policy.actor_cfg, attn_first,
                           attn_last);
      auto out = open_out(attn_out);
      for (const auto& s : steps) out << step_trace_to_json(s) << '\n';
      std::printf("wrote %zu steps to %s\n", steps.size(), attn_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
