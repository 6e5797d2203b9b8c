import itertools
import math

import pytest

import vrprl


def brute_force_length(inst):
    # Every ordering of customers cut into capacity-feasible trips, greedily
    # split; fine for four customers.
    n = inst.num_customers
    pts = [c.location for c in inst.customers]
    best = math.inf
    for order in itertools.permutations(range(n)):
        for cuts in itertools.product([False, True], repeat=n - 1):
            trips, cur = [], [order[0]]
            for k, cut in enumerate(cuts):
                if cut:
                    trips.append(cur)
                    cur = []
                cur.append(order[k + 1])
            trips.append(cur)
            if any(sum(inst.customers[i].demand for i in t) > inst.capacity for t in trips):
                continue
            total = 0.0
            for t in trips:
                path = [inst.depot] + [pts[i] for i in t] + [inst.depot]
                total += sum(vrprl.distance(a, b) for a, b in zip(path, path[1:]))
            best = min(best, total)
    return best


def test_generation_is_seeded_and_round_trips(tmp_path):
    a = vrprl.generate_instances(10, 20, 5, seed=3)
    b = vrprl.generate_instances(10, 20, 5, seed=3)
    assert a == b
    assert a != vrprl.generate_instances(10, 20, 5, seed=4)
    path = tmp_path / "set.jsonl"
    vrprl.write_instances(path, a)
    assert vrprl.read_instances(path) == a
    assert vrprl.Instance.from_json(a[0].to_json()) == a[0]
    assert vrprl.reference_capacity(10) == 20


def test_environment_masks_and_steps():
    inst = vrprl.generate_instances(5, 10, 1, seed=1)[0]
    s = vrprl.reset(inst)
    assert s.position == inst.depot_index
    assert s.load == inst.capacity
    mask = s.feasible_mask()
    assert len(mask) == inst.num_customers + 1
    while not s.terminal:
        s = s.step(next(i for i, ok in enumerate(s.feasible_mask()) if ok))
    report = vrprl.validate_solution(inst, s.sequence)
    assert report.feasible and report.all_demand_served
    with pytest.raises(vrprl.VrprlError):
        s.step(0)


def test_exact_oracle_matches_brute_force():
    for inst in vrprl.generate_instances(4, 10, 5, seed=9):
        sol = vrprl.cvrp_exact(inst)
        assert sol.total_length == pytest.approx(brute_force_length(inst), abs=1e-9)
        assert vrprl.tour_length(inst, sol.sequence) == pytest.approx(sol.total_length, abs=1e-12)


def test_heuristics_are_feasible_and_not_below_optimum():
    for inst in vrprl.generate_instances(7, 15, 5, seed=2):
        opt = vrprl.cvrp_exact(inst).total_length
        for sol in (vrprl.clarke_wright(inst), vrprl.clarke_wright(inst, 3, 4, seed=1),
                    vrprl.sweep(inst), vrprl.sweep(inst, angles=5, seed=1)):
            assert vrprl.validate_solution(inst, sol.sequence).feasible
            assert sol.total_length >= opt - 1e-9


def test_tsp_exact_on_a_square():
    pts = [vrprl.Coord(0, 0), vrprl.Coord(1, 1), vrprl.Coord(1, 0), vrprl.Coord(0, 1)]
    order, length = vrprl.tsp_exact(pts)
    assert sorted(order) == [0, 1, 2, 3]
    assert length == pytest.approx(4.0)


def test_train_then_solve(tmp_path):
    ckpt = tmp_path / "ckpt"
    metrics = vrprl.train({
        "problem": {"n_customers": 5, "capacity": 10},
        "actor": {"embed_dim": 8},
        "critic": {"hidden": 8},
        "batch": 4,
        "iterations": 3,
        "seed": 1,
        "checkpoint_dir": str(ckpt),
    })
    assert [m["iteration"] for m in metrics] == [1, 2, 3]
    assert all(math.isfinite(m["mean_reward"]) for m in metrics)

    policy = vrprl.load_policy(ckpt)
    assert policy.embed_dim == 8
    inst = vrprl.generate_instances(5, 10, 1, seed=5)[0]
    greedy = policy.solve(inst)
    assert vrprl.validate_solution(inst, greedy.sequence).feasible
    assert policy.solve(inst, mode="beam", beam_width=1).sequence == greedy.sequence
    sampled = policy.solve(inst, mode="sample", seed=7)
    assert policy.solve(inst, mode="sample", seed=7).sequence == sampled.sequence
    assert math.isfinite(policy.critic_value(inst))


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(vrprl.LoadError):
        vrprl.load_policy(tmp_path / "missing")
    with pytest.raises(vrprl.ConfigError):
        vrprl.train({"batch": 4, "no_such_key": 1})
    assert issubclass(vrprl.ConfigError, RuntimeError)


def test_svrp_baselines():
    rows = vrprl.svrp_bench({"horizon": 30}, ["random", "max_reachable"], episodes=5, seed=3)
    assert [r["strategy"] for r in rows] == ["random", "max_reachable"]
    assert rows[0]["arrived"] == rows[1]["arrived"]
    for r in rows:
        assert len(r["satisfied"]) == 5
        assert all(0 <= s <= a for s, a in zip(r["satisfied"], r["arrived"]))
