"""基线策略、穷举 oracle 与评估"""

import itertools

import numpy as np
import polars as pl
import pytest

from mecco.core.errors import AdmissionError, ConfigError, ConstraintError, SizeError
from mecco.features.agent.network import init_params
from mecco.features.costs.models import BITS_PER_MB, PlanCheck, ScenarioConfig
from mecco.features.costs.service import validate_plan
from mecco.features.env.models import Platform
from mecco.features.env.service import STATE_SIZE, OffloadingEnv
from mecco.features.policies.models import PolicyName
from mecco.features.policies.oracle import SEARCH_LIMIT, brute_force_oracle, search_size
from mecco.features.policies.service import (
    EqualAllocationPolicy,
    GreedyPlatformPolicy,
    LearnedPolicy,
    RandomPolicy,
    build_policy,
    evaluate_policy,
    run_episode,
)

SEEDS = [0, 1, 2, 3]


def _episode(policy, env, seed=0):
    final, rows, fallbacks = run_episode(policy, env, env.reset(seed=seed), seed)
    return final, rows, fallbacks


# --- oracle ---
def test_oracle_is_a_lower_bound_on_every_baseline(small_scenario):
    for seed in SEEDS:
        scenario = small_scenario.model_copy(update={"seed": seed})
        optimum = brute_force_oracle(scenario, 2, 4)
        assert validate_plan(optimum.plan, scenario) is PlanCheck.OK
        for name in (PolicyName.EO, PolicyName.CO, PolicyName.EO_EQUAL, PolicyName.CO_EQUAL, PolicyName.RANDOM):
            report = evaluate_policy(build_policy(name), scenario, [seed], 2, 4)
            assert optimum.cost <= report.mean_total_cost * (1 + 1e-12)


def test_oracle_cost_matches_rollout(small_env):
    state = small_env.reset(seed=6)
    optimum = brute_force_oracle(small_env.scenario, 2, 4, state.tasks)
    final = small_env.rollout(state, optimum.actions)
    assert final.tc == optimum.cost
    assert len(optimum.actions) == 2
    assert optimum.explored > 0


def test_oracle_policy_replays_the_optimum(small_env):
    final, _, _ = _episode(build_policy(PolicyName.ORACLE), small_env, seed=6)
    state = small_env.reset(seed=6)
    assert final.tc == brute_force_oracle(small_env.scenario, 2, 4, state.tasks).cost


def test_oracle_refuses_large_instances():
    assert search_size(10, 8, 16) > SEARCH_LIMIT
    with pytest.raises(SizeError):
        brute_force_oracle(ScenarioConfig(n_devices=10))


def test_oracle_single_device_prefers_cheapest_action():
    scenario = ScenarioConfig(n_devices=1, seed=2)
    env = OffloadingEnv(scenario, 2, 4)
    state = env.reset(seed=2)
    optimum = brute_force_oracle(scenario, 2, 4, state.tasks)
    costs = [env.preview_cost(state, i).weighted for i in range(env.n_actions)]
    assert optimum.actions == (int(np.argmin(costs)),)


# --- 贪心基线 ---
def test_edge_and_cloud_only_stay_on_their_platform(small_env):
    for seed in SEEDS:
        _, eo_rows, eo_fallbacks = _episode(build_policy(PolicyName.EO), small_env, seed)
        _, co_rows, _ = _episode(build_policy(PolicyName.CO), small_env, seed)
        assert eo_fallbacks == 0
        assert {row["platform"] for row in eo_rows} == {Platform.EDGE.value}
        assert {row["platform"] for row in co_rows} == {Platform.CLOUD.value}


def test_edge_only_falls_back_to_cloud_when_edge_is_exhausted():
    scenario = ScenarioConfig(n_devices=2, seed=1)
    report = evaluate_policy(build_policy(PolicyName.EO), scenario, SEEDS, levels_f=1, levels_w=4)
    assert report.fallback_count == len(SEEDS)
    platforms = report.devices.sort(["seed", "device"])["platform"].to_list()
    assert platforms == [Platform.EDGE.value, Platform.CLOUD.value] * len(SEEDS)


def test_greedy_keeps_a_fair_share_for_later_devices():
    env = OffloadingEnv(ScenarioConfig(n_devices=4, seed=5), levels_f=8, levels_w=16)
    _, rows, _ = _episode(GreedyPlatformPolicy(Platform.CLOUD), env, seed=5)
    assert all(row["w"] <= 4 / 16 for row in rows)


def test_equal_allocation_fixes_the_shared_resource():
    env = OffloadingEnv(ScenarioConfig(n_devices=3, seed=0), levels_f=8, levels_w=16)
    _, co_rows, _ = _episode(build_policy(PolicyName.CO_EQUAL), env)
    assert {row["w"] for row in co_rows} == {5 / 16}

    _, eo_rows, _ = _episode(build_policy(PolicyName.EO_EQUAL), env)
    assert {row["w"] for row in eo_rows} == {5 / 16}
    assert {row["f"] for row in eo_rows} == {env.scenario.edge_capacity * 2 / 8}


def test_equal_split_needs_enough_levels():
    env = OffloadingEnv(ScenarioConfig(n_devices=3, seed=0), levels_f=2, levels_w=4)
    with pytest.raises(AdmissionError):
        _episode(build_policy(PolicyName.EO_EQUAL), env)


def test_ablations_wrap_the_learned_policy():
    params = init_params(STATE_SIZE, 4 + 2 * 4, hidden=8, seed=0)
    env = OffloadingEnv(ScenarioConfig(n_devices=2, seed=0), levels_f=2, levels_w=4)

    no_bw = build_policy(PolicyName.NO_BW_ALLOC, params)
    assert isinstance(no_bw, EqualAllocationPolicy) and isinstance(no_bw.inner, LearnedPolicy)
    _, rows, _ = _episode(no_bw, env)
    assert {row["w"] for row in rows} == {0.5}

    no_edge = build_policy(PolicyName.NO_EDGE_ALLOC, params)
    _, rows, _ = _episode(no_edge, env)
    assert all(row["f"] in (0.0, env.scenario.edge_capacity / 2) for row in rows)


def test_learned_policy_only_picks_feasible_actions():
    params = init_params(STATE_SIZE, 4 + 2 * 4, hidden=8, seed=3)
    env = OffloadingEnv(ScenarioConfig(n_devices=3, seed=0), levels_f=2, levels_w=4)
    final, rows, _ = _episode(LearnedPolicy(params), env)
    assert final.done and len(rows) == 3
    assert validate_plan(env.plan_of(final), env.scenario) is PlanCheck.OK


def test_random_policy_is_reproducible_per_seed(small_env):
    first = evaluate_policy(RandomPolicy(), small_env.scenario, SEEDS, 2, 4)
    second = evaluate_policy(RandomPolicy(), small_env.scenario, SEEDS, 2, 4)
    assert first.per_seed.equals(second.per_seed)


def test_build_policy_errors():
    with pytest.raises(ConfigError):
        build_policy("GREEDY")
    with pytest.raises(ConfigError):
        build_policy(PolicyName.ADRLO)
    assert build_policy("CO").name == "CO"


def test_evaluation_report_aggregates_per_seed():
    scenario = ScenarioConfig(n_devices=3, task_min_bits=BITS_PER_MB, task_max_bits=2 * BITS_PER_MB)
    report = evaluate_policy(build_policy(PolicyName.CO), scenario, SEEDS, 2, 4)
    assert report.seed_count == len(SEEDS)
    assert report.per_seed.height == len(SEEDS)
    assert report.devices.height == 3 * len(SEEDS)
    assert report.mean_total_cost == pytest.approx(float(report.per_seed["total_cost"].mean()))
    assert report.per_seed["edge_fraction"].to_list() == [0.0] * len(SEEDS)
    totals = report.devices.group_by("seed").agg(pl.col("cost").sum().alias("total")).sort("seed")
    assert totals["total"].to_list() == pytest.approx(report.per_seed["total_cost"].to_list())


def test_edge_only_takes_every_level_when_alone():
    env = OffloadingEnv(ScenarioConfig(n_devices=1, seed=0), levels_f=8, levels_w=16)
    _, rows, _ = _episode(build_policy(PolicyName.EO), env)
    assert rows[0]["f"] == env.scenario.edge_capacity
    assert rows[0]["w"] == 1.0


def test_cloud_beats_edge_for_a_large_single_task():
    scenario = ScenarioConfig(n_devices=1, task_min_bits=12 * BITS_PER_MB, task_max_bits=12 * BITS_PER_MB)
    eo = evaluate_policy(build_policy(PolicyName.EO), scenario, [0], 8, 16)
    co = evaluate_policy(build_policy(PolicyName.CO), scenario, [0], 8, 16)
    assert co.mean_total_cost < eo.mean_total_cost


def test_edge_capacity_only_moves_the_edge_baseline():
    base = ScenarioConfig(n_devices=3, cloud_propagation_s=7.6)
    eo_costs, co_costs = [], []
    for ghz in (1.0, 2.0, 4.0):
        scenario = base.model_copy(update={"edge_capacity": ghz * 1e9})
        eo_costs.append(evaluate_policy(build_policy(PolicyName.EO), scenario, [0, 1], 8, 16).mean_total_cost)
        co_costs.append(evaluate_policy(build_policy(PolicyName.CO), scenario, [0, 1], 8, 16).mean_total_cost)
    assert co_costs[0] == co_costs[1] == co_costs[2]
    assert eo_costs[0] > eo_costs[1] > eo_costs[2]


def test_more_bandwidth_never_hurts_the_platform_baselines():
    base = ScenarioConfig(n_devices=3, cloud_propagation_s=7.6)
    for name in (PolicyName.EO, PolicyName.CO):
        costs = [
            evaluate_policy(
                build_policy(name), base.model_copy(update={"bandwidth_hz": mhz * 1e6}), [0, 1], 8, 16
            ).mean_total_cost
            for mhz in (1.0, 5.0, 10.0, 15.0)
        ]
        assert costs == sorted(costs, reverse=True), name


def test_more_devices_never_lower_the_platform_baselines():
    # 同一 seed 下 N 台设备的任务是 N+1 台时的前缀
    base = ScenarioConfig(task_min_bits=0.5 * BITS_PER_MB, task_max_bits=2 * BITS_PER_MB, cloud_propagation_s=7.6)
    for name in (PolicyName.EO, PolicyName.CO):
        costs = [
            evaluate_policy(
                build_policy(name), base.model_copy(update={"n_devices": n}), [0, 1, 2], 8, 16
            ).mean_total_cost
            for n in (1, 2, 3, 4)
        ]
        assert costs == sorted(costs), name


def _restricted_optimum(env, tasks, keep) -> float:
    """在满足 keep(动作下标) 的动作序列里穷举最小总代价"""
    best = np.inf
    for actions in itertools.product(range(env.n_actions), repeat=len(tasks)):
        if not all(keep(index) for index in actions):
            continue
        try:
            final = env.rollout(env.reset(tasks=tasks), actions)
        except ConstraintError:
            continue
        best = min(best, final.tc)
    return best


def test_oracle_bounds_every_ablation_instance(small_env):
    n, levels_f, levels_w = 2, 2, 4
    restrictions = {
        PolicyName.NO_BW_ALLOC: lambda index: small_env.w_levels[index] == levels_w // n,
        PolicyName.NO_EDGE_ALLOC: lambda index: small_env.f_levels[index] in (0, levels_f // n),
    }
    for seed in SEEDS:
        scenario = small_env.scenario.model_copy(update={"seed": seed})
        optimum = brute_force_oracle(scenario, levels_f, levels_w)
        tasks = small_env.reset(seed=seed).tasks
        for name, keep in restrictions.items():
            ablation_optimum = _restricted_optimum(small_env, tasks, keep)
            assert optimum.cost <= ablation_optimum
            for params_seed in range(3):
                params = init_params(STATE_SIZE, small_env.n_actions, hidden=8, seed=params_seed)
                final, _, _ = _episode(build_policy(name, params), small_env, seed=seed)
                assert ablation_optimum <= final.tc
