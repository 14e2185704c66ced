"""Acceptance suite: every headline criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with `pytest tests/test_acceptance.py
-v -s` to see them live). The ablation criterion executes the full protocol
(4 archetypes x 4 adaptation levels x 20 trials x 16 cycles) and dominates the
suite's runtime.
"""

import math
import sys

import numpy as np
import pytest
from scipy import stats

from teamplan.domain import Agent, AllocationHistory
from teamplan.env import MIDDLE_REGION, visits_region
from teamplan.loop import RunConfig, run, run_ablation_suite
from teamplan.motion import value
from teamplan.scheduler import (GAConfig, TrajectoryMemory, evaluate,
                                initial_robot_durations, optimize)
from teamplan.spatial import GridSpec, SpatialCostField, bayes_update, init_from_priors
from teamplan.temporal import NIGParams, TemporalModel
from teamplan.timeline import check_feasible, simulate_timeline
from teamplan.domain import DeadlockError, Trajectory

from oracles import (DEADLOCK, enumerate_genomes, enumerate_timeline,
                     gaussian_posterior_by_integration,
                     nig_posterior_by_integration)
from test_timeline import _random_instance
from test_scheduler import deterministic_temporal, uniform_field


def _report(name: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, file=sys.stderr)
    assert ok, line


# -- Spatial Bayes oracle -----------------------------------------------------

def test_spatial_bayes_oracle():
    rng = np.random.default_rng(100)
    spec = GridSpec(nx=4, ny=4)
    worst = 0.0
    for n_obs in range(1, 11):
        prior = init_from_priors(0, [Trajectory(rng.uniform(0, 1, (6, 2)), 5, 0.25)],
                                 spec)
        observations = [Trajectory(rng.uniform(0, 1, (6, 2)), 5, 0.25)
                        for _ in range(n_obs)]
        obs_at = [prior.observed_costs(t) for t in observations]
        cur = prior
        prev_var = prior.var.copy()
        for t in observations:
            cur = bayes_update(cur, t)
            assert np.all(cur.var < prev_var)  # strictly decreasing
            prev_var = cur.var.copy()
        for iy, ix in [(0, 0), (2, 1), (3, 3)]:
            ref_m, ref_v = gaussian_posterior_by_integration(
                float(prior.mean[iy, ix]), float(prior.var[iy, ix]),
                [float(o[iy, ix]) for o in obs_at], prior.rho)
            worst = max(worst, abs(cur.mean[iy, ix] - ref_m),
                        abs(cur.var[iy, ix] - ref_v))
        if n_obs >= 2:
            a = bayes_update(bayes_update(prior, observations[0]), observations[1])
            b = bayes_update(bayes_update(prior, observations[1]), observations[0])
            assert np.max(np.abs(a.mean - b.mean)) < 1e-12
            assert np.max(np.abs(a.var - b.var)) < 1e-12
    _report("spatial-bayes-oracle", worst < 1e-6,
            f"max |posterior - integration| = {worst:.2e}")


# -- Temporal NIG oracle ------------------------------------------------------

def test_temporal_nig_oracle():
    from test_temporal import batch_nig_update

    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        p0 = NIGParams(mu0=float(rng.uniform(1, 20)), nu=float(rng.uniform(0.5, 5)),
                       alpha=float(rng.uniform(1.1, 6)), beta=float(rng.uniform(0.5, 10)))
        obs = [float(rng.uniform(0.5, 25)) for _ in range(int(rng.integers(1, 8)))]
        ref = batch_nig_update(p0, obs)
        m = TemporalModel({0: p0})
        for d in obs:
            m = m.update(0, d)
        p = m.params[0]
        worst = max(worst, abs(p.mu0 - ref.mu0), abs(p.nu - ref.nu),
                    abs(p.alpha - ref.alpha), abs(p.beta - ref.beta))
    seq_ok = worst < 1e-9

    m = TemporalModel({0: NIGParams(10.0, 1.0, 2.0, 4.0)}).update(0, 12.0)
    p = m.params[0]
    tuple_ok = (p.mu0, p.nu, p.alpha, p.beta) == (11.0, 2.0, 2.5, 5.0)
    e_mu, e_s2 = nig_posterior_by_integration(10.0, 1.0, 2.0, 4.0, [12.0])
    mu_hat, s2_hat = m.point_estimates(0)
    grid_ok = (abs(mu_hat - e_mu) / e_mu < 1e-3
               and abs(s2_hat - e_s2) / e_s2 < 1e-3)
    _report("temporal-nig-oracle", seq_ok and tuple_ok and grid_ok,
            f"seq-batch gap {worst:.2e}; worked example exact: {tuple_ok}; "
            f"grid integration rel err ({abs(mu_hat - e_mu) / e_mu:.2e}, "
            f"{abs(s2_hat - e_s2) / e_s2:.2e})")


# -- Timeline oracle ----------------------------------------------------------

def test_timeline_oracle():
    rng = np.random.default_rng(102)
    mismatches = 0
    deadlocks = 0
    for _ in range(1000):
        ts, g, durs = _random_instance(rng)
        oracle = enumerate_timeline(g, durs, ts)
        if oracle == DEADLOCK:
            deadlocks += 1
            try:
                simulate_timeline(g, durs, durs, ts)
                mismatches += 1
            except DeadlockError:
                pass
            continue
        o_start, o_finish, o_makespan = oracle
        res = simulate_timeline(g, durs, durs, ts)
        if abs(res.makespan - o_makespan) > 1e-9 or any(
                abs(res.start[t] - o_start[t]) > 1e-9
                or abs(res.finish[t] - o_finish[t]) > 1e-9 for t in ts.tasks):
            mismatches += 1
    _report("timeline-oracle", mismatches == 0,
            f"1000 cases, {deadlocks} deadlocks, {mismatches} mismatches")


# -- Steering dominance -------------------------------------------------------

def _corridor_blob_field(frng, spec, nodes):
    # blobs centered where routes actually pass, so steering has room to act
    centers = [(0.5, 0.5), (0.06, 0.5), (0.94, 0.5), (0.5, 0.3), (0.3, 0.45),
               (0.7, 0.55)]
    cx, cy = centers[frng.integers(len(centers))]
    cx += frng.uniform(-0.05, 0.05)
    cy += frng.uniform(-0.1, 0.1)
    r = frng.uniform(0.12, 0.3)
    m = np.full((spec.ny, spec.nx), 1e-6)
    d2 = (nodes[..., 0] - cx) ** 2 + (nodes[..., 1] - cy) ** 2
    m[d2 < r * r] = frng.uniform(0.6, 1.0)
    return SpatialCostField(2, spec, m, np.full((spec.ny, spec.nx), 0.05))


def test_steering_dominance(policy):
    spec = GridSpec()
    nodes = spec.nodes().reshape(spec.ny, spec.nx, 2)
    frng = np.random.default_rng(123)
    srng = np.random.default_rng(7)
    fails = []
    worst_p = 0.0
    for k in range(20):
        fld = _corridor_blob_field(frng, spec, nodes)
        gamma = frng.uniform(3, 30)
        task = int(frng.integers(0, 4))
        st = [value(policy.sample(task, [fld], gamma, srng), [fld], gamma)
              for _ in range(100)]
        un = [value(policy.sample_unsteered(task, srng), [fld], gamma)
              for _ in range(100)]
        p = stats.wilcoxon(st, un, alternative="less").pvalue
        worst_p = max(worst_p, p)
        if np.mean(st) > np.mean(un) or p >= 0.01:
            fails.append((k, task, round(gamma, 1), round(float(np.mean(st)), 2),
                          round(float(np.mean(un)), 2), p))
    dom_ok = not fails

    fld = _corridor_blob_field(frng, spec, nodes)
    st1 = [value(policy.sample(2, [fld], 10.0, srng, n_candidates=1), [fld], 10.0)
           for _ in range(500)]
    un1 = [value(policy.sample_unsteered(2, srng), [fld], 10.0)
           for _ in range(500)]
    p_n1 = stats.mannwhitneyu(st1, un1, alternative="two-sided").pvalue
    n1_ok = p_n1 > 0.1
    _report("steering-dominance", dom_ok and n1_ok,
            f"20 settings all dominated (worst p={worst_p:.2e}); "
            f"N=1 two-sided p={p_n1:.3f} (> 0.1)" +
            (f"; failures: {fails}" if fails else ""))


# -- Mode switching -----------------------------------------------------------

def test_mode_switching(policy):
    spec = GridSpec()
    nodes = spec.nodes().reshape(spec.ny, spec.nx, 2)
    m = np.full((spec.ny, spec.nx), 1e-6)
    mask = ((nodes[..., 0] >= 0.40) & (nodes[..., 0] <= 0.60)
            & (nodes[..., 1] >= 0.25) & (nodes[..., 1] <= 0.75))
    m[mask] = 1.0
    fld = SpatialCostField(2, spec, m, np.full((spec.ny, spec.nx), 0.05))
    rng = np.random.default_rng(14)
    outside = sum(
        not visits_region(policy.sample(3, [fld], 25.0, rng).points, MIDDLE_REGION)
        for _ in range(100))
    raw = policy.sample_raw_batch(3, rng, 100)
    middles = sum(visits_region(np.clip(r, 0, 1), MIDDLE_REGION) for r in raw)
    both = 0 < middles < 100
    _report("mode-switching", outside >= 90 and both,
            f"gamma=25: {outside}/100 outside (need >= 90); "
            f"gamma=0: {middles}/100 middle, both modes present: {both}")


# -- GA vs enumeration --------------------------------------------------------

def test_ga_vs_enumeration(world, library_policy):
    task_set = world.task_set()
    temporal = deterministic_temporal({0: 3.0, 1: 3.0, 2: 2.0, 3: 2.0})
    fields = {t: uniform_field(t, 1e-6) for t in range(4)}
    history = AllocationHistory.empty(4)
    cfg = GAConfig(population=40, generations=25, mc_draws=1, lam=0.0, gamma=1.75)
    d_init = initial_robot_durations(library_policy, task_set,
                                     np.random.default_rng(0))
    best_enum = math.inf
    mem = TrajectoryMemory()
    rng = np.random.default_rng(1)
    n_enum = 0
    for g in enumerate_genomes(task_set, max_waits=1):
        if not check_feasible(g, task_set):
            continue
        n_enum += 1
        res = evaluate(g, temporal, fields, library_policy, d_init, mem,
                       history, cfg, task_set, rng)
        best_enum = min(best_enum, res.z)

    wins = 0
    for seed in range(100):
        got = optimize(task_set, temporal, fields, library_policy, history, cfg,
                       np.random.default_rng(1000 + seed),
                       robot_durations_init=d_init, memory=TrajectoryMemory())
        if got.z <= best_enum * 1.01 + 1e-9:
            wins += 1
    _report("ga-vs-enumeration", wins >= 95,
            f"{wins}/100 runs within 1% of enumerated optimum "
            f"{best_enum:.4f} over {n_enum} feasible genomes (need >= 95)")


# -- Determinism --------------------------------------------------------------

def test_run_determinism(world, policy):
    cfg = RunConfig(cycles=4, archetype="fast_outside", seed=2024,
                    prior_paths=2,
                    ga=GAConfig(population=10, generations=3, mc_draws=16))
    a = run(cfg, policy=policy, world=world).to_jsonl(include_timings=False)
    b = run(cfg, policy=policy, world=world).to_jsonl(include_timings=False)
    _report("determinism", a == b,
            f"{len(a)} log bytes identical across pinned-seed reruns "
            "(timestamps excluded)")


# -- Ablation ordering (the long one) -----------------------------------------

def test_ablation_ordering(policy_path):
    config = RunConfig(cycles=16, seed=42, policy_path=policy_path,
                       prior_paths=0,
                       ga=GAConfig(population=28, generations=12, mc_draws=96))
    results = run_ablation_suite(config, trials=20)
    archetypes = results["protocol"]["archetypes"]

    def f3(arch, level):
        return results["cells"][f"{arch}|{level}"]["final3_median"]

    vs_none_ok = all(f3(a, "space+time") <= f3(a, "none") for a in archetypes)
    within5_ok = all(f3(a, "space+time") <= 1.05 * f3(a, lvl)
                     for a in archetypes for lvl in ("space", "time"))
    beats_space = sum(f3(a, "space+time") <= 0.95 * f3(a, "space")
                      for a in archetypes)
    beats_time = sum(f3(a, "space+time") <= 0.95 * f3(a, "time")
                     for a in archetypes)
    detail = "; ".join(
        f"{a}: s+t={f3(a, 'space+time'):.2f} space={f3(a, 'space'):.2f} "
        f"time={f3(a, 'time'):.2f} none={f3(a, 'none'):.2f}"
        for a in archetypes)
    _report("ablation-ordering",
            vs_none_ok and within5_ok and beats_space >= 2 and beats_time >= 1,
            f"<=none on all: {vs_none_ok}; within +5% of singles: {within5_ok}; "
            f">=5% vs space on {beats_space}/4 (need 2); "
            f">=5% vs time on {beats_time}/4 (need 1) || {detail}")
