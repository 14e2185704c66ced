import numpy as np
import pytest

from teamplan.domain import (Agent, AllocationHistory, DeadlockError,
                             ScheduleGenome, TaskSet, do, wait)
from teamplan.timeline import check_feasible, diversity_cost, simulate_timeline

from oracles import (DEADLOCK, check_timeline_constraints, diversity_by_enumeration,
                     enumerate_timeline)


def make_task_set(n, precedence=()):
    return TaskSet(n_tasks=n, precedence=frozenset(precedence),
                   goals=tuple((0.1 * i, 0.1 * i) for i in range(n)))


FETCH_PREC = [(2, 0), (2, 1), (3, 0), (3, 1)]


@pytest.fixture
def fetch_tasks():
    return make_task_set(4, FETCH_PREC)


def test_single_agent_serial_sum():
    ts = make_task_set(2)
    g = ScheduleGenome(human_seq=(do(0), do(1)), robot_seq=())
    res = simulate_timeline(g, {0: 3.0, 1: 4.0}, {}, ts)
    assert res.makespan == pytest.approx(7.0)
    assert res.interval(0) == (0.0, 3.0)
    assert res.interval(1) == (3.0, 7.0)


def test_fetch_parallel_instance(fetch_tasks):
    # Expected values frozen from the exhaustive interleaving oracle.
    g = ScheduleGenome(human_seq=(do(2), do(1)), robot_seq=(do(3), do(0)))
    dur = {t: 1.0 for t in range(4)}
    oracle = enumerate_timeline(g, dur, fetch_tasks)
    assert oracle != DEADLOCK
    o_start, o_finish, o_makespan = oracle
    assert o_makespan == pytest.approx(2.0)
    assert o_start[0] == pytest.approx(1.0)
    assert o_start[1] == pytest.approx(1.0)

    res = simulate_timeline(g, dur, dur, fetch_tasks)
    assert res.makespan == pytest.approx(2.0)
    for t in range(4):
        assert res.start[t] == pytest.approx(o_start[t])
        assert res.finish[t] == pytest.approx(o_finish[t])


def test_wait_on_unassigned_task_rejected():
    ts = make_task_set(3)
    # task 2 is never assigned: genome invalid, rejected at the precondition
    g = ScheduleGenome(human_seq=(do(1),), robot_seq=(wait(2), do(0)))
    with pytest.raises(ValueError):
        simulate_timeline(g, {1: 1.0}, {0: 1.0}, ts)


def test_mutual_waits_deadlock():
    ts = make_task_set(2)
    g = ScheduleGenome(human_seq=(wait(0), do(1)), robot_seq=(wait(1), do(0)))
    with pytest.raises(DeadlockError):
        simulate_timeline(g, {1: 1.0}, {0: 1.0}, ts)
    assert not check_feasible(g, ts)


def test_agent_internal_precedence_violation():
    ts = make_task_set(4, [(2, 0), (2, 1), (3, 0), (3, 1)])
    g = ScheduleGenome(human_seq=(do(0), do(2)), robot_seq=(do(3), do(1)))
    # oracle agrees this stalls
    assert enumerate_timeline(g, {t: 1.0 for t in range(4)}, ts) == DEADLOCK
    assert not check_feasible(g, ts)


def test_missing_task_infeasible(fetch_tasks):
    g = ScheduleGenome(human_seq=(do(2),), robot_seq=(do(3), do(0)))
    assert not check_feasible(g, fetch_tasks)


def test_paper_wait_example_feasible(fetch_tasks):
    g = ScheduleGenome(human_seq=(do(2), do(1)), robot_seq=(do(3), wait(1), do(0)))
    assert check_feasible(g, fetch_tasks)
    res = simulate_timeline(g, {2: 2.0, 1: 3.0}, {3: 1.0, 0: 1.0}, fetch_tasks)
    # robot idles at the wait until task 1 finishes at t=5
    assert res.start[0] == pytest.approx(5.0)


def _random_instance(rng):
    n = rng.integers(1, 6)
    order = rng.permutation(n)
    prec = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.3:
                prec.add((int(order[a]), int(order[b])))
    ts = make_task_set(int(n), prec)
    agent_of = rng.integers(0, 2, size=n)
    seqs = {0: [], 1: []}
    for t in rng.permutation(n):
        seqs[int(agent_of[t])].append(do(int(t)))
    # sprinkle waits targeting the other agent's tasks
    for a in (0, 1):
        others = [t for t in range(n) if agent_of[t] != a]
        if others and seqs[a] and rng.random() < 0.5:
            t = int(others[rng.integers(len(others))])
            pos = int(rng.integers(0, len(seqs[a])))  # never final
            seqs[a].insert(pos, wait(t))
    g = ScheduleGenome(human_seq=tuple(seqs[0]), robot_seq=tuple(seqs[1]))
    durs = {t: float(rng.integers(1, 5)) for t in range(n)}
    return ts, g, durs


def test_simulation_matches_interleaving_oracle():
    rng = np.random.default_rng(7)
    n_deadlocks = 0
    for _ in range(300):
        ts, g, durs = _random_instance(rng)
        oracle = enumerate_timeline(g, durs, ts)
        if oracle == DEADLOCK:
            n_deadlocks += 1
            with pytest.raises(DeadlockError):
                simulate_timeline(g, durs, durs, ts)
            assert not check_feasible(g, ts)
            continue
        assert check_feasible(g, ts)
        o_start, o_finish, o_makespan = oracle
        res = simulate_timeline(g, durs, durs, ts)
        assert res.makespan == pytest.approx(o_makespan)
        for t in ts.tasks:
            assert res.start[t] == pytest.approx(o_start[t])
            assert res.finish[t] == pytest.approx(o_finish[t])
        check_timeline_constraints(g, durs, ts, res.start, res.finish)
    assert n_deadlocks > 5  # generator actually exercises the deadlock path


def test_feasible_implies_no_deadlock_for_any_durations():
    rng = np.random.default_rng(11)
    for _ in range(100):
        ts, g, durs = _random_instance(rng)
        feasible = check_feasible(g, ts)
        for _ in range(5):
            d2 = {t: float(rng.uniform(0.1, 10)) for t in ts.tasks}
            if feasible:
                res = simulate_timeline(g, d2, d2, ts)
                check_timeline_constraints(g, d2, ts, res.start, res.finish)
            else:
                with pytest.raises((DeadlockError, ValueError)):
                    simulate_timeline(g, d2, d2, ts)


def test_diversity_balanced_is_zero():
    ts = make_task_set(2)
    g = ScheduleGenome(human_seq=(do(0),), robot_seq=(do(1),))
    h = AllocationHistory(np.array([[2, 3], [3, 2]]))  # becomes 3/3 after genome
    assert diversity_cost(g, h) == pytest.approx(0.0)


def test_diversity_single_task_worked_example():
    # one task, counts (human 0, robot 1) + robot assignment -> (0, 2)
    # frozen from the longhand enumeration oracle: 1.0
    ts = make_task_set(1)
    g = ScheduleGenome(human_seq=(), robot_seq=(do(0),))
    h = AllocationHistory(np.array([[0, 1]]))
    expected = diversity_by_enumeration(np.array([[0.0, 2.0]]))
    assert expected == pytest.approx(1.0)
    assert diversity_cost(g, h) == pytest.approx(expected)


def test_diversity_translation_invariant():
    rng = np.random.default_rng(3)
    ts = make_task_set(3)
    g = ScheduleGenome(human_seq=(do(0), do(2)), robot_seq=(do(1),))
    base = rng.integers(0, 5, size=(3, 2))
    h1 = AllocationHistory(base.copy())
    h2 = AllocationHistory(base + np.array([[4, 4], [1, 1], [7, 7]]))
    assert diversity_cost(g, h1) == pytest.approx(diversity_cost(g, h2))


def test_diversity_nonnegative_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        ts, g, _ = _random_instance(rng)
        h = AllocationHistory(rng.integers(0, 6, size=(ts.n_tasks, 2)))
        zd = diversity_cost(g, h)
        assert zd >= 0.0
        assert zd == pytest.approx(diversity_by_enumeration(
            h.counts + _genome_counts(g, ts.n_tasks)))


def _genome_counts(g, n):
    add = np.zeros((n, 2))
    for t in g.do_tasks(Agent.HUMAN):
        add[t, 0] = 1
    for t in g.do_tasks(Agent.ROBOT):
        add[t, 1] = 1
    return add
