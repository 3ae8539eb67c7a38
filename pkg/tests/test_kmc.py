import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from wasep.kmc import EventSchedule, OriginIntegrator, measure, occupation_time_origin, run_replica
from wasep.model import Configuration, sample_initial
from wasep.observables import build_plan
from wasep.pde import solve_hydro
from wasep.reference import run_reference

from conftest import make_spec


def drift_sin():
    return ("cosine", {"amplitude": 1.0, "k": 1, "phase": -np.pi / 2})


def test_schedule_validation():
    s = EventSchedule.uniform(0.2, 0.001)
    assert len(s.times) == 201
    assert s.horizon == 0.2
    with pytest.raises(ValueError):
        EventSchedule(np.array([0.1, 0.1]))
    with pytest.raises(ValueError):
        EventSchedule.uniform(0.2, 0.001, extras=[0.3])


def test_bit_identical_replicas():
    spec = make_spec(n=64, drift=drift_sin(), horizon=0.05)
    rho = solve_hydro(spec, m=64, t_end=0.05)
    sched = EventSchedule.uniform(0.05, 0.005)
    plan = build_plan(spec, rho, sched.times,
                      functions={"f": np.cos(2 * np.pi * spec.sites())},
                      eps_ladder=(0.2,), gamma_times=(0.05,))
    a = run_replica(spec, 42, sched, plan)
    b = run_replica(spec, 42, sched, plan)
    assert np.array_equal(a.gamma, b.gamma)
    assert np.array_equal(a.flip_times, b.flip_times)
    assert np.array_equal(a.final_config.eta, b.final_config.eta)
    assert a.clock.event_count == b.clock.event_count
    c = run_replica(spec, 43, sched, plan)
    assert not np.array_equal(a.final_config.eta, c.final_config.eta)


def test_conservation_and_exclusion():
    spec = make_spec(n=64, drift=drift_sin(), horizon=0.05,
                     profile=("cosine", {"offset": 0.5, "amplitude": 0.3, "k": 1}), margin=0.1)
    sched = EventSchedule.uniform(0.05, 0.05)
    plan = build_plan(spec, None, sched.times)
    gen = np.random.Generator(np.random.PCG64(5))
    init = sample_initial(spec, gen)
    plan.initial_config = init
    rec = run_replica(spec, 9, sched, plan)
    assert set(np.unique(rec.final_config.eta)) <= {0, 1}
    assert rec.final_config.particle_count == init.particle_count


def test_empty_and_full_lattices():
    empty = make_spec(n=16, profile=("constant", {"value": 0.0}), validate=False, horizon=0.05)
    sched = EventSchedule.uniform(0.05, 0.05)
    rec = run_replica(empty, 1, sched, build_plan(empty, None, sched.times))
    assert rec.clock.event_count == 0
    assert rec.origin.occupation(0.05) == 0.0

    full = make_spec(n=16, profile=("constant", {"value": 1.0}), validate=False, horizon=0.05)
    rec = run_replica(full, 1, sched, build_plan(full, None, sched.times))
    assert rec.final_config.particle_count == 16
    assert rec.origin.occupation(0.05) == pytest.approx(0.05, abs=1e-15)
    assert len(rec.flip_times) == 0


def test_kernel_matches_reference_in_lockstep():
    """Feed the identical pre-drawn randomness to both implementations."""
    spec = make_spec(n=32, drift=drift_sin(), horizon=0.02,
                     profile=("cosine", {"offset": 0.5, "amplitude": 0.2, "k": 1}))
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(77)))
    init = sample_initial(spec, gen)

    B = 1 << 16
    first = gen.standard_exponential()
    exps = gen.standard_exponential(B)
    picks = gen.random(B)
    coins = gen.random(B)
    t_end = 0.02 * 32 * 32

    ref = run_reference(spec, init, t_end, buffers=(first, exps, picks, coins))
    assert ref.events < B  # buffers were large enough for a single segment

    from wasep._kernels import advance

    eta = init.eta.copy()
    positions = init.positions()
    clock = np.array([first / (2.0 * init.particle_count), 0.0])
    idx = np.zeros(1, dtype=np.int64)
    stats = np.zeros(1, dtype=np.int64)
    nflips = np.zeros(1, dtype=np.int64)
    flips = np.zeros(1 << 12)
    acc = np.zeros(2)
    z = np.zeros(0)
    rc = advance(eta, positions, spec.right_probabilities(), t_end, clock, idx, stats,
                 exps, picks, coins, flips, nflips, False, z, z, z, acc)
    assert rc == 0
    assert np.array_equal(eta, ref.eta)
    assert stats[0] == ref.events
    assert nflips[0] == len(ref.origin_flips)
    assert np.allclose(flips[: nflips[0]], ref.origin_flips, rtol=0, atol=0)


def test_attempt_rates_match_drift():
    """Conditional rate of attempted right jumps from x is 1 + F(x/n)/n."""
    spec = make_spec(n=16, drift=drift_sin(), horizon=1.0)
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(3)))
    init = sample_initial(spec, gen)
    t_end = 30_000.0
    ref = run_reference(spec, init, t_end, rng=gen)
    u = spec.sites()
    expected = 1.0 + np.sin(2 * np.pi * u) / 16
    occ = ref.site_occupation
    mask = occ > 1000.0
    rate = ref.attempts_right[mask] / occ[mask]
    se = np.sqrt(ref.attempts_right[mask]) / occ[mask]
    assert np.all(np.abs(rate - expected[mask]) <= 3.0 * se)


def test_single_particle_occupation_uniform():
    """One symmetric walker spends a quarter of its time on each site."""
    n = 4
    spec = make_spec(n=n, profile=("constant", {"value": 0.5}), horizon=1.0, validate=False)
    init = Configuration.from_eta([1, 0, 0, 0])
    # exact stationary law of the 4-state position chain (rates 1 both ways)
    Q = np.zeros((n, n))
    for x in range(n):
        Q[x, (x + 1) % n] += 1.0
        Q[x, (x - 1) % n] += 1.0
        Q[x, x] = -2.0
    w, vl = np.linalg.eig(Q.T)
    pi = np.real(vl[:, np.argmin(np.abs(w))])
    pi /= pi.sum()
    assert np.allclose(pi, 0.25, atol=1e-12)

    t_end = 2.0e5
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(11)))
    ref = run_reference(spec, init, t_end, rng=gen)
    frac = ref.site_occupation / t_end
    # time-average variance ~ 2 tau_corr p(1-p) / T with tau_corr ~ 1/gap, gap = 2
    se = np.sqrt(2.0 * 0.5 * 0.25 * 0.75 / t_end)
    assert np.all(np.abs(frac - 0.25) <= 3.0 * se + 3.0 / t_end)


def test_small_system_matches_matrix_exponential():
    """Marginal at T on a 5-site lattice against the dense generator."""
    from itertools import combinations

    n, T = 5, 0.08
    spec = make_spec(n=n, drift=("cosine", {"amplitude": 1.0, "k": 1}),
                     profile=("constant", {"value": 0.4}), horizon=T)
    states = list(combinations(range(n), 2))
    sidx = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s in states:
        occ = set(s)
        for x in s:
            for d in (+1, -1):
                y = (x + d) % n
                if y not in occ:
                    t2 = tuple(sorted((occ - {x}) | {y}))
                    Q[sidx[s], sidx[t2]] += 1.0 + d * np.cos(2 * np.pi * x / n) / n
    np.fill_diagonal(Q, Q.diagonal() - Q.sum(axis=1))
    eta0 = np.zeros(n, dtype=np.uint8)
    eta0[[0, 2]] = 1
    p_exact = expm(Q.T * (T * n * n))[:, sidx[(0, 2)]]

    sched = EventSchedule(np.array([T]))
    plan = build_plan(spec, None, sched.times, keep_final=True,
                      initial_config=Configuration.from_eta(eta0))
    M = 20_000
    counts = np.zeros(len(states))
    masks = {sum(1 << x for x in s): i for i, s in enumerate(states)}
    for child in np.random.SeedSequence(7).spawn(M):
        rec = run_replica(spec, child, sched, plan)
        counts[masks[rec.final_config.as_int()]] += 1
    tv = 0.5 * np.abs(counts / M - p_exact).sum()
    assert tv < 0.02


def test_origin_integrator_exact_plain_integral():
    flips = np.array([0.1, 0.25, 0.4, 0.65])
    q = lambda s: np.ones_like(np.asarray(s, dtype=float))
    occ = OriginIntegrator(flips, 1, 1.0, q)
    # occupied on [0, 0.1] and [0.25, 0.4] and [0.65, 1.0]
    assert occ.occupation(0.05) == pytest.approx(0.05)
    assert occ.occupation(0.2) == pytest.approx(0.1)
    assert occ.occupation(0.3) == pytest.approx(0.15)
    assert occ.occupation(0.5) == pytest.approx(0.25)
    assert occ.occupation(1.0) == pytest.approx(0.6)
    assert occ.weighted(1.0) == pytest.approx(0.6)


def test_origin_integrator_weighted_against_quadrature():
    # flip spacing comparable to an actual run; 4-node Gauss is then exact
    # far beyond the comparison tolerance of the reference quadrature
    gen = np.random.Generator(np.random.PCG64(2))
    flips = np.sort(gen.uniform(0.0, 0.2, 40))
    weight = lambda s: 1.5 + 0.5 * np.cos(2 * np.pi * np.asarray(s, dtype=float) / 0.2)
    occ = OriginIntegrator(flips, 0, 0.2, weight)
    intervals = list(zip(flips[0::2], flips[1::2]))
    for t in (0.03, 0.11, 0.2):
        expect = 0.0
        for a, b in intervals:
            if t > a:
                expect += quad(lambda s: 1.0 / weight(s), a, min(b, t), limit=100)[0]
        assert occ.weighted(t) == pytest.approx(expect, abs=1e-12)
    # constant weight reduces to the plain occupation exactly
    flat = OriginIntegrator(flips, 0, 0.2, lambda s: 2.0 * np.ones_like(np.asarray(s, dtype=float)))
    assert flat.weighted(0.2) == pytest.approx(flat.occupation(0.2) / 2.0, abs=1e-15)


def test_occupation_time_value_and_gamma():
    """Origin occupied throughout, flat density 1/2: (1/sqrt n)(t - t/2)."""
    q = lambda s: np.ones_like(np.asarray(s, dtype=float))
    occ = OriginIntegrator(np.zeros(0), 1, 0.2, q)
    weighted = occ.weighted(0.2)
    det = 0.5 * 0.2  # int rho/q with rho(0) = 1/2, q = 1
    gamma = (weighted - det) / np.sqrt(100)
    assert gamma == pytest.approx(0.01, abs=1e-15)


def test_gamma_requires_density():
    spec = make_spec(n=16, horizon=0.02)
    sched = EventSchedule.uniform(0.02, 0.01)
    rec = run_replica(spec, 3, sched, build_plan(spec, None, sched.times))
    with pytest.raises(RuntimeError, match="density"):
        occupation_time_origin(rec, spec, 0.01)


def test_gamma_consistent_between_snapshot_and_arbitrary_time():
    spec = make_spec(n=32, drift=drift_sin(), horizon=0.05)
    rho = solve_hydro(spec, m=64, t_end=0.05)
    sched = EventSchedule.uniform(0.05, 0.005)
    plan = build_plan(spec, rho, sched.times, gamma_times=(0.05,))
    rec = run_replica(spec, 17, sched, plan)
    for k, t in enumerate(rec.times):
        if t == 0.0:
            continue
        assert rec.gamma[k] == pytest.approx(occupation_time_origin(rec, spec, t), abs=1e-12)


def test_overshoot_events_discarded():
    """The trajectory stops exactly at the horizon; occupation never exceeds it."""
    spec = make_spec(n=16, horizon=0.01, profile=("constant", {"value": 0.9}), margin=0.05)
    sched = EventSchedule.uniform(0.01, 0.01)
    rec = run_replica(spec, 21, sched, build_plan(spec, None, sched.times))
    assert rec.origin.occupation(0.01) <= 0.01 + 1e-15
    assert np.all(rec.flip_times <= 0.01 + 1e-15)


def test_measure_extracts_requested_scalars():
    spec = make_spec(n=32, drift=drift_sin(), horizon=0.05)
    rho = solve_hydro(spec, m=64, t_end=0.05)
    sched = EventSchedule.uniform(0.05, 0.005)
    plan = build_plan(
        spec, rho, sched.times,
        functions={"f": np.cos(2 * np.pi * spec.sites())},
        eps_ladder=(0.25,),
        gamma_times=(0.05,), z_times=(0.05,), x_times=(0.05,),
    )
    rec = run_replica(spec, 51, sched, plan)
    row = measure(rec, plan)
    assert set(row) == {"Gamma@0.05", "Z[0.25]@0.05", "X[f]@0.05", "events"}
    assert row["events"] == rec.clock.event_count
