import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from wasep.kmc import EventSchedule, run_replica
from wasep.model import Configuration
from wasep.observables import (
    Mollifier,
    build_plan,
    chi,
    delta_test_function,
    empirical_measure,
    fluctuation_field,
    indicator_test_values,
    w_field,
    z_discrete,
)
from wasep.pde import solve_hydro

from conftest import make_spec


def test_w_field_values():
    spec = make_spec(n=4)
    cfg = Configuration.from_eta([1, 0, 1, 1])
    w = w_field(cfg, np.full(4, 0.5), spec)
    assert np.allclose(w, [2.0, -2.0, 2.0, 2.0])
    w2 = w_field(Configuration.from_eta([1, 0, 0, 0]), np.full(4, 0.25), spec)
    assert w2[0] == pytest.approx(0.75 / 0.1875)
    assert w2[0] == pytest.approx(4.0)


def test_w_field_guards_vanishing_chi():
    spec = make_spec(n=4)
    with pytest.raises(ValueError, match="chi"):
        w_field(Configuration.from_eta([1, 0, 0, 0]), np.array([0.5, 1e-12, 0.5, 0.5]), spec)


def test_fluctuation_field_hand_values():
    spec = make_spec(n=4)
    cfg = Configuration.from_eta([1, 1, 1, 1])
    assert fluctuation_field(cfg, np.full(4, 0.5), np.ones(4), spec) == pytest.approx(1.0)
    assert fluctuation_field(cfg, np.full(4, 0.5), np.zeros(4), spec) == 0.0

    spec6 = make_spec(n=6)
    cfg6 = Configuration.from_eta([1, 0, 1, 0, 1, 0])
    f = np.arange(6) / 6
    got = fluctuation_field(cfg6, np.full(6, 0.5), f, spec6)
    brute = sum((cfg6.eta[x] - 0.5) * (x / 6) for x in range(6)) / np.sqrt(6)
    assert got == pytest.approx(brute, abs=1e-15)
    assert got == pytest.approx(-0.10206, abs=1e-5)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    seed=st.integers(0, 2**16),
)
def test_fluctuation_field_linearity(a, b, seed):
    spec = make_spec(n=32)
    gen = np.random.Generator(np.random.PCG64(seed))
    cfg = Configuration.from_eta((gen.random(32) < 0.5).astype(np.uint8))
    rho = 0.2 + 0.6 * gen.random(32)
    f = gen.standard_normal(32)
    g = gen.standard_normal(32)
    lhs = fluctuation_field(cfg, rho, a * f + b * g, spec)
    rhs = a * fluctuation_field(cfg, rho, f, spec) + b * fluctuation_field(cfg, rho, g, spec)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_empirical_measure_values():
    spec = make_spec(n=8)
    cfg = Configuration.from_eta([1, 1, 0, 0, 1, 0, 0, 0])
    assert empirical_measure(cfg, np.ones(8), spec) == pytest.approx(3 / 8)
    empty = Configuration.from_eta(np.zeros(8, dtype=np.uint8))
    assert empirical_measure(empty, np.ones(8), spec) == 0.0
    # discrete orthogonality: the full lattice pairs to zero with one mode
    full = Configuration.from_eta(np.ones(64, dtype=np.uint8))
    spec64 = make_spec(n=64)
    f = np.cos(2 * np.pi * np.arange(64) / 64)
    assert abs(empirical_measure(full, f, spec64)) < 1e-14


def test_mollifier_mass_and_support():
    for eps in (0.3, 0.1):
        moll = Mollifier(eps)
        mass, err = quad(lambda u: float(moll(np.array(u))), 0.0, eps, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)
        u = np.linspace(0, 1, 4001)
        v = moll(u)
        assert np.all(v >= 0)
        assert np.all(v[(u > eps) & (u < 1.0)] == 0.0)
    with pytest.raises(ValueError):
        Mollifier(1.5)


def test_mollifier_riemann_bound():
    # |1 - (1/n) sum phi_eps(x/n)| <= sup|phi'| / (eps n), checked at eps n >= 8
    u = np.linspace(1e-9, 1 - 1e-9, 1 << 20)
    moll = Mollifier(0.5)
    phi_prime_sup = np.max(np.abs(np.gradient(moll.base(u), u)))
    for n, eps in ((64, 0.125), (128, 0.125), (128, 0.0625), (256, 0.125)):
        assert eps * n >= 8
        defect = abs(1.0 - Mollifier(eps).grid_mass(n))
        assert defect <= phi_prime_sup / (eps * n)


def test_delta_test_function_equilibrium_reduces_to_bump():
    moll = Mollifier(0.2)
    sites = np.arange(64) / 64
    g = delta_test_function(moll, np.full(64, 0.5), 0.5, 1.0, sites)
    assert np.allclose(g.values, moll(sites))


def test_delta_test_function_scales_inverse_q():
    moll = Mollifier(0.2)
    sites = np.arange(64) / 64
    rho = 0.4 + 0.1 * np.cos(2 * np.pi * sites)
    g1 = delta_test_function(moll, rho, rho[0], 1.0, sites)
    g2 = delta_test_function(moll, rho, rho[0], 2.0, sites)
    assert np.allclose(g2.values, g1.values / 2.0)


def test_centered_occupation_identity():
    # (eta(0) - rho(0)) / q equals w(0) chi(rho(0)) / q for both occupancies
    rho0, q = 0.37, 1.7
    for eta0 in (0, 1):
        lhs = (eta0 - rho0) / q
        w0 = (eta0 - rho0) / chi(rho0)
        assert lhs == pytest.approx(w0 * chi(rho0) / q, abs=1e-15)


def test_indicator_variant_mass_and_support():
    sites = np.arange(128) / 128
    vals = indicator_test_values(0.25, np.full(128, 0.5), 0.5, 1.0, sites)
    inside = (sites > 0) & (sites < 0.25)
    assert np.all(vals[~inside] == 0.0)
    assert np.mean(vals) == pytest.approx(1.0, abs=0.05)  # Riemann mass of eps^{-1} window


def test_plan_rejects_unresolved_mollifier():
    spec = make_spec(n=8, horizon=0.02)
    rho = solve_hydro(spec, m=32, t_end=0.02)
    with pytest.raises(ValueError, match="unresolved"):
        build_plan(spec, rho, np.array([0.0, 0.02]), eps_ladder=(0.2,))
    with pytest.raises(ValueError, match="density"):
        build_plan(spec, None, np.array([0.0, 0.02]), eps_ladder=(0.5,))


def test_z_discrete_reads_recorded_ladder():
    spec = make_spec(n=64, drift=("cosine", {"amplitude": 1.0, "k": 1}), horizon=0.05)
    rho = solve_hydro(spec, m=64, t_end=0.05)
    sched = EventSchedule.uniform(0.05, 0.0025)
    plan = build_plan(spec, rho, sched.times, eps_ladder=(0.25, 0.125))
    rec = run_replica(spec, 8, sched, plan)
    val = z_discrete(rec, rho, Mollifier(0.25), spec, 0.05)
    assert val == pytest.approx(rec.z_values[0.25][-1])
    # interior times interpolate the cumulative trapezoid
    mid = z_discrete(rec, rho, Mollifier(0.25), spec, 0.03)
    k = np.searchsorted(rec.times, 0.03)
    assert rec.z_values[0.25][k - 1] != mid
    with pytest.raises(KeyError):
        z_discrete(rec, rho, Mollifier(0.0625), spec, 0.05)
    with pytest.raises(ValueError, match="unresolved"):
        z_discrete(rec, rho, Mollifier(0.01), spec, 0.05)


def test_z_series_zero_for_zero_integrand():
    """A vanishing integrand accumulates to exactly zero."""
    spec = make_spec(n=64, horizon=0.05)
    rho = solve_hydro(spec, m=64, t_end=0.05)
    sched = EventSchedule.uniform(0.05, 0.0025)
    plan = build_plan(spec, rho, sched.times, eps_ladder=(0.25,))
    plan.g_arrays[0.25][:] = 0.0
    rec = run_replica(spec, 8, sched, plan)
    assert np.all(rec.z_values[0.25] == 0.0)


def test_empty_lattice_centered_at_zero_density():
    """Empty lattice against a zero profile: all centered observables vanish."""
    spec = make_spec(n=16, profile=("constant", {"value": 0.0}), validate=False, horizon=0.02)
    cfg = Configuration.from_eta(np.zeros(16, dtype=np.uint8))
    assert fluctuation_field(cfg, np.zeros(16), np.ones(16), spec) == 0.0
    assert empirical_measure(cfg, np.ones(16), spec) == 0.0
