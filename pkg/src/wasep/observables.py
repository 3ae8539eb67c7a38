"""Functionals of configurations and density fields.

Centered observables measure the gap between the particle system and the
deterministic density: the fluctuation field pairs the centered occupation
with a test function at scale 1/sqrt(n); the compressibility-normalized
field w divides the centered occupation by chi(rho) = rho(1-rho); and the
time-integrated pairing with a moving mollified-delta test function yields
the running functional that tracks the weighted occupation time of the
origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .model import Configuration, ModelSpec
from .pde import DensityField

__all__ = [
    "Mollifier",
    "DeltaTestFunction",
    "chi",
    "w_field",
    "fluctuation_field",
    "empirical_measure",
    "delta_test_function",
    "indicator_test_values",
    "z_discrete",
    "ObservablePlan",
    "build_plan",
]

_CHI_FLOOR = 1e-9
MIN_MOLLIFIER_SITES = 4


def chi(rho):
    """Compressibility rho (1 - rho): the static variance of one occupation."""
    return rho * (1.0 - rho)


def _bump_raw(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (ui * (1.0 - ui)))
    return out


@lru_cache(maxsize=1)
def _bump_constant() -> float:
    val, _ = quad(lambda u: float(_bump_raw(u)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14, limit=200)
    return 1.0 / val


@dataclass(frozen=True)
class Mollifier:
    """Smooth nonnegative bump of width eps, unit mass, support (0, eps).

    phi(u) = c exp(-1/(u(1-u))) on (0,1), scaled as phi_eps(u) = phi(u/eps)/eps.
    """

    eps: float
    constant: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"mollifier width must lie in (0,1), got {self.eps}")
        object.__setattr__(self, "constant", _bump_constant())

    def __call__(self, u):
        u = np.asarray(u, dtype=float) % 1.0
        return self.constant * _bump_raw(u / self.eps) / self.eps

    def base(self, u):
        """The unscaled unit-mass bump on (0,1)."""
        return self.constant * _bump_raw(u)

    def grid_mass(self, n: int) -> float:
        """(1/n) sum_x phi_eps(x/n), the lattice Riemann mass."""
        return float(np.mean(self(np.arange(n) / n)))


@dataclass(frozen=True)
class DeltaTestFunction:
    """The moving delta approximation g_s = phi_eps chi(rho_s(0)) / (q_s chi(rho_s))."""

    time: float
    values: np.ndarray


def w_field(config: Configuration, rho_slice: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """(eta(x) - rho_x) / chi(rho_x) per site."""
    rho_slice = np.asarray(rho_slice, dtype=float)
    c = chi(rho_slice)
    if np.any(c < _CHI_FLOOR):
        raise ValueError(
            f"chi(rho) below {_CHI_FLOOR} at some site; density solution invalid upstream"
        )
    return (config.eta.astype(float) - rho_slice) / c


def fluctuation_field(
    config: Configuration, rho_slice: np.ndarray, f_values: np.ndarray, spec: ModelSpec
) -> float:
    """n^{-1/2} sum_x (eta(x) - rho(x/n)) f(x/n)."""
    centered = config.eta.astype(float) - np.asarray(rho_slice, dtype=float)
    return float(centered @ np.asarray(f_values, dtype=float)) / np.sqrt(spec.n)


def empirical_measure(config: Configuration, f_values: np.ndarray, spec: ModelSpec) -> float:
    """n^{-1} sum_x eta(x) f(x/n): the mass the configuration assigns to f."""
    return float(config.eta.astype(float) @ np.asarray(f_values, dtype=float)) / spec.n


def delta_test_function(
    moll: Mollifier,
    rho_slice: np.ndarray,
    rho_origin: float,
    q_value: float,
    sites: np.ndarray,
    time: float = 0.0,
) -> DeltaTestFunction:
    """g_s at the given site positions for one time slice of the density."""
    c = chi(np.asarray(rho_slice, dtype=float))
    if np.any(c < _CHI_FLOOR):
        raise ValueError("chi(rho) vanishes; cannot form the delta test function")
    vals = moll(sites) * chi(rho_origin) / (q_value * c)
    return DeltaTestFunction(time=time, values=vals)


def indicator_test_values(
    eps: float,
    rho_slice: np.ndarray,
    rho_origin: float,
    q_value: float,
    sites: np.ndarray,
) -> np.ndarray:
    """Sharp-window variant: eps^{-1} 1_{(0,eps)} in place of the smooth bump.

    Kept as a diagnostic only; out of equilibrium the sharp window is a
    poorer delta approximation than the smooth bump.
    """
    c = chi(np.asarray(rho_slice, dtype=float))
    ind = ((sites % 1.0) > 0.0) & ((sites % 1.0) < eps)
    return np.where(ind, 1.0 / eps, 0.0) * chi(rho_origin) / (q_value * c)


# ---------------------------------------------------------------------------
# Observable plan: everything a replica needs to evaluate its snapshots.
# ---------------------------------------------------------------------------


@dataclass
class ObservablePlan:
    """Precomputed per-snapshot coefficient arrays shared by all replicas.

    All members are derived deterministically from (spec, density, schedule,
    requested outputs); replicas only take dot products against them.
    """

    spec: ModelSpec
    density: DensityField | None
    times: np.ndarray                      # snapshot times, macroscopic
    rho_sites: np.ndarray                  # (S, n) rho at sites per snapshot
    rho_origin: np.ndarray                 # (S,)
    q_values: np.ndarray                   # (S,)
    functions: dict                        # name -> (n,) test function at sites
    g_arrays: dict                         # eps -> (S, n) delta test function
    det_grid: np.ndarray                   # fine time grid for int rho(0)/q
    det_cum: np.ndarray                    # cumulative integral on det_grid
    dynkin: dict                           # name -> dict(lap, c1, c2, corr)
    gamma_times: tuple = ()
    z_times: tuple = ()
    x_times: tuple = ()
    dynkin_times: tuple = ()
    eta_mean_times: tuple = ()
    keep_final: bool = False
    initial_config: Configuration | None = None

    def det_integral(self, t) -> np.ndarray:
        """int_0^t rho_s(0)/q_s ds from the cached dense cumulative."""
        return np.interp(t, self.det_grid, self.det_cum)


def build_plan(
    spec: ModelSpec,
    density: DensityField | None,
    snapshot_times: np.ndarray,
    functions: dict | None = None,
    eps_ladder: tuple = (),
    dynkin_functions: tuple = (),
    gamma_times: tuple = (),
    z_times: tuple = (),
    x_times: tuple = (),
    dynkin_times: tuple = (),
    eta_mean_times: tuple = (),
    keep_final: bool = False,
    initial_config: Configuration | None = None,
    det_grid_size: int = 4097,
) -> ObservablePlan:
    """Assemble the per-snapshot coefficient tables for an ensemble run.

    `functions` maps column names to site-value arrays (n,).  Fields that
    need the density (the delta test functions, the centered field, the
    occupation-time centering) require `density` to cover the horizon.
    """
    times = np.asarray(snapshot_times, dtype=float)
    n = spec.n
    sites = spec.sites()
    functions = dict(functions or {})

    if density is not None:
        rho_sites = np.stack([density.at_sites(t, n) for t in times])
        rho_origin = rho_sites[:, 0].copy()
    else:
        if eps_ladder or gamma_times or z_times or dynkin_functions:
            raise ValueError("these observables need a density field attached")
        rho_sites = np.tile(spec.profile_at_sites(), (len(times), 1))
        rho_origin = rho_sites[:, 0].copy()
    q_values = np.asarray(spec.weight(times), dtype=float)

    g_arrays = {}
    for eps in eps_ladder:
        if eps * n < MIN_MOLLIFIER_SITES:
            raise ValueError(
                f"mollifier width {eps} unresolved by the lattice: eps*n = {eps * n:.3g} < "
                f"{MIN_MOLLIFIER_SITES}"
            )
        moll = Mollifier(eps)
        phi_vals = moll(sites)
        g = np.empty_like(rho_sites)
        for k in range(len(times)):
            g[k] = phi_vals * chi(rho_origin[k]) / (q_values[k] * chi(rho_sites[k]))
        g_arrays[float(eps)] = g

    # dense cumulative of the deterministic centering integral
    det_grid = np.linspace(0.0, float(times[-1]), det_grid_size) if len(times) else np.zeros(1)
    if density is not None and len(times):
        rho0_dense = np.array([density(t, 0.0) for t in det_grid])
        integrand = rho0_dense / spec.weight(det_grid)
        det_cum = np.concatenate(
            [[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(det_grid))]
        )
    else:
        det_cum = np.zeros_like(det_grid)

    dynkin = {}
    if dynkin_functions and abs(times[0]) > 1e-12:
        raise ValueError("martingale tracking needs a snapshot at time 0")
    for name in dynkin_functions:
        if name not in functions:
            raise ValueError(f"martingale tracking requested for unknown function {name!r}")
        f = functions[name]
        f_next = np.roll(f, -1)
        f_prev = np.roll(f, 1)
        drift_sites = spec.drift(sites)
        lap = f_next + f_prev - 2.0 * f
        df = f_next - f
        c1 = df * drift_sites / n
        c2 = df * np.roll(drift_sites, -1) / n
        corr = (rho_sites - rho_sites[0]) @ f / np.sqrt(n)
        dynkin[name] = {"lap": lap, "c1": c1, "c2": c2, "corr": corr}

    return ObservablePlan(
        spec=spec,
        density=density,
        times=times,
        rho_sites=rho_sites,
        rho_origin=rho_origin,
        q_values=q_values,
        functions=functions,
        g_arrays=g_arrays,
        det_grid=det_grid,
        det_cum=det_cum,
        dynkin=dynkin,
        gamma_times=tuple(gamma_times),
        z_times=tuple(z_times),
        x_times=tuple(x_times),
        dynkin_times=tuple(dynkin_times),
        eta_mean_times=tuple(eta_mean_times),
        keep_final=keep_final,
        initial_config=initial_config,
    )


def z_discrete(record, rho: DensityField, moll: Mollifier, spec: ModelSpec, t: float) -> float:
    """Trapezoidal time integral up to t of the field paired with g_s.

    Reads the recorded integrand series for the matching mollifier width;
    widths not in the recorded ladder cannot be reconstructed afterwards.
    """
    if moll.eps * spec.n < MIN_MOLLIFIER_SITES:
        raise ValueError(
            f"mollifier width {moll.eps} unresolved by the lattice (eps*n < {MIN_MOLLIFIER_SITES})"
        )
    eps = None
    for key in record.z_integrand:
        if abs(key - moll.eps) < 1e-12:
            eps = key
            break
    if eps is None:
        raise KeyError(f"width {moll.eps} not in the recorded ladder {sorted(record.z_integrand)}")
    return record.z_at(eps, t)
