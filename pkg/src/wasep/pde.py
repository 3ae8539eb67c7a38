"""Deterministic solvers on the torus: the density equation and its backward
evolution operator.

The density rho solves the drift-diffusion conservation law

    d_t rho = d_uu rho - 2 d_u { rho (1 - rho) F },   u in [0,1) periodic,

discretized in conservative flux form (central second order, interface
fluxes) and advanced with explicit RK4 under a diffusive step bound
dt <= cfl * h^2, cfl <= 1/4.  Mass is conserved to rounding because the
flux differences telescope.

The backward operator propagates terminal data f at time t to earlier
times s <= t through

    d_s v + L_s v = 0,    L_s f = Lap f + 2 (1 - 2 rho_s) F f',

integrated forward in tau = t - s with the same scheme class.  Solutions
store value and spatial-derivative slices on a uniform time grid so that
covariance quadratures can pair them cheaply.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _kern
from .model import ModelSpec

__all__ = [
    "DensityField",
    "SemigroupSolution",
    "solve_hydro",
    "solve_backward",
    "apply_generator",
    "gradient_energy",
]

MAX_CFL = 0.25
_BLOWUP_LO = 1e-6
_BLOWUP_HI = 1.0 - 1e-6


@dataclass
class DensityField:
    """Density values on a (time, space) grid with interpolation.

    values[k, j] approximates rho(times[k], j/m); times is uniform on
    [0, t_end].  Space queries use periodic 4-point (cubic) interpolation,
    time queries blend the two bracketing slices linearly.
    """

    grid_m: int
    times: np.ndarray
    values: np.ndarray
    mass_drift: float
    grad_bound: float
    min_gap: float

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def _bracket(self, t: float) -> tuple[int, int, float]:
        dt = self.times[1] - self.times[0]
        pos = np.clip(t / dt, 0.0, len(self.times) - 1.0)
        k = min(int(pos), len(self.times) - 2)
        w = pos - k
        return k, k + 1, float(w)

    def slice_at(self, t: float) -> np.ndarray:
        """rho(t, .) on the m-point grid (linear in time)."""
        if not -1e-12 <= t <= self.t_end + 1e-12:
            raise ValueError(f"time {t} outside stored range [0, {self.t_end}]")
        k0, k1, w = self._bracket(t)
        return (1.0 - w) * self.values[k0] + w * self.values[k1]

    def at_sites(self, t: float, n: int) -> np.ndarray:
        """rho(t, x/n) for x = 0..n-1; exact grid lookup when m % n == 0."""
        sl = self.slice_at(t)
        if self.grid_m % n == 0:
            return sl[:: self.grid_m // n].copy()
        return _cubic_periodic(sl, np.arange(n) / n)

    def __call__(self, t: float, u) -> np.ndarray:
        return _cubic_periodic(self.slice_at(t), np.asarray(u, dtype=float))

    def origin_series(self) -> np.ndarray:
        """rho(times[k], 0) for every stored slice."""
        return self.values[:, 0].copy()


@dataclass
class SemigroupSolution:
    """Backward evolution of terminal data f at time t to all s in [0, t].

    values[k] is the propagated function at time times[k]; grads[k] its
    spatial derivative (4th-order central differences).  times[-1] == t and
    values[-1] is the terminal data itself, exactly.
    """

    terminal_time: float
    grid_m: int
    times: np.ndarray
    values: np.ndarray
    grads: np.ndarray

    def at(self, s: float) -> np.ndarray:
        k0, k1, w = _bracket_uniform(self.times, s)
        return (1.0 - w) * self.values[k0] + w * self.values[k1]

    def grad_at(self, s: float) -> np.ndarray:
        k0, k1, w = _bracket_uniform(self.times, s)
        return (1.0 - w) * self.grads[k0] + w * self.grads[k1]


def _bracket_uniform(times: np.ndarray, t: float) -> tuple[int, int, float]:
    if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
        raise ValueError(f"time {t} outside stored range [{times[0]}, {times[-1]}]")
    if len(times) == 1 or times[-1] <= times[0]:
        return 0, 0, 0.0
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2)
    span = times[k + 1] - times[k]
    w = 0.0 if span <= 0.0 else (t - times[k]) / span
    return k, k + 1, float(np.clip(w, 0.0, 1.0))


def _cubic_periodic(vals: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Periodic 4-point Lagrange interpolation on the uniform grid j/m."""
    m = vals.size
    x = (u % 1.0) * m
    j = np.floor(x).astype(np.int64)
    s = x - j
    vm1 = vals[(j - 1) % m]
    v0 = vals[j % m]
    v1 = vals[(j + 1) % m]
    v2 = vals[(j + 2) % m]
    # Lagrange weights on nodes -1, 0, 1, 2
    wm1 = -s * (s - 1.0) * (s - 2.0) / 6.0
    w0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
    w1 = -(s + 1.0) * s * (s - 2.0) / 2.0
    w2 = (s + 1.0) * s * (s - 1.0) / 6.0
    out = wm1 * vm1 + w0 * v0 + w1 * v1 + w2 * v2
    return out if out.shape else float(out)


def solve_hydro(
    spec: ModelSpec,
    m: int,
    t_end: float,
    cfl: float = MAX_CFL,
    store_slices: int = 2049,
) -> DensityField:
    """Integrate the density equation up to t_end on an m-point grid."""
    if m < 32:
        raise ValueError(f"grid size must be >= 32, got {m}")
    if not 0.0 < cfl <= MAX_CFL:
        raise ValueError(f"cfl must lie in (0, {MAX_CFL}], got {cfl}")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")

    h = 1.0 / m
    n_steps = max(1, int(np.ceil(t_end / (cfl * h * h))))
    dt = t_end / n_steps
    f_iface = np.ascontiguousarray(spec.drift((np.arange(m) + 0.5) / m), dtype=float)

    rho = np.ascontiguousarray(spec.profile.grid_values(m), dtype=float)

    store_slices = max(2, int(store_slices))
    store_times = np.linspace(0.0, t_end, store_slices)
    stored = np.empty((store_slices, m))
    stored[0] = rho

    blow_step, grad_bound, min_gap, mass_drift = _kern.hydro_run(
        rho, f_iface, dt, n_steps, store_times, stored, _BLOWUP_LO, _BLOWUP_HI
    )
    if blow_step >= 0:
        raise RuntimeError(
            f"density left [{_BLOWUP_LO}, {_BLOWUP_HI}] at t={(blow_step + 1) * dt:.6g}; "
            "solver blow-up"
        )
    stored[-1] = rho
    return DensityField(
        grid_m=m,
        times=store_times,
        values=stored,
        mass_drift=float(mass_drift),
        grad_bound=float(grad_bound),
        min_gap=float(min_gap),
    )


def apply_generator(spec: ModelSpec, rho_slice: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Lap f + 2 (1 - 2 rho) F f' by central differences on the m-point grid."""
    m = f.size
    if rho_slice.size != m:
        raise ValueError(f"grid mismatch: rho has {rho_slice.size} points, f has {m}")
    lap = (np.roll(f, -1) + np.roll(f, 1) - 2.0 * f) * m * m
    dfu = (np.roll(f, -1) - np.roll(f, 1)) * (0.5 * m)
    f_sites = spec.drift(np.arange(m) / m)
    return lap + 2.0 * (1.0 - 2.0 * rho_slice) * f_sites * dfu


def _grad4(v: np.ndarray, m: int) -> np.ndarray:
    """4th-order central first derivative on the periodic grid."""
    return (
        -np.roll(v, -2) + 8.0 * np.roll(v, -1) - 8.0 * np.roll(v, 1) + np.roll(v, 2)
    ) * (m / 12.0)


def solve_backward(
    spec: ModelSpec,
    rho: DensityField,
    f,
    t: float,
    cfl: float = MAX_CFL,
    store_slices: int = 1025,
    store_times: np.ndarray | None = None,
) -> SemigroupSolution:
    """Propagate terminal data f at time t back to s = 0.

    `f` may be a callable on [0,1) or values on the density grid.  The
    result stores value/derivative slices either at store_slices uniform
    times in [0, t] or at the explicitly supplied sorted `store_times`
    (which must start at 0 and end at t); the terminal slice is f exactly.
    """
    m = rho.grid_m
    if t < 0.0 or t > rho.t_end + 1e-12:
        raise ValueError(f"terminal time {t} outside density range [0, {rho.t_end}]")
    # the stepper advances v in place, so never alias the caller's array
    v = np.array(f(np.arange(m) / m) if callable(f) else f, dtype=float, copy=True)
    if v.size != m:
        raise ValueError(f"terminal data has {v.size} points, density grid has {m}")
    if not 0.0 < cfl <= MAX_CFL:
        raise ValueError(f"cfl must lie in (0, {MAX_CFL}], got {cfl}")

    if store_times is not None:
        s_times = np.asarray(store_times, dtype=float)
        if len(s_times) < 1 or abs(s_times[-1] - t) > 1e-12 or np.any(np.diff(s_times) <= 0):
            raise ValueError("store_times must be strictly increasing and end at t")
        if s_times[0] < -1e-15:
            raise ValueError("store_times must be nonnegative")
    else:
        s_times = np.linspace(0.0, t, max(2, int(store_slices)))
    store_count = len(s_times)
    values = np.empty((store_count, m))
    values[:] = v  # rows earlier than the first recorded step stay terminal

    if t > 0.0:
        h = 1.0 / m
        n_steps = max(1, int(np.ceil(t / (cfl * h * h))))
        dt = t / n_steps
        f_sites = np.ascontiguousarray(spec.drift(np.arange(m) / m), dtype=float)
        v = np.ascontiguousarray(v)
        rho_dt = rho.times[1] - rho.times[0]
        # tau runs forward from 0 (s = t) to t (s = 0); store index runs down
        next_store = _kern.backward_run(
            v, f_sites, rho.values, rho_dt, t, dt, n_steps, s_times, values
        )
        if next_store >= 0:
            values[: next_store + 1] = v

    grads = (
        -np.roll(values, -2, axis=1)
        + 8.0 * np.roll(values, -1, axis=1)
        - 8.0 * np.roll(values, 1, axis=1)
        + np.roll(values, 2, axis=1)
    ) * (m / 12.0)
    return SemigroupSolution(
        terminal_time=t, grid_m=m, times=s_times, values=values, grads=grads
    )


def gradient_energy(v: np.ndarray) -> float:
    """(1/m) sum ((v_{j+1}-v_j)/h)^2, the discrete Dirichlet form matched to
    the flux-form Laplacian; the exact dissipation rate of ||v||^2 / 2."""
    m = v.size
    d = (np.roll(v, -1) - v) * m
    return float(np.mean(d * d))
