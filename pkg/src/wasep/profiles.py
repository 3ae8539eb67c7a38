"""Built-in smooth function families on the unit torus and on a time interval.

Every drift field, density profile and time weight used by a run is drawn
from a small set of named families, so that any experiment is reproducible
from its manifest alone (no user code is ever evaluated).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "SmoothFunction",
    "TimeWeight",
    "make_function",
    "parse_test_function",
    "FAMILIES",
]

FAMILIES = ("constant", "cosine", "fourier", "bump")

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SmoothFunction:
    """A smooth periodic function u in [0,1) -> R from a named family.

    Families:
      constant  params: value
      cosine    params: offset, amplitude, k (integer mode), phase
      fourier   params: offset, terms = [(k, cos_coeff, sin_coeff), ...]
      bump      params: offset, height, center, width  (support of the bump
                is the torus arc of length `width` centered at `center`)

    Instances are immutable, picklable and vectorized over numpy arrays.
    """

    family: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown function family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "params", dict(self.params))
        # touch once so malformed parameters fail at construction, not mid-run
        self(np.array([0.0, 0.37]))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.family == "constant":
            return np.full_like(u, float(p.get("value", 0.0)))
        if self.family == "cosine":
            k = int(p.get("k", 1))
            return float(p.get("offset", 0.0)) + float(p.get("amplitude", 1.0)) * np.cos(
                _TWO_PI * k * u + float(p.get("phase", 0.0))
            )
        if self.family == "fourier":
            out = np.full_like(u, float(p.get("offset", 0.0)))
            for k, c, s in p.get("terms", ()):
                out += float(c) * np.cos(_TWO_PI * int(k) * u) + float(s) * np.sin(_TWO_PI * int(k) * u)
            return out
        # bump: smooth compactly supported hump, exp(1 - 1/(1 - z^2)) on |z|<1
        offset = float(p.get("offset", 0.0))
        height = float(p.get("height", 1.0))
        center = float(p.get("center", 0.5))
        width = float(p.get("width", 0.5))
        if not 0.0 < width <= 1.0:
            raise ValueError(f"bump width must be in (0, 1], got {width}")
        d = u - center
        d -= np.round(d)  # signed torus distance in [-1/2, 1/2)
        z = 2.0 * d / width
        out = np.full_like(u, offset)
        inside = np.abs(z) < 1.0
        zi = z[inside]
        out[inside] += height * np.exp(1.0 - 1.0 / (1.0 - zi * zi))
        return out

    def grid_values(self, m: int) -> np.ndarray:
        """Values at the m uniformly spaced grid points j/m."""
        return self(np.arange(m) / m)

    def sup_abs(self, probe: int = 4096) -> float:
        return float(np.max(np.abs(self(np.arange(probe) / probe))))

    def range_on_grid(self, probe: int = 4096) -> tuple[float, float]:
        v = self(np.arange(probe) / probe)
        return float(v.min()), float(v.max())

    def describe(self) -> dict:
        return {"family": self.family, "params": _jsonable(self.params)}


@dataclass(frozen=True)
class TimeWeight:
    """A smooth weight s in [0, horizon] -> R, built from a SmoothFunction of s/T.

    The bound factor M is the smallest M >= 1 with 1/M <= q <= M on a fine
    grid; construction fails if the weight is not strictly positive.
    """

    base: SmoothFunction
    horizon: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.base(s / self.horizon)

    def bound_factor(self, probe: int = 4096) -> float:
        v = self(np.linspace(0.0, self.horizon, probe))
        lo, hi = float(v.min()), float(v.max())
        if lo <= 0.0:
            raise ValueError(f"time weight must stay positive, found min {lo}")
        return max(hi, 1.0 / lo, 1.0)

    def describe(self) -> dict:
        d = self.base.describe()
        d["horizon"] = self.horizon
        return d


def make_function(family: str, params: Mapping[str, object] | None = None) -> SmoothFunction:
    return SmoothFunction(family, params or {})


def parse_test_function(name: str) -> SmoothFunction:
    """Resolve a named test function, e.g. "fourier:k=1" or "constant:c=1".

    Grammar:
      fourier:k=K        -> sqrt(2) * cos(2 pi K u)   (unit L2 norm)
      fourier:k=K:sin    -> sqrt(2) * sin(2 pi K u)
      constant:c=C       -> C
    """
    parts = name.split(":")
    kind = parts[0]
    opts = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
    flags = {p for p in parts[1:] if "=" not in p}
    if kind == "fourier":
        k = int(opts.get("k", 1))
        if k < 1:
            raise ValueError(f"test function {name!r}: mode k must be >= 1")
        amp = np.sqrt(2.0)
        if "sin" in flags:
            return SmoothFunction("fourier", {"terms": [(k, 0.0, amp)]})
        return SmoothFunction("fourier", {"terms": [(k, amp, 0.0)]})
    if kind == "constant":
        return SmoothFunction("constant", {"value": float(opts.get("c", 1.0))})
    raise ValueError(f"unknown test function {name!r}")


def _jsonable(params: Mapping[str, object]) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (list, tuple)):
            out[k] = [list(t) if isinstance(t, (list, tuple)) else t for t in v]
        else:
            out[k] = v
    return out
