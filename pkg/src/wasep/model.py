"""Lattice model: torus geometry, jump rates, and initial-measure sampling.

The model is a nearest-neighbour exclusion process on the discrete torus with
n sites.  A particle at site x attempts jumps to x +/- 1 with rates
1 +/- F(x/n)/n for a smooth drift field F, and jumps onto occupied sites are
suppressed.  Initial configurations are drawn from a Bernoulli product
measure whose site-x occupation probability is rho0(x/n).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .profiles import SmoothFunction, TimeWeight

__all__ = ["ModelSpec", "Configuration", "jump_rate", "sample_initial", "initial_entropy"]


@dataclass(frozen=True)
class ModelSpec:
    """Static data defining one run: lattice size, coefficients and horizon.

    Fields
      n        lattice size (sites), integer >= 4
      drift    smooth field F on the torus (events per site, order-1/n bias)
      profile  smooth initial density rho0, valued in (margin, 1 - margin)
      weight   smooth positive time weight q on [0, horizon]
      horizon  macroscopic time horizon T
      margin   profile margin eps0 in (0, 1/2)

    `validate=False` skips the profile-margin check; this exists only for
    degenerate test profiles (all-empty / all-full lattices).
    """

    n: int
    drift: SmoothFunction
    profile: SmoothFunction
    weight: TimeWeight
    horizon: float
    margin: float = 0.05
    validate: bool = True
    weight_bound: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"lattice size must be an integer >= 4, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not 0.0 < self.margin < 0.5:
            raise ValueError(f"profile margin must lie in (0, 1/2), got {self.margin}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        sup_f = self.drift.sup_abs()
        if 1.0 - sup_f / self.n <= 0.0:
            raise ValueError(
                f"n={self.n} too small for drift with sup|F|={sup_f:.3g}: rates would be negative"
            )
        if self.validate:
            lo, hi = self.profile.range_on_grid()
            if lo <= self.margin or hi >= 1.0 - self.margin:
                raise ValueError(
                    f"initial profile leaves ({self.margin}, {1 - self.margin}): range [{lo:.4g}, {hi:.4g}]"
                )
        object.__setattr__(self, "weight_bound", self.weight.bound_factor())

    def sites(self) -> np.ndarray:
        """Macroscopic positions x/n of the lattice sites."""
        return np.arange(self.n) / self.n

    def right_probabilities(self) -> np.ndarray:
        """(1 + F(x/n)/n)/2 per site: chance a jump attempt goes right."""
        p = 0.5 * (1.0 + self.drift(self.sites()) / self.n)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("jump rates out of range; drift too large for this n")
        return p

    def profile_at_sites(self) -> np.ndarray:
        return self.profile(self.sites())


@dataclass
class Configuration:
    """Occupation state: a {0,1} vector over the torus plus its cached count."""

    eta: np.ndarray
    particle_count: int

    @classmethod
    def from_eta(cls, eta) -> "Configuration":
        eta = np.ascontiguousarray(np.asarray(eta), dtype=np.uint8)
        if eta.ndim != 1:
            raise ValueError("configuration must be a 1-d occupation vector")
        if np.any(eta > 1):
            raise ValueError("occupation entries must be 0 or 1")
        return cls(eta=eta, particle_count=int(eta.sum()))

    def copy(self) -> "Configuration":
        return Configuration(eta=self.eta.copy(), particle_count=self.particle_count)

    def positions(self) -> np.ndarray:
        """Sites of the particles, ascending."""
        return np.flatnonzero(self.eta).astype(np.int64)

    def as_int(self) -> int:
        """Pack the configuration into an integer bitmask (site x -> bit x)."""
        return int(np.sum(self.eta.astype(object) << np.arange(self.eta.size, dtype=object)))


def jump_rate(spec: ModelSpec, x: int, direction: int) -> float:
    """Rate of the jump from site x to x + direction, direction in {-1, +1}."""
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction}")
    assert 0 <= x < spec.n
    return 1.0 + direction * float(spec.drift(np.array(x / spec.n))) / spec.n


def sample_initial(spec: ModelSpec, rng: np.random.Generator) -> Configuration:
    """Draw a configuration from the product measure with profile rho0(x/n)."""
    probs = spec.profile_at_sites()
    eta = (rng.random(spec.n) < probs).astype(np.uint8)
    return Configuration(eta=eta, particle_count=int(eta.sum()))


def initial_entropy(spec: ModelSpec, mu_profile: Callable[[np.ndarray], np.ndarray]) -> float:
    """Relative entropy (nats) of the product measure with profile mu against
    the reference product measure with profile rho0; exact for products:

        sum_x  m_x log(m_x / p_x) + (1 - m_x) log((1 - m_x) / (1 - p_x)).
    """
    u = spec.sites()
    m = np.asarray(mu_profile(u), dtype=float)
    p = np.asarray(spec.profile(u), dtype=float)
    tol = 1e-12
    for name, v in (("mu", m), ("rho0", p)):
        if np.any(v < tol) or np.any(v > 1.0 - tol):
            raise ValueError(f"{name} profile touches {{0,1}} within {tol}; entropy undefined")
    return float(np.sum(m * np.log(m / p) + (1.0 - m) * np.log((1.0 - m) / (1.0 - p))))
