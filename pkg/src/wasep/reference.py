"""Slow instrumented event loop used to validate the production kernel.

Runs the identical rejection dynamics in plain Python while recording
everything the fast kernel does not: per-site occupation times, attempt
counts by direction, and the full event log.  When handed the same
pre-drawn randomness buffers it reproduces the kernel's trajectory exactly,
which pins the two implementations against each other event by event.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Configuration, ModelSpec

__all__ = ["ReferenceTrace", "run_reference"]


@dataclass
class ReferenceTrace:
    eta: np.ndarray
    t_micro: float
    events: int
    accepted: int
    site_occupation: np.ndarray      # time-integrated occupancy per site (micro units)
    attempts_right: np.ndarray       # attempted right jumps launched from each site
    attempts_left: np.ndarray
    origin_flips: list = field(default_factory=list)
    event_log: list | None = None


def run_reference(
    spec: ModelSpec,
    initial: Configuration,
    t_end_micro: float,
    rng: np.random.Generator | None = None,
    buffers: tuple | None = None,
    keep_event_log: bool = False,
) -> ReferenceTrace:
    """Drive the rejection chain to t_end_micro.

    Randomness comes either from `rng` (drawn on demand) or from `buffers`
    = (first_wait, exps, picks, coins) with the kernel's consumption order:
    event i uses picks[i], coins[i], then exps[i] for the next wait.
    """
    n = spec.n
    eta = initial.eta.copy()
    positions = list(np.flatnonzero(eta))
    K = len(positions)
    p_right = spec.right_probabilities()

    occupation = np.zeros(n)
    att_r = np.zeros(n, dtype=np.int64)
    att_l = np.zeros(n, dtype=np.int64)
    flips = []
    log = [] if keep_event_log else None

    if K == 0:
        return ReferenceTrace(eta, t_end_micro, 0, 0, occupation, att_r, att_l, flips, log)

    rate = 2.0 * K
    if buffers is not None:
        first_wait, exps, picks, coins = buffers
        t_next = first_wait / rate
    else:
        exps = picks = coins = None
        t_next = rng.standard_exponential() / rate

    occupied_since = {x: 0.0 for x in positions}
    t_prev = 0.0
    i = 0
    events = accepted = 0
    while t_next <= t_end_micro:
        if buffers is not None:
            u_pick, u_coin, wait = picks[i], coins[i], exps[i]
        else:
            u_pick = rng.random()
            u_coin = rng.random()
            wait = rng.standard_exponential()
        j = min(int(u_pick * K), K - 1)
        x = positions[j]
        right = u_coin < p_right[x]
        (att_r if right else att_l)[x] += 1
        y = (x + 1) % n if right else (x - 1) % n
        moved = False
        if eta[y] == 0:
            occupation[x] += t_next - occupied_since[x]
            del occupied_since[x]
            occupied_since[y] = t_next
            eta[x] = 0
            eta[y] = 1
            positions[j] = y
            moved = True
            accepted += 1
            if x == 0 or y == 0:
                flips.append(t_next)
        if log is not None:
            log.append((t_next, x, y, moved))
        events += 1
        t_prev = t_next
        t_next += wait / rate
        i += 1
    for x, since in occupied_since.items():
        occupation[x] += t_end_micro - since
    return ReferenceTrace(
        eta=eta, t_micro=t_end_micro, events=events, accepted=accepted,
        site_occupation=occupation, attempts_right=att_r, attempts_left=att_l,
        origin_flips=flips, event_log=log,
    )
